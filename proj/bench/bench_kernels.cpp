// Serial reference vs OpenMP kernels. Arg 0 = serial, 1 = parallel.

#include <benchmark/benchmark.h>

#include <random>

#include "support.hpp"
#include "vtfeed/kernels.hpp"
#include "vtfeed/synth.hpp"

using namespace vtfeed;

namespace {

Exec exec_of(const benchmark::State& st) { return st.range(0) ? Exec::Parallel : Exec::Serial; }

const std::vector<std::string>& sort_input() {
  static const auto rows = [] {
    std::mt19937_64 rng(1);
    std::vector<std::string> r(1'000'000);
    for (auto& s : r) s = synth::random_hex(rng, 64) + "\t" + std::to_string(rng() % 100'000);
    return r;
  }();
  return rows;
}

void BM_sort_lines(benchmark::State& st) {
  const auto& rows = sort_input();
  LineOrder order;
  order.key_columns = {1, 0};
  for (auto _ : st) {
    std::vector<std::string_view> v(rows.begin(), rows.end());
    kernels::sort_lines(v, order, exec_of(st));
    benchmark::DoNotOptimize(v.data());
  }
  st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations() * rows.size()));
}

void BM_parse_reports(benchmark::State& st) {
  static const auto lines = [] {
    const auto feed = synth::generate_feed({.reports = 100'000, .seed = 2});
    std::vector<std::string> out;
    for (const auto& r : feed.reports) out.push_back(format_report_line(r));
    return out;
  }();
  for (auto _ : st) {
    auto parsed = kernels::parse_reports(lines, exec_of(st));
    benchmark::DoNotOptimize(parsed.records.data());
  }
  st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations() * lines.size()));
}

void BM_hac_edges(benchmark::State& st) {
  static const auto m = [] {
    std::mt19937_64 rng(3);
    const auto samples = testsupport::random_samples(4'000, rng);
    const std::vector<std::string> names{"filetype", "vhash", "imphash", "cert_thumbprint", "tlsh"};
    return kernels::HacMatrix::build(samples, DistanceSpec::for_features(names, 0.8));
  }();
  for (auto _ : st) {
    auto e = kernels::hac_spanning_edges(m, 0.8, exec_of(st));
    benchmark::DoNotOptimize(e.data());
  }
  st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations() * m.rows * m.rows / 2));
}

void BM_hact_edges(benchmark::State& st) {
  static const auto tree = [] {
    std::mt19937_64 rng(4);
    return VPTree::build(testsupport::clustered_digests(20'000, 400, rng), 4);
  }();
  for (auto _ : st) {
    auto e = kernels::hact_spanning_edges(tree, 30, st.range(1) != 0, exec_of(st));
    benchmark::DoNotOptimize(e.data());
  }
  st.SetLabel(st.range(1) ? "exact" : "approximate");
}

}  // namespace

BENCHMARK(BM_sort_lines)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_parse_reports)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_hac_edges)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_hact_edges)->ArgsProduct({{0, 1}, {0, 1}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
