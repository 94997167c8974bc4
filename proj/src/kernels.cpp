#include "vtfeed/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <unordered_map>

#include "vtfeed/error.hpp"
#include "vtfeed/union_find.hpp"

namespace vtfeed::kernels {

namespace {

constexpr std::size_t kParallelSortMin = 1 << 14;

// Merges per-thread forests and drops the edges that close a cycle across threads.
std::vector<Edge> merge_forests(std::size_t n, std::vector<std::vector<Edge>>& parts) {
  std::vector<Edge> all;
  for (auto& p : parts) all.insert(all.end(), p.begin(), p.end());
  std::sort(all.begin(), all.end());
  UnionFind uf(n);
  std::vector<Edge> out;
  for (auto [a, b] : all) {
    if (uf.unite(a, b)) out.emplace_back(a, b);
  }
  return out;
}

}  // namespace

void sort_lines(std::vector<std::string_view>& lines, const LineOrder& order, Exec exec) {
  if (exec == Exec::Serial) {
    std::stable_sort(lines.begin(), lines.end(), order);
    return;
  }
  // Each line carries the first 8 bytes of its leading key (big-endian, zero padded) and its input
  // position; most comparisons then stay inside the array, and the position makes the order total
  // so an unstable sort gives the stable result.
  struct Keyed {
    std::uint64_t prefix;
    std::uint64_t pos;
    std::string_view line;
  };
  const std::size_t n = lines.size();
  std::vector<Keyed> keyed(n);
  const std::size_t lead = order.key_columns.empty() ? 0 : order.key_columns.front();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    std::string_view f = lines[static_cast<std::size_t>(i)];
    if (!order.key_columns.empty()) {
      for (std::size_t c = 0; c < lead && !f.empty(); ++c) {
        const auto t = f.find(order.separator);
        f = t == std::string_view::npos ? std::string_view{} : f.substr(t + 1);
      }
      f = f.substr(0, f.find(order.separator));
    }
    std::uint64_t p = 0;
    for (std::size_t b = 0; b < 8; ++b) {
      p = (p << 8) | (b < f.size() ? static_cast<unsigned char>(f[b]) : 0u);
    }
    keyed[static_cast<std::size_t>(i)] = {p, static_cast<std::uint64_t>(i), lines[static_cast<std::size_t>(i)]};
  }
  const auto less = [&](const Keyed& a, const Keyed& b) {
    if (a.prefix != b.prefix) return a.prefix < b.prefix;
    const int c = order.compare(a.line, b.line);
    return c != 0 ? c < 0 : a.pos < b.pos;
  };

  const int threads = omp_get_max_threads();
  if (threads <= 1 || n < kParallelSortMin) {
    std::sort(keyed.begin(), keyed.end(), less);
  } else {
    const auto parts = static_cast<std::size_t>(threads);
    std::vector<std::size_t> bounds(parts + 1);
    for (std::size_t p = 0; p <= parts; ++p) bounds[p] = n * p / parts;
    auto at = [&](std::size_t k) { return keyed.begin() + static_cast<std::ptrdiff_t>(bounds[k]); };
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(parts); ++p) {
      std::sort(at(static_cast<std::size_t>(p)), at(static_cast<std::size_t>(p) + 1), less);
    }
    for (std::size_t width = 1; width < parts; width *= 2) {
      const auto pairs = static_cast<std::ptrdiff_t>((parts + 2 * width - 1) / (2 * width));
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t k = 0; k < pairs; ++k) {
        const std::size_t lo = static_cast<std::size_t>(k) * 2 * width;
        const std::size_t mid = std::min(lo + width, parts);
        const std::size_t hi = std::min(lo + 2 * width, parts);
        if (mid < hi) std::inplace_merge(at(lo), at(mid), at(hi), less);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) lines[i] = keyed[i].line;
}

ParsedReports parse_reports(const std::vector<std::string>& lines, Exec exec) {
  ParsedReports out;
  out.records.resize(lines.size());
  out.errors.resize(lines.size());
  auto parse_one = [&](std::size_t i) {
    try {
      out.records[i] = parse_report_line(lines[i]);
    } catch (const MalformedRecord& e) {
      out.errors[i] = e.what();
    }
  };
  if (exec == Exec::Serial) {
    for (std::size_t i = 0; i < lines.size(); ++i) parse_one(i);
  } else {
#pragma omp parallel for schedule(dynamic, 256)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(lines.size()); ++i) {
      parse_one(static_cast<std::size_t>(i));
    }
  }
  return out;
}

HacMatrix HacMatrix::build(std::span<const SampleFeatures> samples, const DistanceSpec& spec) {
  HacMatrix m;
  m.rows = samples.size();
  const std::size_t f = spec.features.size();
  for (const auto& fs : spec.features) m.kinds.push_back(fs.kind);
  m.codes.assign(m.rows * f, -1);
  m.digests.resize(m.rows);
  for (std::size_t k = 0; k < f; ++k) {
    std::unordered_map<std::string_view, std::int64_t> intern;
    for (std::size_t i = 0; i < m.rows; ++i) {
      const auto& v = feature_value(samples[i], spec.features[k].name);
      if (!v) continue;
      if (spec.features[k].kind == FeatureKind::Tlsh) {
        m.digests[i] = tlsh::parse_digest(*v);
        m.codes[i * f + k] = 0;
      } else {
        auto [it, inserted] = intern.try_emplace(*v, static_cast<std::int64_t>(intern.size()));
        m.codes[i * f + k] = it->second;
      }
    }
  }
  return m;
}

double HacMatrix::distance(std::size_t i, std::size_t j) const noexcept {
  const std::size_t f = kinds.size();
  const std::int64_t* a = codes.data() + i * f;
  const std::int64_t* b = codes.data() + j * f;
  double sum = 0;
  int present = 0;
  for (std::size_t k = 0; k < f; ++k) {
    if (a[k] < 0 || b[k] < 0) continue;
    ++present;
    if (kinds[k] == FeatureKind::Tlsh) {
      sum += tlsh::normalized_distance(digests[i], digests[j]);
    } else {
      sum += a[k] == b[k] ? 0.0 : 1.0;
    }
  }
  return present == 0 ? 1.0 : sum / present;
}

bool HacMatrix::all_null(std::size_t i) const noexcept {
  const std::size_t f = kinds.size();
  for (std::size_t k = 0; k < f; ++k) {
    if (codes[i * f + k] >= 0) return false;
  }
  return true;
}

std::vector<Edge> hac_spanning_edges(const HacMatrix& m, double threshold, Exec exec) {
  const std::size_t n = m.rows;
  if (exec == Exec::Serial) {
    UnionFind uf(n);
    std::vector<Edge> edges;
    for (std::uint32_t i = 0; i < n; ++i) {
      for (std::uint32_t j = i + 1; j < n; ++j) {
        if (uf.find(i) != uf.find(j) && m.distance(i, j) < threshold) {
          uf.unite(i, j);
          edges.emplace_back(i, j);
        }
      }
    }
    return edges;
  }

  std::vector<std::vector<Edge>> parts(static_cast<std::size_t>(omp_get_max_threads()));
#pragma omp parallel
  {
    auto& mine = parts[static_cast<std::size_t>(omp_get_thread_num())];
    UnionFind uf(n);
#pragma omp for schedule(dynamic, 16)
    for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(n); ++si) {
      const auto i = static_cast<std::uint32_t>(si);
      for (std::uint32_t j = i + 1; j < n; ++j) {
        if (uf.find(i) != uf.find(j) && m.distance(i, j) < threshold) {
          uf.unite(i, j);
          mine.emplace_back(i, j);
        }
      }
    }
  }
  return merge_forests(n, parts);
}

std::vector<Edge> hact_spanning_edges(const VPTree& tree, int cdist, bool exact, Exec exec) {
  const auto& digests = tree.digests();
  const std::size_t n = digests.size();
  auto scan = [&](std::uint32_t i, UnionFind& uf, std::vector<Edge>& out) {
    for (auto j : tree.radius_query(digests[i], cdist, exact)) {
      if (j != i && uf.unite(i, j)) out.emplace_back(std::min(i, j), std::max(i, j));
    }
  };
  if (exec == Exec::Serial) {
    UnionFind uf(n);
    std::vector<Edge> edges;
    for (std::uint32_t i = 0; i < n; ++i) scan(i, uf, edges);
    return edges;
  }

  std::vector<std::vector<Edge>> parts(static_cast<std::size_t>(omp_get_max_threads()));
#pragma omp parallel
  {
    auto& mine = parts[static_cast<std::size_t>(omp_get_thread_num())];
    UnionFind uf(n);
#pragma omp for schedule(dynamic, 64)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      scan(static_cast<std::uint32_t>(i), uf, mine);
    }
  }
  return merge_forests(n, parts);
}

}  // namespace vtfeed::kernels
