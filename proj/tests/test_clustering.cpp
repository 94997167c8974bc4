#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <sstream>

#include "support.hpp"
#include "vtfeed/clustering.hpp"
#include "vtfeed/error.hpp"
#include "vtfeed/evaluation.hpp"
#include "vtfeed/union_find.hpp"
#include "vtfeed/vptree.hpp"

using namespace vtfeed;
using testsupport::Partition;
using testsupport::partition_of;

namespace {

std::string id(int i) {
  char buf[65];
  std::snprintf(buf, sizeof buf, "%064d", i);
  return buf;
}

FvgRow fvg(std::optional<std::string> v, int sha, Timestamp t = 0) { return {std::move(v), id(sha), t}; }

// Independent FVG oracle: latest row per sample (ties: non-NULL, then smaller value), then hash grouping.
Partition fvg_oracle(const std::vector<FvgRow>& rows) {
  std::map<std::string, const FvgRow*> latest;
  for (const auto& r : rows) {
    auto& cur = latest[r.sha256];
    if (!cur) {
      cur = &r;
      continue;
    }
    auto key = [](const FvgRow* x) { return std::make_tuple(-x->scan_date, !x->value, x->value.value_or("")); };
    if (key(&r) < key(cur)) cur = &r;
  }
  std::map<std::string, std::vector<std::string>> groups;
  Partition p;
  for (const auto& [sha, r] : latest) {
    if (r->value) {
      groups[*r->value].push_back(sha);
    } else {
      p.insert({sha});
    }
  }
  for (auto& [v, members] : groups) {
    std::sort(members.begin(), members.end());
    p.insert(members);
  }
  return p;
}

std::vector<HactInput> hact_inputs(const std::vector<tlsh::Digest>& d) {
  std::vector<HactInput> out;
  for (std::size_t i = 0; i < d.size(); ++i) out.push_back({id(static_cast<int>(i)), d[i]});
  return out;
}

Partition closure_oracle(const std::vector<tlsh::Digest>& d, int cdist) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < d.size(); ++i) ids.push_back(id(static_cast<int>(i)));
  return testsupport::brute_components(ids, [&](std::size_t i, std::size_t j) {
    return tlsh::distance(d[i], d[j]) <= cdist;
  });
}

}  // namespace

TEST_SUITE("clustering") {

TEST_CASE("union find") {
  UnionFind uf(6);
  CHECK(uf.unite(0, 3));
  CHECK(uf.unite(4, 3));
  CHECK_FALSE(uf.unite(0, 4));
  CHECK(uf.unite(5, 1));
  const auto g = uf.groups();
  REQUIRE(g.size() == 3);
  CHECK(g[0] == std::vector<std::uint32_t>{0, 3, 4});
  CHECK(g[1] == std::vector<std::uint32_t>{1, 5});
  CHECK(g[2] == std::vector<std::uint32_t>{2});
}

TEST_CASE("clustering construction") {
  CHECK_THROWS_AS(Clustering::from_clusters({{{}, SingletonReason::None}}), Error);
  CHECK_THROWS_AS(Clustering::from_clusters({{{"a"}, SingletonReason::None}, {{"a", "b"}, SingletonReason::None}}),
                  Error);
  const auto c = Clustering::canonical({{{"d", "b"}, SingletonReason::None}, {{"a"}, SingletonReason::UniqueValue}});
  REQUIRE(c.size() == 2);
  CHECK(c.cluster(0).members == std::vector<std::string>{"a"});
  CHECK(c.cluster(1).members == std::vector<std::string>{"b", "d"});
  CHECK(c.cluster_of("d") == 1u);
  CHECK_FALSE(c.cluster_of("z"));
  CHECK(c.sample_count() == 3);
}

TEST_CASE("cluster file round trip") {
  const auto c = Clustering::canonical({{{id(3), id(1)}, SingletonReason::None},
                                        {{id(2)}, SingletonReason::NullFeature},
                                        {{id(0)}, SingletonReason::UniqueValue}});
  std::stringstream ss;
  write_cluster_file(ss, c);
  const auto text = ss.str();
  CHECK(text.find(id(0) + "\tunique-value") != std::string::npos);
  const auto back = read_cluster_file(ss);
  CHECK(same_partition(back, c));
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(back.cluster(i).reason == c.cluster(i).reason);
  std::stringstream again;
  write_cluster_file(again, back);
  CHECK(again.str() == text);

  std::stringstream bad("0\tabc\tnone\n0\tdef\tbogus\n");
  CHECK_THROWS_AS(read_cluster_file(bad), MalformedRow);
}

TEST_CASE("fvg example") {
  std::vector<FvgRow> rows{fvg("A", 1), fvg("A", 2), fvg("B", 3), fvg(std::nullopt, 4)};
  FvgReport report;
  const auto c = fvg_cluster(rows, {}, &report);
  CHECK(partition_of(c) == Partition{{id(1), id(2)}, {id(3)}, {id(4)}});
  CHECK(c.cluster(*c.cluster_of(id(4))).reason == SingletonReason::NullFeature);
  CHECK(c.cluster(*c.cluster_of(id(3))).reason == SingletonReason::UniqueValue);
  CHECK(c.cluster(*c.cluster_of(id(1))).reason == SingletonReason::None);
  CHECK(report.clusters == 3);
  CHECK(report.null_singletons == 1);
  CHECK(fvg_cluster({}).empty());
}

TEST_CASE("fvg uses the latest row of a repeated sample") {
  std::vector<FvgRow> rows{fvg("A", 1, 5), fvg("B", 1, 9), fvg("A", 2, 1), fvg("B", 3, 1), fvg(std::nullopt, 2, 0)};
  CHECK(partition_of(fvg_cluster(rows)) == Partition{{id(1), id(3)}, {id(2)}});
  rows = {fvg(std::nullopt, 1, 5), fvg("A", 1, 5), fvg("A", 2, 5)};
  CHECK(partition_of(fvg_cluster(rows)) == Partition{{id(1), id(2)}});
}

TEST_CASE("fvg equals hash grouping regardless of row order and spilling") {
  std::mt19937_64 rng(21);
  testsupport::TempDir tmp;
  for (int round = 0; round < 10; ++round) {
    std::vector<FvgRow> rows;
    const int n = 200 + static_cast<int>(rng() % 3000);
    for (int i = 0; i < n; ++i) {
      std::optional<std::string> v;
      if (rng() % 10 >= 3) v = "v" + std::to_string(rng() % (n / 4 + 1));
      rows.push_back(fvg(v, static_cast<int>(rng() % (n * 3 / 4 + 1)), static_cast<Timestamp>(rng() % 20)));
    }
    const auto expected = fvg_oracle(rows);
    CHECK(partition_of(fvg_cluster(rows)) == expected);
    std::shuffle(rows.begin(), rows.end(), rng);
    SortOptions tiny;
    tiny.memory_budget = 64 << 10;
    tiny.temp_dir = tmp.path();
    tiny.max_fan_in = 3;
    FvgReport report;
    CHECK(partition_of(fvg_cluster(rows, tiny, &report)) == expected);
    CHECK(report.runs > 0);
  }
  CHECK(std::filesystem::is_empty(tmp.path()));
}

TEST_CASE("fvg rejects values that cannot live in one field") {
  std::vector<FvgRow> rows{fvg("a\tb", 1)};
  CHECK_THROWS_AS(fvg_cluster(rows), MalformedRow);
}

TEST_CASE("vp-tree structure") {
  CHECK(VPTree::build({}).empty());
  std::mt19937_64 rng(2);
  const auto one = VPTree::build({synth::random_digest(rng)});
  REQUIRE(one.nodes().size() == 1);
  CHECK(one.nodes()[0].is_leaf());
  CHECK(one.radius_query(one.digests()[0], 0, true) == std::vector<std::uint32_t>{0});

  const auto digests = testsupport::clustered_digests(3000, 30, rng);
  const auto tree = VPTree::build(digests, 7);
  std::vector<int> reached(digests.size(), 0);
  // Walk every node, checking the split invariant under the bound metric.
  std::function<void(std::int32_t, std::vector<std::pair<std::int32_t, bool>>&)> walk =
      [&](std::int32_t n, std::vector<std::pair<std::int32_t, bool>>& path) {
        const auto& node = tree.nodes()[static_cast<std::size_t>(n)];
        auto visit = [&](std::uint32_t item) {
          ++reached[item];
          for (const auto& [anc, inside] : path) {
            const auto& a = tree.nodes()[static_cast<std::size_t>(anc)];
            const int b = tlsh::bound(digests[item], digests[static_cast<std::size_t>(a.vantage)]);
            if (inside ? b > a.radius : b <= a.radius) FAIL("split invariant violated");
          }
        };
        if (node.is_leaf()) {
          for (auto k = node.bucket_begin; k < node.bucket_end; ++k) visit(tree.bucket_items()[k]);
          return;
        }
        visit(static_cast<std::uint32_t>(node.vantage));
        if (node.inside >= 0) {
          path.emplace_back(n, true);
          walk(node.inside, path);
          path.pop_back();
        }
        if (node.outside >= 0) {
          path.emplace_back(n, false);
          walk(node.outside, path);
          path.pop_back();
        }
      };
  std::vector<std::pair<std::int32_t, bool>> path;
  walk(0, path);
  CHECK(std::all_of(reached.begin(), reached.end(), [](int r) { return r == 1; }));
}

TEST_CASE("vp-tree radius queries match a linear scan") {
  std::mt19937_64 rng(3);
  const auto digests = testsupport::clustered_digests(10'000, 200, rng);
  const auto tree = VPTree::build(digests, 1);
  for (int q = 0; q < 300; ++q) {
    const auto& query = rng() % 4 ? digests[rng() % digests.size()] : synth::random_digest(rng);
    const int r = static_cast<int>(rng() % 80);
    std::vector<std::uint32_t> expected;
    for (std::uint32_t i = 0; i < digests.size(); ++i) {
      if (tlsh::distance(query, digests[i]) <= r) expected.push_back(i);
    }
    CHECK(tree.radius_query(query, r, true) == expected);
  }
}

TEST_CASE("approximate queries return a subset") {
  std::mt19937_64 rng(4);
  const auto digests = testsupport::clustered_digests(2000, 60, rng);
  const auto tree = VPTree::build(digests, 9);
  std::size_t exact_total = 0, approx_total = 0;
  for (int q = 0; q < 5000; ++q) {
    const auto& query = digests[rng() % digests.size()];
    const auto exact = tree.radius_query(query, 30, true);
    const auto approx = tree.radius_query(query, 30, false);
    if (!std::includes(exact.begin(), exact.end(), approx.begin(), approx.end())) FAIL("approximate not a subset");
    exact_total += exact.size();
    approx_total += approx.size();
  }
  CHECK(approx_total <= exact_total);
  MESSAGE("approximate recall " << double(approx_total) / double(exact_total));
}

TEST_CASE("hact threshold boundary") {
  std::mt19937_64 rng(6);
  const auto a = synth::random_digest(rng);
  auto b = a;
  b.lvalue = static_cast<std::uint8_t>(a.lvalue + 2);  // 24
  for (int i = 0; i < 6; ++i) {
    b.body[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(a.body[static_cast<std::size_t>(i)] ^ 1);
  }
  REQUIRE(tlsh::distance(a, b) == 30);
  auto c = b;
  c.body[10] = static_cast<std::uint8_t>(a.body[10] ^ 1);
  REQUIRE(tlsh::distance(a, c) == 31);
  for (bool exact : {true, false}) {
    CHECK(hact_cluster(hact_inputs({a, b}), 30, exact).size() == 1);
    const auto two = hact_cluster(hact_inputs({a, c}), 30, exact);
    REQUIRE(two.size() == 2);
    CHECK(two.cluster(0).reason == SingletonReason::UniqueValue);
  }
  std::vector<HactInput> with_null{{id(0), a}, {id(1), std::nullopt}};
  const auto n = hact_cluster(with_null, 30, true);
  CHECK(n.cluster(*n.cluster_of(id(1))).reason == SingletonReason::NullFeature);
  CHECK(hact_cluster({}, 30, true).empty());
}

TEST_CASE("hact exact equals transitive closure; approximate refines it") {
  std::mt19937_64 rng(7);
  for (int round = 0; round < 5; ++round) {
    const auto d = testsupport::clustered_digests(1500, 40 + rng() % 80, rng);
    const auto expected = closure_oracle(d, 30);
    const auto exact = hact_cluster(hact_inputs(d), 30, true, rng());
    CHECK(partition_of(exact) == expected);
    const auto approx = hact_cluster(hact_inputs(d), 30, false, rng());
    CHECK(is_refinement(approx, exact));
    CHECK(approx.size() >= exact.size());
  }
}

TEST_CASE("hact exact is invariant to input order and seed") {
  std::mt19937_64 rng(8);
  const auto d = testsupport::clustered_digests(1000, 50, rng);
  auto inputs = hact_inputs(d);
  std::stringstream first;
  write_cluster_file(first, hact_cluster(inputs, 30, true, 1));
  for (int i = 0; i < 3; ++i) {
    std::shuffle(inputs.begin(), inputs.end(), rng);
    std::stringstream again;
    write_cluster_file(again, hact_cluster(inputs, 30, true, rng()));
    CHECK(again.str() == first.str());
  }
}

TEST_CASE("pairwise_distance") {
  const std::vector<std::string> vt{"vhash", "tlsh"};
  const std::vector<std::string> vi{"vhash", "imphash"};
  SampleFeatures a, b;
  a.sha256 = id(1);
  b.sha256 = id(2);
  a.vhash = b.vhash = "v";
  a.imphash = b.imphash = std::string(32, 'a');
  CHECK(pairwise_distance(a, b, DistanceSpec::for_features(vi, 0.8)) == 0.0);
  a.tlsh = "T1" + std::string(70, 'A');
  CHECK(pairwise_distance(a, b, DistanceSpec::for_features(vt, 0.8)) == 0.0);
  b.imphash = std::string(32, 'b');
  CHECK(pairwise_distance(a, b, DistanceSpec::for_features(vi, 0.8)) == 0.5);
  SampleFeatures empty;
  CHECK(pairwise_distance(a, empty, DistanceSpec::for_features(vi, 0.8)) == 1.0);
  b.tlsh = "T1" + std::string(70, 'A');
  CHECK(DistanceSpec::for_features(vt, 0.8).features[1].kind == FeatureKind::Tlsh);
  CHECK(pairwise_distance(a, b, DistanceSpec::for_features(vt, 0.8)) == 0.0);
}

TEST_CASE("hac examples") {
  const std::vector<std::string> names{"vhash", "imphash"};
  SampleFeatures a, b;
  a.sha256 = id(1);
  b.sha256 = id(2);
  a.vhash = b.vhash = "v";
  const std::vector<SampleFeatures> s{a, b};
  CHECK(hac_cluster(s, DistanceSpec::for_features(names, 0.01)).size() == 1);
  const auto zero = hac_cluster(s, DistanceSpec::for_features(names, 0.0));
  CHECK(zero.size() == 2);
  std::vector<SampleFeatures> many(11);
  CHECK_THROWS_AS(hac_cluster(many, DistanceSpec::for_features(names, 0.5), 10), TooLarge);
  SampleFeatures bare;
  bare.sha256 = id(3);
  const auto n = hac_cluster(std::vector<SampleFeatures>{a, bare}, DistanceSpec::for_features(names, 0.8));
  CHECK(n.cluster(*n.cluster_of(id(3))).reason == SingletonReason::NullFeature);
  CHECK(n.cluster(*n.cluster_of(id(1))).reason == SingletonReason::UniqueValue);
}

}  // TEST_SUITE
