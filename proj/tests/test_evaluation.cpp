#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "support.hpp"
#include "vtfeed/error.hpp"
#include "vtfeed/evaluation.hpp"

using namespace vtfeed;

namespace {

Cluster cl(std::vector<std::string> m, SingletonReason r = SingletonReason::None) { return {std::move(m), r}; }

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("identical partition scores 1") {
  const auto c = Clustering::canonical({cl({"a", "b"}), cl({"c"})});
  const GroundTruth t{{"a", "x"}, {"b", "x"}, {"c", "y"}};
  const auto r = precision_recall_f1(c, t);
  CHECK(r.precision == 1.0);
  CHECK(r.recall == 1.0);
  CHECK(r.f1 == 1.0);
  CHECK(r.clusters == 2);
}

TEST_CASE("all singletons over two families of two") {
  const auto c = Clustering::canonical({cl({"a"}), cl({"b"}), cl({"c"}), cl({"d"})});
  const GroundTruth t{{"a", "x"}, {"b", "x"}, {"c", "y"}, {"d", "y"}};
  const auto r = precision_recall_f1(c, t);
  CHECK(r.precision == 1.0);
  CHECK(r.recall == 0.5);
  CHECK(r.f1 == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("unscored samples and empty intersections") {
  const auto c = Clustering::canonical({cl({"a", "b", "z"}), cl({"q"})});
  const GroundTruth t{{"a", "x"}, {"b", "y"}};
  const auto r = precision_recall_f1(c, t);
  CHECK(r.scored == 2);
  CHECK(r.unscored == 2);
  CHECK(r.clusters == 1);
  CHECK(r.precision == 0.5);
  CHECK(r.recall == 1.0);
  CHECK_THROWS_AS(precision_recall_f1(c, GroundTruth{{"nope", "x"}}), EmptyIntersection);
}

TEST_CASE("f1 is zero when precision and recall are") {
  // Cannot happen with n >= 1 (both are at least 1/n), so check the harmonic mean directly.
  const auto c = Clustering::canonical({cl({"a", "b", "c"})});
  const GroundTruth t{{"a", "x"}, {"b", "y"}, {"c", "z"}};
  const auto r = precision_recall_f1(c, t);
  CHECK(r.f1 == doctest::Approx(2 * r.precision * r.recall / (r.precision + r.recall)));
}

TEST_CASE("ground truth file") {
  std::istringstream good("a\tx\nb\ty\n\na\tx\n");
  CHECK(read_ground_truth(good).size() == 2);
  std::istringstream conflict("a\tx\na\ty\n");
  CHECK_THROWS_AS(read_ground_truth(conflict), MalformedRow);
  std::istringstream empty_family("a\t\n");
  CHECK_THROWS_AS(read_ground_truth(empty_family), MalformedRow);
}

TEST_CASE("relabelling invariance and pure clusters") {
  std::mt19937_64 rng(1);
  std::vector<Cluster> clusters;
  GroundTruth t, renamed;
  for (int c = 0; c < 50; ++c) {
    std::vector<std::string> members;
    const std::string fam = "f" + std::to_string(rng() % 10);
    for (int k = 0; k < 1 + static_cast<int>(rng() % 5); ++k) {
      members.push_back(testsupport::sha(rng));
      t[members.back()] = fam;
      renamed[members.back()] = "renamed-" + fam;
    }
    clusters.push_back(cl(members));
  }
  const auto a = precision_recall_f1(Clustering::canonical(clusters), t);
  CHECK(a.precision == 1.0);
  std::shuffle(clusters.begin(), clusters.end(), rng);
  const auto b = precision_recall_f1(Clustering::from_clusters(clusters), renamed);
  CHECK(a.precision == b.precision);
  CHECK(a.recall == b.recall);

  // Merge each family into one cluster: recall 1.
  std::map<std::string, std::vector<std::string>> by_family;
  for (const auto& [s, f] : t) by_family[f].push_back(s);
  std::vector<Cluster> merged;
  for (auto& [f, m] : by_family) merged.push_back(cl(m));
  CHECK(precision_recall_f1(Clustering::canonical(merged), t).recall == 1.0);
}

TEST_CASE("cluster size stats") {
  const auto c = Clustering::canonical(
      {cl({"a", "b", "c"}), cl({"d"}, SingletonReason::NullFeature), cl({"e"}, SingletonReason::UniqueValue)});
  const auto s = cluster_size_stats(c);
  CHECK(s.clusters == 3);
  CHECK(s.non_null_clusters == 2);
  CHECK(s.singletons == 2);
  CHECK(s.non_null_singletons == 1);
  CHECK(s.max_size == 3);
  CHECK(s.mean_size == 2.0);
  CHECK(s.median_size == 2.0);
  CHECK(s.std_size == 1.0);

  const auto e = cluster_size_stats(Clustering{});
  CHECK(e.clusters == 0);
  CHECK(e.max_size == 0);
  CHECK(e.mean_size == 0.0);
  CHECK(e.std_size == 0.0);
}

TEST_CASE("cluster size stats match a recount") {
  std::mt19937_64 rng(2);
  for (int round = 0; round < 20; ++round) {
    std::vector<Cluster> clusters;
    std::vector<double> sizes;
    std::size_t nulls = 0, singles = 0;
    const int n = 1 + static_cast<int>(rng() % 200);
    for (int c = 0; c < n; ++c) {
      const std::size_t size = rng() % 3 ? 1 : 1 + rng() % 30;
      std::vector<std::string> m;
      for (std::size_t k = 0; k < size; ++k) m.push_back(testsupport::sha(rng));
      auto reason = SingletonReason::None;
      if (size == 1) {
        ++singles;
        reason = rng() % 2 ? SingletonReason::NullFeature : SingletonReason::UniqueValue;
      }
      if (reason == SingletonReason::NullFeature) {
        ++nulls;
      } else {
        sizes.push_back(static_cast<double>(size));
      }
      clusters.push_back(cl(m, reason));
    }
    const auto s = cluster_size_stats(Clustering::canonical(clusters));
    CHECK(s.clusters == static_cast<std::size_t>(n));
    CHECK(s.non_null_clusters == static_cast<std::size_t>(n) - nulls);
    CHECK(s.singletons == singles);
    CHECK(s.non_null_singletons == singles - nulls);
    if (sizes.empty()) continue;
    std::sort(sizes.begin(), sizes.end());
    double mean = 0;
    for (double x : sizes) mean += x;
    mean /= static_cast<double>(sizes.size());
    double var = 0;
    for (double x : sizes) var += (x - mean) * (x - mean);
    var /= static_cast<double>(sizes.size());
    const auto k = sizes.size();
    const double median = k % 2 ? sizes[k / 2] : (sizes[k / 2 - 1] + sizes[k / 2]) / 2;
    CHECK(s.max_size == static_cast<std::size_t>(sizes.back()));
    CHECK(s.mean_size == doctest::Approx(mean).epsilon(1e-12));
    CHECK(s.median_size == median);
    CHECK(s.std_size == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
  }
}

}  // TEST_SUITE
