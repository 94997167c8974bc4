#include "vtfeed/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "vtfeed/error.hpp"
#include "vtfeed/text.hpp"

namespace vtfeed {

GroundTruth read_ground_truth(std::istream& in) {
  GroundTruth truth;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto cols = text::split(line, '\t');
    if (cols.size() != 2 || cols[0].empty() || text::trim(cols[1]).empty()) {
      throw MalformedRow("ground truth line " + std::to_string(lineno) + ": expected sha256<TAB>family");
    }
    const std::string family(text::trim(cols[1]));
    auto [it, inserted] = truth.emplace(std::string(cols[0]), family);
    if (!inserted && it->second != family) {
      throw MalformedRow("ground truth line " + std::to_string(lineno) + ": conflicting family for " + it->first);
    }
  }
  return truth;
}

AccuracyReport precision_recall_f1(const Clustering& clustering, const GroundTruth& truth) {
  AccuracyReport r;
  // family -> (cluster -> count)
  std::unordered_map<std::string_view, std::unordered_map<std::size_t, std::size_t>> by_family;
  std::size_t precision_hits = 0;
  for (std::size_t id = 0; id < clustering.size(); ++id) {
    std::unordered_map<std::string_view, std::size_t> counts;
    for (const auto& m : clustering.cluster(id).members) {
      auto it = truth.find(m);
      if (it == truth.end()) {
        ++r.unscored;
        continue;
      }
      ++counts[it->second];
      ++by_family[it->second][id];
      ++r.scored;
    }
    if (counts.empty()) continue;
    ++r.clusters;
    std::size_t best = 0;
    for (const auto& [fam, n] : counts) best = std::max(best, n);
    precision_hits += best;
  }
  if (r.scored == 0) throw EmptyIntersection("no clustered sample appears in the ground truth");

  std::size_t recall_hits = 0;
  for (const auto& [fam, clusters] : by_family) {
    std::size_t best = 0;
    for (const auto& [id, n] : clusters) best = std::max(best, n);
    recall_hits += best;
  }
  const auto n = static_cast<double>(r.scored);
  r.precision = static_cast<double>(precision_hits) / n;
  r.recall = static_cast<double>(recall_hits) / n;
  r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

ClusterSizeStats cluster_size_stats(const Clustering& clustering) {
  ClusterSizeStats s;
  std::vector<std::size_t> sizes;
  for (const auto& c : clustering.clusters()) {
    ++s.clusters;
    if (c.members.size() == 1) ++s.singletons;
    if (c.reason == SingletonReason::NullFeature) continue;
    ++s.non_null_clusters;
    if (c.members.size() == 1) ++s.non_null_singletons;
    sizes.push_back(c.members.size());
  }
  if (sizes.empty()) return s;
  std::sort(sizes.begin(), sizes.end());
  s.max_size = sizes.back();
  double sum = 0;
  for (auto v : sizes) sum += static_cast<double>(v);
  s.mean_size = sum / static_cast<double>(sizes.size());
  const auto mid = sizes.size() / 2;
  s.median_size = sizes.size() % 2 ? static_cast<double>(sizes[mid])
                                   : (static_cast<double>(sizes[mid - 1]) + static_cast<double>(sizes[mid])) / 2.0;
  double sq = 0;
  for (auto v : sizes) sq += (static_cast<double>(v) - s.mean_size) * (static_cast<double>(v) - s.mean_size);
  s.std_size = std::sqrt(sq / static_cast<double>(sizes.size()));
  return s;
}

}  // namespace vtfeed
