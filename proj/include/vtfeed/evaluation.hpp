#pragma once

#include <istream>
#include <string>
#include <unordered_map>

#include "vtfeed/clustering.hpp"

namespace vtfeed {

/// sha256 -> family.
using GroundTruth = std::unordered_map<std::string, std::string>;

/// Two columns `sha256<TAB>family`. Throws MalformedRow on an empty family or a repeated sample
/// with a conflicting family.
GroundTruth read_ground_truth(std::istream& in);

struct AccuracyReport {
  std::size_t clusters = 0;  // clusters holding at least one scored sample
  std::size_t scored = 0;    // samples present in both inputs
  std::size_t unscored = 0;  // clustered samples absent from the ground truth
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

/// Over the n samples in both inputs: precision = (1/n) sum over clusters of the largest
/// single-family count; recall = (1/n) sum over families of the largest single-cluster count.
/// Throws EmptyIntersection.
AccuracyReport precision_recall_f1(const Clustering& clustering, const GroundTruth& truth);

struct ClusterSizeStats {
  std::size_t clusters = 0;
  std::size_t non_null_clusters = 0;
  std::size_t singletons = 0;
  std::size_t non_null_singletons = 0;
  std::size_t max_size = 0;  // the remaining fields describe non-NULL clusters
  double mean_size = 0;
  double median_size = 0;
  double std_size = 0;  // population standard deviation
};

ClusterSizeStats cluster_size_stats(const Clustering& clustering);

}  // namespace vtfeed
