#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vtfeed/exec.hpp"
#include "vtfeed/external_sort.hpp"
#include "vtfeed/report.hpp"
#include "vtfeed/tlsh.hpp"

namespace vtfeed {

enum class SingletonReason { None, NullFeature, UniqueValue };

std::string_view to_string(SingletonReason r);
/// Accepts "none", "null-feature", "unique-value".
std::optional<SingletonReason> singleton_reason_from(std::string_view s);

struct Cluster {
  std::vector<std::string> members;
  SingletonReason reason = SingletonReason::None;
};

/// A partition of sample hashes into clusters with dense ids 0..size()-1.
class Clustering {
 public:
  Clustering() = default;

  /// Keeps the given cluster order as ids. Throws Error on an empty cluster or a sample in two clusters.
  static Clustering from_clusters(std::vector<Cluster> clusters);

  /// Canonical form: members sorted, clusters ordered by smallest member sha256.
  static Clustering canonical(std::vector<Cluster> clusters);

  std::size_t size() const noexcept { return clusters_.size(); }
  std::size_t sample_count() const noexcept { return index_.size(); }
  bool empty() const noexcept { return clusters_.empty(); }

  const Cluster& cluster(std::size_t id) const { return clusters_.at(id); }
  const std::vector<Cluster>& clusters() const noexcept { return clusters_; }
  std::optional<std::size_t> cluster_of(std::string_view sha256) const;

 private:
  std::vector<Cluster> clusters_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// True when both clusterings group the same samples the same way (ids and reasons ignored).
bool same_partition(const Clustering& a, const Clustering& b);

/// True when every cluster of `fine` lies inside a single cluster of `coarse`.
bool is_refinement(const Clustering& fine, const Clustering& coarse);

/// `cluster_id<TAB>sha256<TAB>singleton_reason`, sorted by cluster id then sha256.
void write_cluster_file(std::ostream& out, const Clustering& c);
/// Ids are renumbered densely in file order. Throws MalformedRow.
Clustering read_cluster_file(std::istream& in);

// ---------------------------------------------------------------------------
// FVG

struct FvgRow {
  std::optional<std::string> value;
  std::string sha256;
  Timestamp scan_date = 0;
};

struct FvgReport {
  std::size_t rows = 0;
  std::size_t samples = 0;
  std::size_t clusters = 0;
  std::size_t null_singletons = 0;
  std::size_t runs = 0;  // spilled sort runs over both passes
  double sort_seconds = 0;
  double group_seconds = 0;
};

/// Feature value grouping.
///
/// A sample appearing in several rows is placed by its latest row (ties: non-NULL first, then the
/// smaller value). Samples with a NULL value become null-feature singletons; the rest are grouped
/// by exact value equality via a sort on (value, sha256).
Clustering fvg_cluster(std::span<const FvgRow> rows, const SortOptions& options = {},
                       FvgReport* report = nullptr);

/// Streaming FVG from a feature file to a cluster file; memory is bounded by options.memory_budget.
/// Cluster ids follow sorted feature-value order, then null-feature singletons by sha256.
FvgReport fvg_cluster_file(const std::string& feature_file, std::string_view feature,
                           const std::string& cluster_file, const SortOptions& options);

// ---------------------------------------------------------------------------
// HAC-T

inline constexpr int kDefaultCDist = 30;

struct HactInput {
  std::string sha256;
  std::optional<tlsh::Digest> digest;  // NULL tlsh -> null-feature singleton
};

/// Union-find over pairs with tlsh distance <= cdist found by vantage-point radius queries.
/// exact=true yields the transitive closure of the relation (HAC-T-opt); exact=false follows only
/// the nearer child per node (HAC-T) and yields a refinement of it.
Clustering hact_cluster(std::span<const HactInput> samples, int cdist, bool exact, std::uint64_t seed = 0,
                        Exec exec = Exec::Parallel);

// ---------------------------------------------------------------------------
// HAC

enum class FeatureKind { Equality, Tlsh };

struct FeatureSpec {
  std::string name;  // a name from feature_names()
  FeatureKind kind = FeatureKind::Equality;
};

struct DistanceSpec {
  std::vector<FeatureSpec> features;
  double threshold = 0.8;

  /// Equality for every feature except tlsh.
  static DistanceSpec for_features(std::span<const std::string> names, double threshold);
};

inline constexpr std::size_t kDefaultHacLimit = 50'000;

/// Equal-weight average of per-feature distances over features present in both samples;
/// 1.0 when no feature is shared. Throws InvalidDigest on an unparsable tlsh.
double pairwise_distance(const SampleFeatures& a, const SampleFeatures& b, const DistanceSpec& spec);

/// Single-linkage clustering cut at spec.threshold: components of the graph with edges
/// pairwise_distance < threshold. Throws TooLarge above `limit` samples.
Clustering hac_cluster(std::span<const SampleFeatures> samples, const DistanceSpec& spec,
                       std::size_t limit = kDefaultHacLimit, Exec exec = Exec::Parallel);

}  // namespace vtfeed
