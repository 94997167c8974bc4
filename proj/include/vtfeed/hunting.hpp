#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "vtfeed/clustering.hpp"
#include "vtfeed/report.hpp"

namespace vtfeed {

enum class VerdictClass { FullyMalicious, FullyBenign, Mixed };
std::string_view to_string(VerdictClass c);

struct ClusterVerdict {
  std::size_t cluster_id = 0;
  std::size_t size = 0;
  std::size_t detected_low = 0;   // members with vt_score >= low threshold (1)
  std::size_t detected_high = 0;  // members with vt_score >= high threshold (4)
  double r1 = 0;
  double r4 = 0;
  VerdictClass class_r1 = VerdictClass::FullyBenign;
  VerdictClass class_r4 = VerdictClass::FullyBenign;
  bool malicious_majority_r1 = false;
  bool malicious_majority_r4 = false;
  /// Zero-detection members, sorted; empty for clusters with no detected member.
  std::vector<std::string> flagged;
};

struct VerdictOptions {
  int low_threshold = 1;
  int high_threshold = 4;
  double majority = 0.5;
  bool include_singletons = false;
};

/// One verdict per non-singleton cluster (all clusters with include_singletons), in cluster-id order.
/// Throws MissingScore listing every clustered sample without a score.
std::vector<ClusterVerdict> classify_clusters(const Clustering& clustering,
                                              const std::unordered_map<std::string, int>& scores,
                                              const VerdictOptions& options = {});

enum class RatioKind { R1, R4 };

struct FlaggedSample {
  std::string sha256;
  std::size_t cluster_id = 0;
  double ratio = 0;
};

/// Zero-detection members of clusters whose chosen ratio is >= min_ratio, by cluster id then sha256.
std::vector<FlaggedSample> flag_undetected(std::span<const ClusterVerdict> verdicts, double min_ratio = 0.5,
                                           RatioKind kind = RatioKind::R1);

/// `cluster_id size r1 r4 class_r1 class_r4 flagged_count`, tab-separated.
void write_verdict_file(std::ostream& out, std::span<const ClusterVerdict> verdicts);
/// `sha256 cluster_id ratio`, tab-separated.
void write_flagged_file(std::ostream& out, std::span<const FlaggedSample> flagged);

// ---------------------------------------------------------------------------
// Originally-FUD detection

struct ScanPoint {
  Timestamp scan_date = 0;
  int vt_score = 0;
};

struct SampleHistory {
  std::string sha256;
  Timestamp fseen_date = 0;
  std::vector<ScanPoint> scans;  // strictly increasing scan_date
};

struct FudRecord {
  std::string sha256;
  Timestamp fseen_date = 0;
  std::optional<Timestamp> first_zero_scan;  // first collected scan when it had zero detections
  Timestamp flip_scan = 0;                   // first scan with vt_score >= threshold
  Timestamp flip_delay = 0;                  // flip_scan - fseen_date

  friend bool operator==(const FudRecord&, const FudRecord&) = default;
};

struct FudOptions {
  int threshold = 4;
  Timestamp grace = 300;
};

/// Samples first seen inside `window` whose last scan reaches the threshold and whose first scan
/// had zero detections, or whose first-seen date lies outside every gap and precedes the earliest
/// collected scan. Samples flipping within `grace` seconds of first-seen are dropped.
/// Output sorted by sha256. Throws UnorderedHistory.
std::vector<FudRecord> detect_originally_fud(std::span<const SampleHistory> histories, const TimeWindow& window,
                                             std::span<const TimeWindow> gaps, const FudOptions& options = {});

/// Groups reports per sample into histories (scan dates sorted, duplicate scans collapsed keeping the
/// highest score). fseen_date is the minimum over the sample's reports.
std::vector<SampleHistory> build_histories(std::span<const ReportRecord> reports);

void write_fud_file(std::ostream& out, std::span<const FudRecord> records);

}  // namespace vtfeed
