#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vtfeed/labeler.hpp"

namespace vtfeed {

/// UTC epoch seconds.
using Timestamp = std::int64_t;

/// Half-open interval [start, end).
struct TimeWindow {
  Timestamp start = 0;
  Timestamp end = 0;

  bool contains(Timestamp t) const noexcept { return start <= t && t < end; }
  friend bool operator==(const TimeWindow&, const TimeWindow&) = default;
};

struct ReportRecord {
  std::string sha256;
  std::string sha1;
  std::string md5;
  Timestamp scan_date = 0;
  Timestamp fseen_date = 0;
  int vt_score = 0;
  std::vector<Detection> detection_labels;

  std::optional<std::string> trid_file_type;
  std::vector<std::string> vt_tags;
  std::optional<std::string> vt_meaningful_name;

  std::optional<std::string> tlsh;
  std::optional<std::string> vhash;
  std::optional<std::string> imphash;
  std::optional<std::string> richpe_hash;
  std::optional<std::string> authentihash;
  std::optional<std::string> icon_hash;

  std::optional<std::string> cert_thumbprint;
  std::optional<std::string> cert_subject;
  std::optional<std::string> cert_issuer;
  std::optional<Timestamp> cert_valid_from;
  std::optional<Timestamp> cert_valid_to;
  std::optional<std::string> sig_verification_res;

  std::optional<std::string> package_name;
};

/// Parses one JSON-lines report (see docs/report-format.md). Unknown keys are ignored.
/// Throws MalformedRecord on syntax errors, bad hashes, out-of-range scores or fseen_date > scan_date.
ReportRecord parse_report_line(std::string_view line);

/// Inverse of parse_report_line for the fields it understands; used by the synthetic feed generator.
std::string format_report_line(const ReportRecord& r);

/// Maps the three filetype evidence sources to a coarse canonical filetype.
///
/// Text format, one rule per line, `#` comments allowed:
///   trid<TAB>substring<TAB>canonical   (case-insensitive substring of trid_file_type; longest match wins)
///   tag<TAB>vt_tag<TAB>canonical       (earliest rule among the sample's tags wins)
///   ext<TAB>extension<TAB>canonical    (extension of vt_meaningful_name, without the dot)
class FiletypeMapping {
 public:
  static FiletypeMapping defaults();
  static FiletypeMapping parse(std::istream& in);
  static FiletypeMapping load(const std::string& path);

  std::optional<std::string> from_trid(std::string_view trid) const;
  std::optional<std::string> from_tags(std::span<const std::string> tags) const;
  std::optional<std::string> from_name(std::string_view name) const;

  std::size_t size() const noexcept { return trid_.size() + tags_.size() + exts_.size(); }

 private:
  struct Rule {
    std::string key;
    std::string canonical;
  };
  std::vector<Rule> trid_;
  std::vector<Rule> tags_;
  std::vector<Rule> exts_;
};

/// Majority vote over trid, tags and name. With no value holding two votes the
/// first non-abstaining source in the order trid > tags > name wins.
std::optional<std::string> derive_filetype(const std::optional<std::string>& trid,
                                           std::span<const std::string> tags,
                                           const std::optional<std::string>& name,
                                           const FiletypeMapping& mapping);

struct SampleFeatures {
  std::string sha256;
  Timestamp scan_date = 0;
  Timestamp fseen_date = 0;
  int vt_score = 0;
  std::optional<std::string> filetype;
  std::optional<std::string> family;
  std::optional<bool> is_pup;
  std::optional<std::string> tlsh;
  std::optional<std::string> vhash;
  std::optional<std::string> imphash;
  std::optional<std::string> richpe_hash;
  std::optional<std::string> authentihash;
  std::optional<std::string> icon_hash;
  std::optional<std::string> cert_thumbprint;
  std::optional<std::string> package_name;
  bool is_new = false;

  /// Number of non-NULL optional features; used for dedup tie-breaks.
  int feature_count() const noexcept;

  friend bool operator==(const SampleFeatures&, const SampleFeatures&) = default;
};

/// Names of the clusterable features, in feature-file column order.
std::span<const std::string_view> feature_names();

/// Value of a clusterable feature by name (see feature_names()); nullopt for NULL.
/// Throws std::invalid_argument for unknown names.
const std::optional<std::string>& feature_value(const SampleFeatures& s, std::string_view name);

SampleFeatures extract_features(const ReportRecord& report, const LabelResult* label,
                                const TimeWindow& window, const FiletypeMapping& mapping);

/// One row per sha256: max scan_date, then more non-NULL features, then earliest input position.
std::vector<SampleFeatures> dedup_latest(std::span<const SampleFeatures> rows);

/// One row per new sample (is_new): min scan_date, same tie-breaks as dedup_latest.
std::vector<SampleFeatures> first_reports(std::span<const SampleFeatures> rows);

// Feature file (`#ffv1` header, tab-separated, NULL as empty field).
inline constexpr std::string_view kFeatureFileHeader = "#ffv1";

std::string format_feature_row(const SampleFeatures& s);
/// Throws MalformedRow.
SampleFeatures parse_feature_row(std::string_view line);

void write_feature_file(std::ostream& out, std::span<const SampleFeatures> rows);
/// Reads a whole feature file. Throws MalformedRow on a bad header or row.
std::vector<SampleFeatures> read_feature_file(std::istream& in);

/// Column index (0-based) of a named column in the feature file.
std::size_t feature_column(std::string_view name);

}  // namespace vtfeed
