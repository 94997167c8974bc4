#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "vtfeed/report.hpp"

namespace vtfeed {

inline constexpr Timestamp kSecondsPerDay = 86'400;

/// UTC day number (days since the epoch).
std::int64_t utc_day(Timestamp t);
/// "YYYY-MM-DD".
std::string format_day(std::int64_t day);
/// Parses "YYYY-MM-DD" or an integer epoch; nullopt otherwise.
std::optional<Timestamp> parse_time(std::string_view s);

struct SeriesSummary {
  double mean = 0;
  double median = 0;
  double std = 0;  // population
  std::uint64_t max = 0;
};

struct DayCounts {
  std::int64_t day = 0;
  std::uint64_t reports = 0;
  std::uint64_t samples = 0;
  std::uint64_t new_samples = 0;
  bool gap = false;
};

struct DailyStats {
  std::vector<DayCounts> days;  // days with at least one in-window report, ascending
  SeriesSummary reports, samples, new_samples;  // over non-gap days
};

/// Mergeable per-day accumulator. A sample counts as new on day D when it is reported on D and
/// its first-seen date falls on D inside the window.
class DailyVolume {
 public:
  explicit DailyVolume(TimeWindow window) : window_(window) {}

  void add(std::string_view sha256, Timestamp scan_date, Timestamp fseen_date);
  void merge(const DailyVolume& other);
  DailyStats result(std::span<const TimeWindow> gaps) const;

 private:
  struct Day {
    std::uint64_t reports = 0;
    std::unordered_set<std::string> samples;
    std::unordered_set<std::string> new_samples;
  };
  TimeWindow window_;
  std::map<std::int64_t, Day> days_;
};

DailyStats daily_volume(std::span<const ReportRecord> reports, const TimeWindow& window,
                        std::span<const TimeWindow> gaps);

struct DetectionHistogram {
  std::vector<std::uint64_t> counts;  // counts[s] = rows with vt_score == s
  std::vector<double> reverse_ecdf;   // reverse_ecdf[s] = fraction of rows with vt_score >= s
  std::uint64_t total = 0;
  double fraction_at_least_low = 0;   // >= 1 by default
  double fraction_at_least_high = 0;  // >= 4 by default

  /// Fraction of rows with vt_score >= s (0 beyond the maximum, 1 at s <= 0 on non-empty input).
  double at_least(int s) const;
};

DetectionHistogram detection_distribution(std::span<const int> scores, int low = 1, int high = 4);

struct FiletypeCount {
  std::optional<std::string> filetype;  // nullopt is the NULL bucket
  std::uint64_t count = 0;
  double percent = 0;
};

/// Descending by count, then by name with NULL last.
std::vector<FiletypeCount> filetype_distribution(std::span<const std::optional<std::string>> filetypes);

struct FamilyPrevalence {
  std::uint64_t labeled_samples = 0;
  std::uint64_t families = 0;
  /// families with at least 1, 10, 100 and 1000 samples.
  std::array<std::uint64_t, 4> at_least{};
  /// filetype -> top families (family, samples), when filetypes were given.
  std::map<std::string, std::vector<std::pair<std::string, std::uint64_t>>> top_by_filetype;
};

inline constexpr std::array<std::uint64_t, 4> kPrevalenceThresholds = {1, 10, 100, 1000};

FamilyPrevalence family_prevalence(const std::unordered_map<std::string, std::string>& labels,
                                   const std::unordered_map<std::string, std::string>* filetypes = nullptr,
                                   std::size_t top_k = 10);

struct DelaySummary {
  std::size_t shared = 0;
  double median = 0;  // seconds
  double mean = 0;
  double fraction_positive = 0;  // other source saw it first
  double fraction_negative = 0;  // VT saw it first
  double fraction_zero = 0;
  double fraction_long = 0;  // |delay| > 90 days
};

struct TelemetryDelay {
  std::vector<std::pair<std::string, Timestamp>> delays;  // (sha256, vt - other), sorted by sha256
  DelaySummary summary;
};

inline constexpr Timestamp kLongDelay = 90 * kSecondsPerDay;

/// Throws EmptyIntersection.
TelemetryDelay telemetry_delay(const std::unordered_map<std::string, Timestamp>& vt_fseen,
                               const std::unordered_map<std::string, Timestamp>& other_fseen);

}  // namespace vtfeed
