#include "vtfeed/feed_stats.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "vtfeed/error.hpp"
#include "vtfeed/text.hpp"

namespace vtfeed {

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const auto mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : (v[mid - 1] + v[mid]) / 2.0;
}

SeriesSummary summarize(const std::vector<std::uint64_t>& series) {
  SeriesSummary s;
  if (series.empty()) return s;
  std::vector<double> v(series.begin(), series.end());
  double sum = 0;
  for (auto x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  double sq = 0;
  for (auto x : v) sq += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(v.size()));
  s.max = *std::max_element(series.begin(), series.end());
  s.median = median_of(std::move(v));
  return s;
}

}  // namespace

std::int64_t utc_day(Timestamp t) {
  // Floor division so pre-epoch timestamps land on the right day.
  return t >= 0 ? t / kSecondsPerDay : -((-t + kSecondsPerDay - 1) / kSecondsPerDay);
}

std::string format_day(std::int64_t day) {
  using namespace std::chrono;
  const year_month_day ymd{sys_days{days{day}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

std::optional<Timestamp> parse_time(std::string_view s) {
  s = text::trim(s);
  if (auto v = text::parse_int(s)) return *v;
  int y = 0;
  unsigned m = 0, d = 0;
  char tail = 0;
  const std::string str(s);
  if (std::sscanf(str.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3) return std::nullopt;
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{m}, day{d}};
  if (!ymd.ok()) return std::nullopt;
  return static_cast<Timestamp>(sys_days{ymd}.time_since_epoch().count()) * kSecondsPerDay;
}

// ---------------------------------------------------------------------------

void DailyVolume::add(std::string_view sha256, Timestamp scan_date, Timestamp fseen_date) {
  if (!window_.contains(scan_date)) return;
  const auto day = utc_day(scan_date);
  auto& d = days_[day];
  ++d.reports;
  d.samples.emplace(sha256);
  if (window_.contains(fseen_date) && utc_day(fseen_date) == day) d.new_samples.emplace(sha256);
}

void DailyVolume::merge(const DailyVolume& other) {
  for (const auto& [day, od] : other.days_) {
    auto& d = days_[day];
    d.reports += od.reports;
    d.samples.insert(od.samples.begin(), od.samples.end());
    d.new_samples.insert(od.new_samples.begin(), od.new_samples.end());
  }
}

DailyStats DailyVolume::result(std::span<const TimeWindow> gaps) const {
  DailyStats out;
  std::vector<std::uint64_t> reports, samples, fresh;
  for (const auto& [day, d] : days_) {
    DayCounts c;
    c.day = day;
    c.reports = d.reports;
    c.samples = d.samples.size();
    c.new_samples = d.new_samples.size();
    const Timestamp start = day * kSecondsPerDay;
    const Timestamp end = start + kSecondsPerDay;
    c.gap = std::any_of(gaps.begin(), gaps.end(), [&](const TimeWindow& g) { return g.start < end && start < g.end; });
    if (!c.gap) {
      reports.push_back(c.reports);
      samples.push_back(c.samples);
      fresh.push_back(c.new_samples);
    }
    out.days.push_back(c);
  }
  out.reports = summarize(reports);
  out.samples = summarize(samples);
  out.new_samples = summarize(fresh);
  return out;
}

DailyStats daily_volume(std::span<const ReportRecord> reports, const TimeWindow& window,
                        std::span<const TimeWindow> gaps) {
  DailyVolume acc(window);
  for (const auto& r : reports) acc.add(r.sha256, r.scan_date, r.fseen_date);
  return acc.result(gaps);
}

// ---------------------------------------------------------------------------

double DetectionHistogram::at_least(int s) const {
  if (total == 0) return 0;
  if (s <= 0) return 1;
  if (static_cast<std::size_t>(s) >= reverse_ecdf.size()) return 0;
  return reverse_ecdf[static_cast<std::size_t>(s)];
}

DetectionHistogram detection_distribution(std::span<const int> scores, int low, int high) {
  DetectionHistogram h;
  for (int s : scores) {
    if (s < 0) throw Error("negative vt_score");
    if (static_cast<std::size_t>(s) >= h.counts.size()) h.counts.resize(static_cast<std::size_t>(s) + 1, 0);
    ++h.counts[static_cast<std::size_t>(s)];
  }
  h.total = scores.size();
  h.reverse_ecdf.resize(h.counts.size());
  std::uint64_t tail = 0;
  for (std::size_t s = h.counts.size(); s-- > 0;) {
    tail += h.counts[s];
    h.reverse_ecdf[s] = static_cast<double>(tail) / static_cast<double>(h.total);
  }
  h.fraction_at_least_low = h.at_least(low);
  h.fraction_at_least_high = h.at_least(high);
  return h;
}

// ---------------------------------------------------------------------------

std::vector<FiletypeCount> filetype_distribution(std::span<const std::optional<std::string>> filetypes) {
  std::map<std::optional<std::string>, std::uint64_t> counts;
  for (const auto& f : filetypes) ++counts[f];
  std::vector<FiletypeCount> out;
  for (const auto& [ft, n] : counts) {
    out.push_back({ft, n, 100.0 * static_cast<double>(n) / static_cast<double>(filetypes.size())});
  }
  std::sort(out.begin(), out.end(), [](const FiletypeCount& a, const FiletypeCount& b) {
    if (a.count != b.count) return a.count > b.count;
    if (a.filetype.has_value() != b.filetype.has_value()) return a.filetype.has_value();
    return a.filetype < b.filetype;
  });
  return out;
}

// ---------------------------------------------------------------------------

FamilyPrevalence family_prevalence(const std::unordered_map<std::string, std::string>& labels,
                                   const std::unordered_map<std::string, std::string>* filetypes, std::size_t top_k) {
  FamilyPrevalence p;
  std::unordered_map<std::string_view, std::uint64_t> sizes;
  std::map<std::string, std::unordered_map<std::string_view, std::uint64_t>> per_filetype;
  for (const auto& [sha, family] : labels) {
    ++sizes[family];
    ++p.labeled_samples;
    if (filetypes) {
      auto it = filetypes->find(sha);
      per_filetype[it == filetypes->end() ? std::string("NULL") : it->second][family]++;
    }
  }
  p.families = sizes.size();
  for (const auto& [fam, n] : sizes) {
    for (std::size_t k = 0; k < kPrevalenceThresholds.size(); ++k) {
      if (n >= kPrevalenceThresholds[k]) ++p.at_least[k];
    }
  }
  for (auto& [ft, fams] : per_filetype) {
    std::vector<std::pair<std::string, std::uint64_t>> ranked;
    for (const auto& [fam, n] : fams) ranked.emplace_back(std::string(fam), n);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (ranked.size() > top_k) ranked.resize(top_k);
    p.top_by_filetype.emplace(ft, std::move(ranked));
  }
  return p;
}

// ---------------------------------------------------------------------------

TelemetryDelay telemetry_delay(const std::unordered_map<std::string, Timestamp>& vt_fseen,
                               const std::unordered_map<std::string, Timestamp>& other_fseen) {
  TelemetryDelay out;
  for (const auto& [sha, vt] : vt_fseen) {
    auto it = other_fseen.find(sha);
    if (it != other_fseen.end()) out.delays.emplace_back(sha, vt - it->second);
  }
  if (out.delays.empty()) throw EmptyIntersection("no sample hash is present in both first-seen lists");
  std::sort(out.delays.begin(), out.delays.end());

  auto& s = out.summary;
  s.shared = out.delays.size();
  const auto n = static_cast<double>(s.shared);
  std::vector<double> values;
  values.reserve(out.delays.size());
  double sum = 0;
  std::size_t pos = 0, neg = 0, zero = 0, lng = 0;
  for (const auto& [sha, d] : out.delays) {
    values.push_back(static_cast<double>(d));
    sum += static_cast<double>(d);
    if (d > 0) ++pos;
    if (d < 0) ++neg;
    if (d == 0) ++zero;
    if (d > kLongDelay || d < -kLongDelay) ++lng;
  }
  s.mean = sum / n;
  s.median = median_of(std::move(values));
  s.fraction_positive = static_cast<double>(pos) / n;
  s.fraction_negative = static_cast<double>(neg) / n;
  s.fraction_zero = static_cast<double>(zero) / n;
  s.fraction_long = static_cast<double>(lng) / n;
  return out;
}

}  // namespace vtfeed
