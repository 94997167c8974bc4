#include "vtfeed/hunting.hpp"

#include <algorithm>
#include <map>

#include "vtfeed/error.hpp"
#include "vtfeed/text.hpp"

namespace vtfeed {

std::string_view to_string(VerdictClass c) {
  switch (c) {
    case VerdictClass::FullyMalicious:
      return "fully-malicious";
    case VerdictClass::Mixed:
      return "mixed";
    case VerdictClass::FullyBenign:
      break;
  }
  return "fully-benign";
}

namespace {

VerdictClass classify(std::size_t detected, std::size_t size) {
  if (detected == size) return VerdictClass::FullyMalicious;
  if (detected == 0) return VerdictClass::FullyBenign;
  return VerdictClass::Mixed;
}

}  // namespace

std::vector<ClusterVerdict> classify_clusters(const Clustering& clustering,
                                              const std::unordered_map<std::string, int>& scores,
                                              const VerdictOptions& options) {
  std::vector<std::string> missing;
  std::vector<ClusterVerdict> out;
  for (std::size_t id = 0; id < clustering.size(); ++id) {
    const auto& members = clustering.cluster(id).members;
    if (members.size() < 2 && !options.include_singletons) continue;
    ClusterVerdict v;
    v.cluster_id = id;
    v.size = members.size();
    for (const auto& m : members) {
      auto it = scores.find(m);
      if (it == scores.end()) {
        missing.push_back(m);
        continue;
      }
      if (it->second >= options.low_threshold) ++v.detected_low;
      if (it->second >= options.high_threshold) ++v.detected_high;
      if (it->second == 0) v.flagged.push_back(m);
    }
    const auto n = static_cast<double>(v.size);
    v.r1 = static_cast<double>(v.detected_low) / n;
    v.r4 = static_cast<double>(v.detected_high) / n;
    v.class_r1 = classify(v.detected_low, v.size);
    v.class_r4 = classify(v.detected_high, v.size);
    v.malicious_majority_r1 = v.r1 >= options.majority;
    v.malicious_majority_r4 = v.r4 >= options.majority;
    if (v.detected_low == 0) v.flagged.clear();
    std::sort(v.flagged.begin(), v.flagged.end());
    out.push_back(std::move(v));
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    throw MissingScore(std::move(missing));
  }
  return out;
}

std::vector<FlaggedSample> flag_undetected(std::span<const ClusterVerdict> verdicts, double min_ratio,
                                           RatioKind kind) {
  std::map<std::string, FlaggedSample> unique;
  for (const auto& v : verdicts) {
    const double ratio = kind == RatioKind::R1 ? v.r1 : v.r4;
    if (ratio < min_ratio) continue;
    for (const auto& m : v.flagged) unique.try_emplace(m, FlaggedSample{m, v.cluster_id, ratio});
  }
  std::vector<FlaggedSample> out;
  out.reserve(unique.size());
  for (auto& [sha, f] : unique) out.push_back(std::move(f));
  std::stable_sort(out.begin(), out.end(),
                   [](const FlaggedSample& a, const FlaggedSample& b) { return a.cluster_id < b.cluster_id; });
  return out;
}

void write_verdict_file(std::ostream& out, std::span<const ClusterVerdict> verdicts) {
  out << "#cluster_id\tsize\tr1\tr4\tclass_r1\tclass_r4\tflagged\n";
  for (const auto& v : verdicts) {
    out << v.cluster_id << '\t' << v.size << '\t' << text::fixed(v.r1) << '\t' << text::fixed(v.r4) << '\t'
        << to_string(v.class_r1) << '\t' << to_string(v.class_r4) << '\t' << v.flagged.size() << '\n';
  }
}

void write_flagged_file(std::ostream& out, std::span<const FlaggedSample> flagged) {
  out << "#sha256\tcluster_id\tratio\n";
  for (const auto& f : flagged) out << f.sha256 << '\t' << f.cluster_id << '\t' << text::fixed(f.ratio) << '\n';
}

std::vector<FudRecord> detect_originally_fud(std::span<const SampleHistory> histories, const TimeWindow& window,
                                             std::span<const TimeWindow> gaps, const FudOptions& options) {
  std::vector<FudRecord> out;
  for (const auto& h : histories) {
    for (std::size_t i = 1; i < h.scans.size(); ++i) {
      if (h.scans[i].scan_date <= h.scans[i - 1].scan_date) {
        throw UnorderedHistory("scan history for " + h.sha256 + " is not strictly increasing in scan_date");
      }
    }
    if (h.scans.empty() || !window.contains(h.fseen_date)) continue;
    if (h.scans.back().vt_score < options.threshold) continue;

    const auto& first = h.scans.front();
    const bool first_zero = first.vt_score == 0;
    const bool in_gap = std::any_of(gaps.begin(), gaps.end(), [&](const TimeWindow& g) { return g.contains(h.fseen_date); });
    const bool unseen_before_collection = !in_gap && h.fseen_date < first.scan_date;
    if (!first_zero && !unseen_before_collection) continue;

    auto flip = std::find_if(h.scans.begin(), h.scans.end(),
                             [&](const ScanPoint& p) { return p.vt_score >= options.threshold; });
    FudRecord r;
    r.sha256 = h.sha256;
    r.fseen_date = h.fseen_date;
    if (first_zero) r.first_zero_scan = first.scan_date;
    r.flip_scan = flip->scan_date;
    r.flip_delay = r.flip_scan - r.fseen_date;
    if (r.flip_delay <= options.grace) continue;
    out.push_back(std::move(r));
  }
  std::sort(out.begin(), out.end(), [](const FudRecord& a, const FudRecord& b) { return a.sha256 < b.sha256; });
  return out;
}

std::vector<SampleHistory> build_histories(std::span<const ReportRecord> reports) {
  std::map<std::string, SampleHistory> by_sample;
  for (const auto& r : reports) {
    auto [it, inserted] = by_sample.try_emplace(r.sha256);
    auto& h = it->second;
    if (inserted) {
      h.sha256 = r.sha256;
      h.fseen_date = r.fseen_date;
    }
    h.fseen_date = std::min(h.fseen_date, r.fseen_date);
    h.scans.push_back({r.scan_date, r.vt_score});
  }
  std::vector<SampleHistory> out;
  out.reserve(by_sample.size());
  for (auto& [sha, h] : by_sample) {
    std::sort(h.scans.begin(), h.scans.end(), [](const ScanPoint& a, const ScanPoint& b) {
      return a.scan_date != b.scan_date ? a.scan_date < b.scan_date : a.vt_score > b.vt_score;
    });
    h.scans.erase(std::unique(h.scans.begin(), h.scans.end(),
                              [](const ScanPoint& a, const ScanPoint& b) { return a.scan_date == b.scan_date; }),
                  h.scans.end());
    out.push_back(std::move(h));
  }
  return out;
}

void write_fud_file(std::ostream& out, std::span<const FudRecord> records) {
  out << "#sha256\tfseen_date\tfirst_zero_scan\tflip_scan\tflip_delay\n";
  for (const auto& r : records) {
    out << r.sha256 << '\t' << r.fseen_date << '\t';
    if (r.first_zero_scan) out << *r.first_zero_scan;
    out << '\t' << r.flip_scan << '\t' << r.flip_delay << '\n';
  }
}

}  // namespace vtfeed
