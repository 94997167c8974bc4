// vtfeed: batch analytics over VirusTotal-style file feed reports.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vtfeed/clustering.hpp"
#include "vtfeed/config.hpp"
#include "vtfeed/error.hpp"
#include "vtfeed/evaluation.hpp"
#include "vtfeed/exec.hpp"
#include "vtfeed/external_sort.hpp"
#include "vtfeed/feed_stats.hpp"
#include "vtfeed/hunting.hpp"
#include "vtfeed/io.hpp"
#include "vtfeed/kernels.hpp"
#include "vtfeed/labeler.hpp"
#include "vtfeed/report.hpp"
#include "vtfeed/synth.hpp"
#include "vtfeed/text.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace vtfeed;
using text::fixed;
using text::split;
using text::to_lower;
using text::trim;

namespace {

constexpr int kExitData = 1;
constexpr int kExitUsage = 2;
constexpr std::size_t kParseBatch = 1 << 16;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flags shared by every subcommand; they override the config file.
struct Common {
  std::string config;
  std::optional<int> threads;
  std::optional<std::size_t> memory_mib;
  std::optional<std::string> temp_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> window_start;
  std::optional<std::string> window_end;
  std::vector<std::string> gaps;
  std::optional<std::string> taxonomy;
  std::optional<std::string> aliases;
  std::optional<std::string> filetype_mapping;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
  app->add_option("--threads", c.threads, "worker threads (0 = all cores)");
  app->add_option("--memory-mib", c.memory_mib, "external sort memory budget in MiB");
  app->add_option("--temp-dir", c.temp_dir, "spill directory (default $VTFEED_TMPDIR or system temp)");
  app->add_option("--seed", c.seed, "random seed");
  app->add_option("--window-start", c.window_start, "analysis window start, YYYY-MM-DD or epoch");
  app->add_option("--window-end", c.window_end, "analysis window end (exclusive)");
  app->add_option("--gap", c.gaps, "collection gap START:END, repeatable");
  app->add_option("--taxonomy", c.taxonomy, "labeler taxonomy file");
  app->add_option("--aliases", c.aliases, "labeler alias file");
  app->add_option("--filetype-mapping", c.filetype_mapping, "filetype mapping file");
}

Timestamp time_arg(const std::string& s, const char* what) {
  if (auto t = parse_time(s)) return *t;
  throw UsageError(std::string(what) + ": expected YYYY-MM-DD or epoch seconds, got '" + s + "'");
}

PipelineConfig resolve_config(const Common& c) {
  PipelineConfig cfg;
  if (!c.config.empty()) {
    try {
      cfg = PipelineConfig::load(c.config);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }
  if (c.threads) cfg.threads = *c.threads;
  if (c.memory_mib) cfg.memory_budget = *c.memory_mib << 20;
  if (c.temp_dir) cfg.temp_dir = *c.temp_dir;
  if (c.seed) cfg.seed = *c.seed;
  if (c.window_start) cfg.window.start = time_arg(*c.window_start, "--window-start");
  if (c.window_end) cfg.window.end = time_arg(*c.window_end, "--window-end");
  if (!c.gaps.empty()) {
    cfg.gaps.clear();
    for (const auto& g : c.gaps) {
      const auto parts = split(g, ':');
      if (parts.size() != 2) throw UsageError("--gap: expected START:END, got '" + g + "'");
      cfg.gaps.push_back(TimeWindow{time_arg(std::string(parts[0]), "--gap"), time_arg(std::string(parts[1]), "--gap")});
    }
  }
  if (c.taxonomy) cfg.taxonomy_path = *c.taxonomy;
  if (c.aliases) cfg.alias_path = *c.aliases;
  if (c.filetype_mapping) cfg.filetype_mapping_path = *c.filetype_mapping;
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  set_thread_count(cfg.threads);
  return cfg;
}

Taxonomy load_taxonomy(const PipelineConfig& cfg) {
  if (cfg.taxonomy_path.empty() && cfg.alias_path.empty()) return Taxonomy::defaults();
  if (cfg.taxonomy_path.empty() || cfg.alias_path.empty()) {
    throw UsageError("--taxonomy and --aliases must be given together");
  }
  return Taxonomy::load(cfg.taxonomy_path, cfg.alias_path);
}

FiletypeMapping load_mapping(const PipelineConfig& cfg) {
  return cfg.filetype_mapping_path.empty() ? FiletypeMapping::defaults()
                                           : FiletypeMapping::load(cfg.filetype_mapping_path);
}

SortOptions sort_options(const PipelineConfig& cfg) {
  SortOptions o;
  o.memory_budget = cfg.memory_budget;
  o.temp_dir = cfg.temp_dir;
  return o;
}

// Output to a file (written beside and renamed into place) or stdout for "-".
class Output {
 public:
  explicit Output(std::string path) : path_(std::move(path)) {
    if (path_ == "-") return;
    file_.open(path_ + ".partial", std::ios::binary | std::ios::trunc);
    if (!file_) throw Error("cannot write " + path_);
  }
  ~Output() {
    if (path_ != "-" && file_.is_open()) {
      file_.close();
      std::error_code ec;
      fs::remove(path_ + ".partial", ec);
    }
  }
  std::ostream& stream() { return path_ == "-" ? std::cout : file_; }
  void commit() {
    if (path_ == "-") {
      std::cout.flush();
      return;
    }
    file_.close();
    if (!file_) throw Error("write failed: " + path_);
    fs::rename(path_ + ".partial", path_);
  }

 private:
  std::string path_;
  std::ofstream file_;
};

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return in;
}

struct ReadStats {
  std::size_t lines = 0;
  std::size_t malformed = 0;
};

// Streams well-formed reports in input order; malformed lines are counted and skipped.
ReadStats for_each_report(const std::vector<std::string>& paths, const std::function<void(ReportRecord&)>& fn) {
  ReadStats stats;
  std::vector<std::string> batch;
  batch.reserve(kParseBatch);
  std::string first_error;
  auto flush = [&] {
    auto parsed = kernels::parse_reports(batch, Exec::Parallel);
    for (std::size_t i = 0; i < parsed.records.size(); ++i) {
      if (parsed.records[i]) {
        fn(*parsed.records[i]);
      } else {
        if (stats.malformed == 0) first_error = parsed.errors[i];
        ++stats.malformed;
      }
    }
    batch.clear();
  };
  for (const auto& path : paths) {
    LineReader reader(path);
    std::string line;
    while (reader.next(line)) {
      if (trim(line).empty()) continue;
      ++stats.lines;
      batch.push_back(std::move(line));
      line.clear();
      if (batch.size() == kParseBatch) flush();
    }
  }
  if (!batch.empty()) flush();
  if (stats.malformed) {
    std::cerr << "skipped " << stats.malformed << " malformed record(s) of " << stats.lines
              << "; first: " << first_error << '\n';
  }
  return stats;
}

std::vector<SampleFeatures> read_features(const std::string& path) {
  auto in = open_input(path);
  return read_feature_file(in);
}

Clustering read_clusters(const std::string& path) {
  auto in = open_input(path);
  return read_cluster_file(in);
}

// Latest vt_score per sample (dedup_latest semantics).
std::unordered_map<std::string, int> latest_scores(const std::vector<SampleFeatures>& rows) {
  std::unordered_map<std::string, int> scores;
  for (const auto& s : dedup_latest(rows)) scores.emplace(s.sha256, s.vt_score);
  return scores;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

struct ExtractArgs {
  std::vector<std::string> reports;
  std::string out;
  std::string dedup = "latest";
  bool label = true;
};

int run_extract(const Common& common, const ExtractArgs& a) {
  const auto cfg = resolve_config(common);
  const auto mapping = load_mapping(cfg);
  std::optional<Taxonomy> taxonomy;
  if (a.label) taxonomy = load_taxonomy(cfg);

  std::vector<SampleFeatures> rows;
  for_each_report(a.reports, [&](ReportRecord& r) {
    std::optional<LabelResult> label;
    if (taxonomy) label = label_sample(r.detection_labels, *taxonomy);
    rows.push_back(extract_features(r, label ? &*label : nullptr, cfg.window, mapping));
  });
  if (a.dedup == "latest") {
    rows = dedup_latest(rows);
  } else if (a.dedup == "first") {
    rows = first_reports(rows);
  }
  Output out(a.out);
  write_feature_file(out.stream(), rows);
  out.commit();
  std::cerr << "wrote " << rows.size() << " feature row(s)\n";
  return 0;
}

struct LabelArgs {
  std::vector<std::string> reports;
  std::string features;
  std::string out;
};

int run_label(const Common& common, const LabelArgs& a) {
  const auto cfg = resolve_config(common);
  const auto taxonomy = load_taxonomy(cfg);
  // Labels come from each sample's latest report.
  struct Latest {
    Timestamp scan_date;
    LabelResult label;
  };
  std::unordered_map<std::string, Latest> labels;
  for_each_report(a.reports, [&](ReportRecord& r) {
    auto it = labels.find(r.sha256);
    if (it != labels.end() && it->second.scan_date >= r.scan_date) return;
    Latest l{r.scan_date, label_sample(r.detection_labels, taxonomy)};
    if (it == labels.end()) {
      labels.emplace(r.sha256, std::move(l));
    } else {
      it->second = std::move(l);
    }
  });
  auto rows = read_features(a.features);
  std::size_t labeled = 0;
  for (auto& s : rows) {
    auto it = labels.find(s.sha256);
    if (it == labels.end()) continue;
    s.family = it->second.label.family;
    s.is_pup = it->second.label.is_pup;
    if (s.family) ++labeled;
  }
  Output out(a.out);
  write_feature_file(out.stream(), rows);
  out.commit();
  std::cerr << "labeled " << labeled << " of " << rows.size() << " row(s) with a family\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct StatsArgs {
  std::vector<std::string> reports;
  std::string out = "-";
  std::string csv_dir;
  std::string telemetry;
  std::size_t top_k = 10;
};

json summary_json(const SeriesSummary& s) {
  return {{"mean", s.mean}, {"median", s.median}, {"std", s.std}, {"max", s.max}};
}

json histogram_json(const DetectionHistogram& h) {
  return {{"total", h.total},
          {"counts", h.counts},
          {"reverse_ecdf", h.reverse_ecdf},
          {"fraction_at_least_low", h.fraction_at_least_low},
          {"fraction_at_least_high", h.fraction_at_least_high}};
}

void write_csv(const fs::path& path, const std::function<void(std::ostream&)>& fn) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  fn(out);
}

int run_stats(const Common& common, const StatsArgs& a) {
  const auto cfg = resolve_config(common);
  const auto taxonomy = load_taxonomy(cfg);
  const auto mapping = load_mapping(cfg);

  struct Sample {
    Timestamp latest_scan;
    std::optional<std::string> filetype;
    std::optional<std::string> family;
    Timestamp fseen;
    Timestamp first_scan;
    int first_score;
  };
  DailyVolume volume(cfg.window);
  std::vector<int> report_scores;
  std::unordered_map<std::string, Sample> samples;
  for_each_report(a.reports, [&](ReportRecord& r) {
    if (!cfg.window.contains(r.scan_date)) return;
    volume.add(r.sha256, r.scan_date, r.fseen_date);
    report_scores.push_back(r.vt_score);
    const auto label = label_sample(r.detection_labels, taxonomy);
    const auto features = extract_features(r, &label, cfg.window, mapping);
    auto [it, fresh] = samples.try_emplace(r.sha256);
    auto& s = it->second;
    if (fresh || r.scan_date > s.latest_scan) {
      s.latest_scan = r.scan_date;
      s.filetype = features.filetype;
      s.family = features.family;
    }
    if (fresh || r.scan_date < s.first_scan) {
      s.first_scan = r.scan_date;
      s.first_score = r.vt_score;
    }
    s.fseen = fresh ? r.fseen_date : std::min(s.fseen, r.fseen_date);
  });

  // Deterministic iteration order.
  std::vector<const std::pair<const std::string, Sample>*> ordered;
  ordered.reserve(samples.size());
  for (const auto& kv : samples) ordered.push_back(&kv);
  std::sort(ordered.begin(), ordered.end(), [](auto* x, auto* y) { return x->first < y->first; });

  const auto daily = volume.result(cfg.gaps);
  const auto per_report = detection_distribution(report_scores, cfg.low_threshold, cfg.high_threshold);
  std::vector<int> first_sight_scores;
  std::vector<std::optional<std::string>> filetypes;
  std::unordered_map<std::string, std::string> families;
  std::unordered_map<std::string, std::string> sample_filetypes;
  std::unordered_map<std::string, Timestamp> vt_fseen;
  std::size_t new_samples = 0;
  for (auto* kv : ordered) {
    const auto& s = kv->second;
    filetypes.push_back(s.filetype);
    if (s.family) families.emplace(kv->first, *s.family);
    if (s.filetype) sample_filetypes.emplace(kv->first, *s.filetype);
    vt_fseen.emplace(kv->first, s.fseen);
    if (cfg.window.contains(s.fseen)) {
      ++new_samples;
      first_sight_scores.push_back(s.first_score);
    }
  }
  const auto first_sight = detection_distribution(first_sight_scores, cfg.low_threshold, cfg.high_threshold);
  const auto ft = filetype_distribution(filetypes);
  const auto prevalence = family_prevalence(families, &sample_filetypes, a.top_k);

  json doc;
  doc["reports"] = report_scores.size();
  doc["samples"] = samples.size();
  doc["new_samples"] = new_samples;
  json days = json::array();
  for (const auto& d : daily.days) {
    days.push_back({{"day", format_day(d.day)},
                    {"reports", d.reports},
                    {"samples", d.samples},
                    {"new_samples", d.new_samples},
                    {"gap", d.gap}});
  }
  doc["daily"] = {{"days", days},
                  {"reports", summary_json(daily.reports)},
                  {"samples", summary_json(daily.samples)},
                  {"new_samples", summary_json(daily.new_samples)}};
  doc["detections"] = {{"per_report", histogram_json(per_report)}, {"first_sight", histogram_json(first_sight)}};
  json ft_json = json::array();
  for (const auto& f : ft) {
    ft_json.push_back({{"filetype", f.filetype ? json(*f.filetype) : json(nullptr)},
                       {"count", f.count},
                       {"percent", f.percent}});
  }
  doc["filetypes"] = ft_json;
  json top = json::object();
  for (const auto& [type, list] : prevalence.top_by_filetype) {
    json l = json::array();
    for (const auto& [fam, n] : list) l.push_back({{"family", fam}, {"samples", n}});
    top[type] = l;
  }
  doc["families"] = {{"labeled_samples", prevalence.labeled_samples},
                     {"families", prevalence.families},
                     {"at_least", {{"1", prevalence.at_least[0]},
                                   {"10", prevalence.at_least[1]},
                                   {"100", prevalence.at_least[2]},
                                   {"1000", prevalence.at_least[3]}}},
                     {"top_by_filetype", top}};

  std::optional<TelemetryDelay> delay;
  if (!a.telemetry.empty()) {
    std::unordered_map<std::string, Timestamp> other;
    LineReader reader(a.telemetry);
    std::string line;
    std::size_t lineno = 0;
    while (reader.next(line)) {
      ++lineno;
      if (line.empty() || line[0] == '#') continue;
      const auto cols = split(line, '\t');
      std::optional<Timestamp> t;
      if (cols.size() == 2) t = parse_time(cols[1]);
      if (!t) throw MalformedRow(a.telemetry + ":" + std::to_string(lineno) + ": expected sha256<TAB>first_seen");
      auto [it, fresh] = other.emplace(to_lower(cols[0]), *t);
      if (!fresh) it->second = std::min(it->second, *t);
    }
    delay = telemetry_delay(vt_fseen, other);
    const auto& d = delay->summary;
    doc["telemetry_delay"] = {{"shared", d.shared},
                              {"median_seconds", d.median},
                              {"mean_seconds", d.mean},
                              {"fraction_positive", d.fraction_positive},
                              {"fraction_negative", d.fraction_negative},
                              {"fraction_zero", d.fraction_zero},
                              {"fraction_long", d.fraction_long}};
  }

  Output out(a.out);
  out.stream() << doc.dump(2) << '\n';
  out.commit();

  // Tables go to stderr when the document takes stdout.
  std::ostream& tab = a.out == "-" ? std::cerr : std::cout;
  tab << "reports " << report_scores.size() << "  samples " << samples.size() << "  new " << new_samples << "\n\n";
  tab << "series        mean        median      std         max\n";
  auto row = [&](const char* name, const SeriesSummary& s) {
    tab << std::left << std::setw(14) << name << std::setw(12) << fixed(s.mean, 1) << std::setw(12)
        << fixed(s.median, 1) << std::setw(12) << fixed(s.std, 1) << s.max << '\n';
  };
  row("reports", daily.reports);
  row("samples", daily.samples);
  row("new_samples", daily.new_samples);
  tab << "\ndetections >= " << cfg.low_threshold << ": " << fixed(100 * per_report.fraction_at_least_low, 2)
      << "% of reports, " << fixed(100 * first_sight.fraction_at_least_low, 2) << "% at first sight\n";
  tab << "detections >= " << cfg.high_threshold << ": " << fixed(100 * per_report.fraction_at_least_high, 2)
      << "% of reports, " << fixed(100 * first_sight.fraction_at_least_high, 2) << "% at first sight\n\n";
  tab << "filetype              samples     percent\n";
  for (std::size_t i = 0; i < ft.size() && i < 20; ++i) {
    tab << std::left << std::setw(22) << ft[i].filetype.value_or("NULL") << std::setw(12) << ft[i].count
        << fixed(ft[i].percent, 2) << '\n';
  }
  tab << "\nfamilies " << prevalence.families << " over " << prevalence.labeled_samples << " labeled samples; >=1/10/100/1000: "
      << prevalence.at_least[0] << '/' << prevalence.at_least[1] << '/' << prevalence.at_least[2] << '/'
      << prevalence.at_least[3] << '\n';
  if (delay) {
    tab << "telemetry delay over " << delay->summary.shared << " shared samples: median "
        << fixed(delay->summary.median / 3600, 2) << " h\n";
  }

  if (!a.csv_dir.empty()) {
    fs::create_directories(a.csv_dir);
    write_csv(fs::path(a.csv_dir) / "daily.csv", [&](std::ostream& o) {
      o << "day,reports,samples,new_samples,gap\n";
      for (const auto& d : daily.days) {
        o << format_day(d.day) << ',' << d.reports << ',' << d.samples << ',' << d.new_samples << ',' << d.gap << '\n';
      }
    });
    write_csv(fs::path(a.csv_dir) / "detections.csv", [&](std::ostream& o) {
      o << "score,reports,reverse_ecdf_reports,first_sight,reverse_ecdf_first_sight\n";
      const auto n = std::max(per_report.counts.size(), first_sight.counts.size());
      for (std::size_t s = 0; s < n; ++s) {
        o << s << ',' << (s < per_report.counts.size() ? per_report.counts[s] : 0) << ','
          << fixed(per_report.at_least(static_cast<int>(s)), 6) << ','
          << (s < first_sight.counts.size() ? first_sight.counts[s] : 0) << ','
          << fixed(first_sight.at_least(static_cast<int>(s)), 6) << '\n';
      }
    });
    write_csv(fs::path(a.csv_dir) / "filetypes.csv", [&](std::ostream& o) {
      o << "filetype,samples,percent\n";
      for (const auto& f : ft) o << f.filetype.value_or("") << ',' << f.count << ',' << fixed(f.percent, 4) << '\n';
    });
    if (delay) {
      write_csv(fs::path(a.csv_dir) / "telemetry_delay.csv", [&](std::ostream& o) {
        o << "sha256,delay_seconds\n";
        for (const auto& [sha, d] : delay->delays) o << sha << ',' << d << '\n';
      });
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct ClusterArgs {
  std::string features;
  std::string out;
  std::string feature = "vhash";
  std::vector<std::string> feature_set;
  std::optional<double> threshold;
  std::optional<int> cdist;
  bool approximate = false;
  std::optional<std::size_t> limit;
};

void report_clustering(const Clustering& c) {
  const auto stats = cluster_size_stats(c);
  std::cerr << "clusters " << stats.clusters << " (non-null " << stats.non_null_clusters << "), singletons "
            << stats.singletons << " (non-null " << stats.non_null_singletons << "), max size " << stats.max_size
            << '\n';
}

int run_cluster_fvg(const Common& common, const ClusterArgs& a) {
  const auto cfg = resolve_config(common);
  const auto names = feature_names();
  if (std::find(names.begin(), names.end(), a.feature) == names.end()) {
    throw UsageError("unknown feature '" + a.feature + "'");
  }
  if (a.out == "-") throw UsageError("cluster fvg needs a file for --out");
  const auto r = fvg_cluster_file(a.features, a.feature, a.out, sort_options(cfg));
  std::cerr << "rows " << r.rows << ", samples " << r.samples << ", clusters " << r.clusters << ", null singletons "
            << r.null_singletons << ", spilled runs " << r.runs << '\n';
  std::cerr << "sort " << fixed(r.sort_seconds, 3) << " s, group " << fixed(r.group_seconds, 3) << " s\n";
  return 0;
}

int run_cluster_hac(const Common& common, const ClusterArgs& a) {
  auto cfg = resolve_config(common);
  if (a.threshold) cfg.hac_threshold = *a.threshold;
  if (a.limit) cfg.hac_limit = *a.limit;
  std::vector<std::string> names = a.feature_set;
  if (names.empty()) {
    for (auto n : feature_names()) names.emplace_back(n);
  }
  for (const auto& n : names) {
    const auto all = feature_names();
    if (std::find(all.begin(), all.end(), n) == all.end()) throw UsageError("unknown feature '" + n + "'");
  }
  const auto samples = dedup_latest(read_features(a.features));
  const auto t0 = std::chrono::steady_clock::now();
  const auto c = hac_cluster(samples, DistanceSpec::for_features(names, cfg.hac_threshold), cfg.hac_limit);
  const double secs = seconds_since(t0);
  Output out(a.out);
  write_cluster_file(out.stream(), c);
  out.commit();
  report_clustering(c);
  std::cerr << "group " << fixed(secs, 3) << " s\n";
  return 0;
}

int run_cluster_hact(const Common& common, const ClusterArgs& a) {
  auto cfg = resolve_config(common);
  if (a.cdist) cfg.cdist = *a.cdist;
  const auto samples = dedup_latest(read_features(a.features));
  std::vector<HactInput> input;
  input.reserve(samples.size());
  for (const auto& s : samples) {
    HactInput h{s.sha256, std::nullopt};
    if (s.tlsh) h.digest = tlsh::parse_digest(*s.tlsh);
    input.push_back(std::move(h));
  }
  const auto t0 = std::chrono::steady_clock::now();
  const auto c = hact_cluster(input, cfg.cdist, !a.approximate, cfg.seed);
  const double secs = seconds_since(t0);
  Output out(a.out);
  write_cluster_file(out.stream(), c);
  out.commit();
  report_clustering(c);
  std::cerr << "group " << fixed(secs, 3) << " s\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string clusters;
  std::string truth;
  std::string truth_clusters;
};

int run_eval(const Common& common, const EvalArgs& a) {
  resolve_config(common);
  if (a.truth.empty() == a.truth_clusters.empty()) {
    throw UsageError("give exactly one of --truth and --truth-clusters");
  }
  const auto clustering = read_clusters(a.clusters);
  GroundTruth truth;
  if (!a.truth.empty()) {
    auto in = open_input(a.truth);
    truth = read_ground_truth(in);
  } else {
    const auto ref = read_clusters(a.truth_clusters);
    for (std::size_t id = 0; id < ref.size(); ++id) {
      for (const auto& m : ref.cluster(id).members) truth.emplace(m, "c" + std::to_string(id));
    }
  }
  const auto r = precision_recall_f1(clustering, truth);
  const auto s = cluster_size_stats(clustering);
  json rec = {{"precision", r.precision}, {"recall", r.recall},   {"f1", r.f1},
              {"scored", r.scored},       {"unscored", r.unscored}, {"clusters", s.clusters},
              {"non_null_clusters", s.non_null_clusters}, {"singletons", s.singletons},
              {"non_null_singletons", s.non_null_singletons}, {"max_size", s.max_size},
              {"mean_size", s.mean_size}, {"median_size", s.median_size}, {"std_size", s.std_size}};
  std::cout << rec.dump() << '\n';
  std::cout << "precision   " << fixed(r.precision, 4) << '\n'
            << "recall      " << fixed(r.recall, 4) << '\n'
            << "f1          " << fixed(r.f1, 4) << '\n'
            << "scored      " << r.scored << " (unscored " << r.unscored << ")\n"
            << "clusters    " << s.clusters << " (non-null " << s.non_null_clusters << ")\n"
            << "singletons  " << s.singletons << " (non-null " << s.non_null_singletons << ")\n"
            << "size        max " << s.max_size << ", mean " << fixed(s.mean_size, 2) << ", median "
            << fixed(s.median_size, 1) << ", std " << fixed(s.std_size, 2) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct HuntArgs {
  std::string clusters;
  std::string features;
  std::string out;
  bool include_singletons = false;
  std::string ratio = "r1";
  double min_ratio = 0.5;
};

std::vector<ClusterVerdict> verdicts_for(const PipelineConfig& cfg, const HuntArgs& a) {
  const auto clustering = read_clusters(a.clusters);
  const auto scores = latest_scores(read_features(a.features));
  VerdictOptions o;
  o.low_threshold = cfg.low_threshold;
  o.high_threshold = cfg.high_threshold;
  o.include_singletons = a.include_singletons;
  return classify_clusters(clustering, scores, o);
}

int run_verdict(const Common& common, const HuntArgs& a) {
  const auto cfg = resolve_config(common);
  const auto verdicts = verdicts_for(cfg, a);
  Output out(a.out);
  write_verdict_file(out.stream(), verdicts);
  out.commit();
  std::size_t maj1 = 0, maj4 = 0;
  for (const auto& v : verdicts) {
    maj1 += v.malicious_majority_r1;
    maj4 += v.malicious_majority_r4;
  }
  std::cerr << verdicts.size() << " cluster(s); malicious majority r1 " << maj1 << ", r4 " << maj4 << '\n';
  return 0;
}

int run_hunt(const Common& common, const HuntArgs& a) {
  const auto cfg = resolve_config(common);
  RatioKind kind;
  if (a.ratio == "r1") {
    kind = RatioKind::R1;
  } else if (a.ratio == "r4") {
    kind = RatioKind::R4;
  } else {
    throw UsageError("--ratio must be r1 or r4");
  }
  const auto verdicts = verdicts_for(cfg, a);
  const auto flagged = flag_undetected(verdicts, a.min_ratio, kind);
  Output out(a.out);
  write_flagged_file(out.stream(), flagged);
  out.commit();
  std::cerr << "flagged " << flagged.size() << " zero-detection sample(s)\n";
  return 0;
}

struct FudArgs {
  std::vector<std::string> reports;
  std::string out;
  std::optional<int> threshold;
  std::optional<Timestamp> grace;
};

int run_fud(const Common& common, const FudArgs& a) {
  auto cfg = resolve_config(common);
  if (a.threshold) cfg.fud_threshold = *a.threshold;
  if (a.grace) cfg.grace_seconds = *a.grace;
  std::vector<ReportRecord> reports;
  for_each_report(a.reports, [&](ReportRecord& r) {
    r.detection_labels.clear();
    reports.push_back(std::move(r));
  });
  const auto histories = build_histories(reports);
  const auto records = detect_originally_fud(histories, cfg.window, cfg.gaps, {cfg.fud_threshold, cfg.grace_seconds});
  Output out(a.out);
  write_fud_file(out.stream(), records);
  out.commit();
  std::cerr << records.size() << " originally-FUD sample(s) among " << histories.size() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct SortArgs {
  std::string in;
  std::string out;
  std::vector<std::size_t> keys;
};

int run_sort(const Common& common, const SortArgs& a) {
  const auto cfg = resolve_config(common);
  auto o = sort_options(cfg);
  for (auto k : a.keys) {
    if (k == 0) throw UsageError("--key columns are 1-based");
    o.order.key_columns.push_back(k - 1);
  }
  const auto r = external_sort(a.in, a.out, o);
  std::cerr << "rows " << r.rows << ", spilled runs " << r.runs << "; sort " << fixed(r.sort_seconds, 3)
            << " s, merge " << fixed(r.merge_seconds, 3) << " s\n";
  return 0;
}

struct SynthArgs {
  std::size_t reports = 100'000;
  int days = 30;
  std::string start = "2021-01-01";
  std::string out;
  std::string manifest;
};

int run_synth(const Common& common, const SynthArgs& a) {
  const auto cfg = resolve_config(common);
  synth::FeedOptions o;
  o.reports = a.reports;
  o.seed = cfg.seed;
  o.days = a.days;
  o.start = time_arg(a.start, "--start");
  const auto feed = synth::generate_feed(o);
  Output out(a.out);
  for (const auto& r : feed.reports) out.stream() << format_report_line(r) << '\n';
  out.commit();
  if (!a.manifest.empty()) {
    Output m(a.manifest);
    synth::write_manifest(m.stream(), feed.manifest);
    m.commit();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vtfeed: analytics over antivirus scan-report feeds"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "vtfeed 1.0");

  Common common;
  int rc = 0;
  std::function<int()> action;

  ExtractArgs extract;
  auto* cmd = app.add_subcommand("extract", "parse reports into a feature file");
  add_common(cmd, common);
  cmd->add_option("reports", extract.reports, "report files (JSON lines, optionally .gz)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("-o,--out", extract.out, "feature file")->required();
  cmd->add_option("--dedup", extract.dedup, "latest | first | none")
      ->check(CLI::IsMember({"latest", "first", "none"}))
      ->capture_default_str();
  cmd->add_flag("!--no-label", extract.label, "leave family and is_pup empty");
  cmd->callback([&] { action = [&] { return run_extract(common, extract); }; });

  LabelArgs label;
  cmd = app.add_subcommand("label", "fill family and is_pup of a feature file from report labels");
  add_common(cmd, common);
  cmd->add_option("reports", label.reports, "report files")->required()->check(CLI::ExistingFile);
  cmd->add_option("-f,--features", label.features, "input feature file")->required()->check(CLI::ExistingFile);
  cmd->add_option("-o,--out", label.out, "output feature file")->required();
  cmd->callback([&] { action = [&] { return run_label(common, label); }; });

  StatsArgs stats;
  cmd = app.add_subcommand("stats", "feed characterization statistics");
  add_common(cmd, common);
  cmd->add_option("reports", stats.reports, "report files")->required()->check(CLI::ExistingFile);
  cmd->add_option("-o,--out", stats.out, "JSON document (default stdout)");
  cmd->add_option("--csv", stats.csv_dir, "directory for CSV series");
  cmd->add_option("--telemetry", stats.telemetry, "sha256<TAB>first_seen file for telemetry delay")
      ->check(CLI::ExistingFile);
  cmd->add_option("--top", stats.top_k, "families per filetype")->capture_default_str();
  cmd->callback([&] { action = [&] { return run_stats(common, stats); }; });

  ClusterArgs cluster;
  auto* cl = app.add_subcommand("cluster", "cluster samples of a feature file");
  cl->require_subcommand(1);
  auto cluster_io = [&](CLI::App* c) {
    add_common(c, common);
    c->add_option("-f,--features", cluster.features, "feature file")->required()->check(CLI::ExistingFile);
    c->add_option("-o,--out", cluster.out, "cluster file")->required();
  };
  cmd = cl->add_subcommand("fvg", "feature value grouping");
  cluster_io(cmd);
  cmd->add_option("--feature", cluster.feature, "feature to group by")->capture_default_str();
  cmd->callback([&] { action = [&] { return run_cluster_fvg(common, cluster); }; });
  cmd = cl->add_subcommand("hac", "single-linkage clustering over a feature set");
  cluster_io(cmd);
  cmd->add_option("--feature-set", cluster.feature_set, "features (default all)")->delimiter(',')->allow_extra_args(false);
  cmd->add_option("--threshold", cluster.threshold, "distance cut (default 0.8)");
  cmd->add_option("--limit", cluster.limit, "refuse inputs above this many samples (default 50000)");
  cmd->callback([&] { action = [&] { return run_cluster_hac(common, cluster); }; });
  cmd = cl->add_subcommand("hact", "tlsh threshold clustering with a vantage-point tree");
  cluster_io(cmd);
  cmd->add_option("--cdist", cluster.cdist, "tlsh distance threshold (default 30)");
  cmd->add_flag("--approximate", cluster.approximate, "follow only the nearer child (HAC-T instead of HAC-T-opt)");
  cmd->callback([&] { action = [&] { return run_cluster_hact(common, cluster); }; });

  EvalArgs eval;
  cmd = app.add_subcommand("eval", "precision, recall and F1 against ground truth");
  add_common(cmd, common);
  cmd->add_option("-c,--clusters", eval.clusters, "cluster file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--truth", eval.truth, "sha256<TAB>family file")->check(CLI::ExistingFile);
  cmd->add_option("--truth-clusters", eval.truth_clusters, "reference cluster file")->check(CLI::ExistingFile);
  cmd->callback([&] { action = [&] { return run_eval(common, eval); }; });

  HuntArgs hunt;
  auto hunt_io = [&](CLI::App* c) {
    add_common(c, common);
    c->add_option("-c,--clusters", hunt.clusters, "cluster file")->required()->check(CLI::ExistingFile);
    c->add_option("-f,--features", hunt.features, "feature file with vt_score")->required()->check(CLI::ExistingFile);
    c->add_option("-o,--out", hunt.out, "output file")->required();
    c->add_flag("--include-singletons", hunt.include_singletons, "also classify singleton clusters");
  };
  cmd = app.add_subcommand("verdict", "per-cluster detection ratios and classes");
  hunt_io(cmd);
  cmd->callback([&] { action = [&] { return run_verdict(common, hunt); }; });
  cmd = app.add_subcommand("hunt", "flag zero-detection members of malicious-majority clusters");
  hunt_io(cmd);
  cmd->add_option("--ratio", hunt.ratio, "r1 | r4")->capture_default_str();
  cmd->add_option("--min-ratio", hunt.min_ratio, "majority threshold")->capture_default_str();
  cmd->callback([&] { action = [&] { return run_hunt(common, hunt); }; });

  FudArgs fud;
  cmd = app.add_subcommand("fud", "originally fully-undetected samples");
  add_common(cmd, common);
  cmd->add_option("reports", fud.reports, "report files")->required()->check(CLI::ExistingFile);
  cmd->add_option("-o,--out", fud.out, "FUD file")->required();
  cmd->add_option("--threshold", fud.threshold, "detections that count as a flip (default 4)");
  cmd->add_option("--grace", fud.grace, "seconds after first-seen during which a flip is ignored (default 300)");
  cmd->callback([&] { action = [&] { return run_fud(common, fud); }; });

  SortArgs sort;
  cmd = app.add_subcommand("sort", "external merge sort of a tab-separated file");
  add_common(cmd, common);
  cmd->add_option("input", sort.in, "input file")->required()->check(CLI::ExistingFile);
  cmd->add_option("-o,--out", sort.out, "output file")->required();
  cmd->add_option("-k,--key", sort.keys, "1-based key columns (default whole line)")->delimiter(',')->allow_extra_args(false);
  cmd->callback([&] { action = [&] { return run_sort(common, sort); }; });

  SynthArgs synth;
  cmd = app.add_subcommand("synth", "synthetic feed with a manifest")->group("");
  add_common(cmd, common);
  cmd->add_option("--reports", synth.reports, "approximate number of reports")->capture_default_str();
  cmd->add_option("--days", synth.days, "window length in days")->capture_default_str();
  cmd->add_option("--start", synth.start, "window start")->capture_default_str();
  cmd->add_option("-o,--out", synth.out, "report file")->required();
  cmd->add_option("--manifest", synth.manifest, "manifest JSON");
  cmd->callback([&] { action = [&] { return run_synth(common, synth); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    rc = action();
  } catch (const UsageError& e) {
    std::cerr << "vtfeed: " << e.what() << '\n';
    return kExitUsage;
  } catch (const MissingScore& e) {
    std::cerr << "vtfeed: " << e.what() << '\n';
    return kExitData;
  } catch (const Error& e) {
    std::cerr << "vtfeed: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "vtfeed: " << e.what() << '\n';
    return kExitData;
  }
  return rc;
}
