#include "vtfeed/synth.hpp"

#include <algorithm>
#include <array>

#include <json.hpp>

namespace vtfeed::synth {

namespace {

constexpr int kEngines = 70;
constexpr std::array<const char*, 5> kClasses = {"Trojan", "Backdoor", "Worm", "Adware", "Downloader"};

struct FiletypeEvidence {
  const char* trid;
  const char* tag;
  const char* ext;
};

constexpr std::array<FiletypeEvidence, 5> kFiletypes = {{
    {"Win32 Executable MS Visual C++ (generic)", "peexe", "exe"},
    {"Android Package", "apk", "apk"},
    {"Adobe Portable Document Format", "pdf", "pdf"},
    {"HTML Document", "html", "html"},
    {"ELF Executable and Linkable Format (generic)", "elf", "so"},
}};

std::string family_name(std::mt19937_64& rng) {
  // Always contains a non-hex letter so the labeler does not drop it.
  static constexpr char kLetters[] = "ghijklmnopqrstuvwxyz";
  std::uniform_int_distribution<int> pick(0, 19);
  std::string s = "z";
  for (int i = 0; i < 6; ++i) s.push_back(kLetters[pick(rng)]);
  return s;
}

enum class Kind { Malicious, Benign, Minority, Singleton, NullVhash };

struct SampleSpec {
  std::string sha256;
  int final_score = 0;
  std::optional<std::string> vhash;
  tlsh::Digest digest;
  std::optional<std::string> imphash;
  std::string family;
  std::size_t filetype = 0;
};

}  // namespace

std::string random_hex(std::mt19937_64& rng, std::size_t len) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s(len, '0');
  for (auto& c : s) c = kHex[rng() & 0xF];
  return s;
}

tlsh::Digest random_digest(std::mt19937_64& rng) {
  tlsh::Digest d;
  d.checksum = static_cast<std::uint8_t>(rng());
  d.lvalue = static_cast<std::uint8_t>(rng());
  d.q1ratio = static_cast<std::uint8_t>(rng() & 0xF);
  d.q2ratio = static_cast<std::uint8_t>(rng() & 0xF);
  for (auto& b : d.body) b = static_cast<std::uint8_t>(rng());
  return d;
}

tlsh::Digest perturb(const tlsh::Digest& d, int changes, std::mt19937_64& rng) {
  tlsh::Digest out = d;
  for (int i = 0; i < changes; ++i) {
    const auto byte = rng() % tlsh::kBodyBytes;
    const auto shift = 2 * (rng() % 4);
    const auto value = static_cast<std::uint8_t>(rng() & 3);
    out.body[byte] = static_cast<std::uint8_t>((out.body[byte] & ~(3u << shift)) | (value << shift));
  }
  return out;
}

Feed generate_feed(const FeedOptions& options) {
  std::mt19937_64 rng(options.seed);
  Feed feed;
  auto& m = feed.manifest;
  m.window = {options.start, options.start + static_cast<Timestamp>(options.days) * 86'400};
  const Timestamp span = m.window.end - m.window.start;

  std::map<std::int64_t, DayTruth> days;
  auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  auto emit_sample = [&](const SampleSpec& s) {
    const int n_reports = uniform(1, 3);
    std::vector<Timestamp> dates;
    for (int i = 0; i < n_reports; ++i) {
      dates.push_back(m.window.start + static_cast<Timestamp>(rng() % static_cast<std::uint64_t>(span)));
    }
    std::sort(dates.begin(), dates.end());
    dates.erase(std::unique(dates.begin(), dates.end()), dates.end());
    // A tenth of the samples were first seen before the window.
    const Timestamp fseen = uniform(0, 9) == 0 ? dates.front() - 86'400 * uniform(31, 400) : dates.front();
    const auto& ft = kFiletypes[s.filetype];
    ++m.filetypes[ft.tag];
    std::int64_t last_day = -1;
    for (auto t : dates) {
      auto& d = days[t / 86'400];
      ++d.reports;
      if (t / 86'400 != last_day) ++d.samples;
      if (t == fseen) ++d.new_samples;
      last_day = t / 86'400;
    }
    for (std::size_t i = 0; i < dates.size(); ++i) {
      ReportRecord r;
      r.sha256 = s.sha256;
      r.sha1 = random_hex(rng, 40);
      r.md5 = random_hex(rng, 32);
      r.scan_date = dates[i];
      r.fseen_date = fseen;
      r.vt_score = i + 1 == dates.size() ? s.final_score : uniform(0, s.final_score);
      std::vector<int> engines(kEngines);
      for (int e = 0; e < kEngines; ++e) engines[static_cast<std::size_t>(e)] = e;
      std::shuffle(engines.begin(), engines.end(), rng);
      for (int k = 0; k < r.vt_score + 3 && k < kEngines; ++k) {
        char name[8];
        std::snprintf(name, sizeof name, "E%02d", engines[static_cast<std::size_t>(k)]);
        if (k < r.vt_score) {
          const char* cls = kClasses[static_cast<std::size_t>(uniform(0, kClasses.size() - 1))];
          r.detection_labels.push_back({name, std::string(cls) + ".Win32." + s.family + "." + random_hex(rng, 2)});
        } else {
          r.detection_labels.push_back({name, std::nullopt});
        }
      }
      r.trid_file_type = ft.trid;
      r.vt_tags = {ft.tag};
      r.vt_meaningful_name = "sample." + std::string(ft.ext);
      r.tlsh = tlsh::encode_digest(s.digest);
      r.vhash = s.vhash;
      r.imphash = s.imphash;
      feed.reports.push_back(std::move(r));
    }
  };

  while (feed.reports.size() < options.reports) {
    const int roll = uniform(0, 99);
    const Kind kind = roll < 30   ? Kind::Malicious
                      : roll < 50 ? Kind::Benign
                      : roll < 60 ? Kind::Minority
                      : roll < 85 ? Kind::Singleton
                                  : Kind::NullVhash;
    const bool clustered = kind == Kind::Malicious || kind == Kind::Benign || kind == Kind::Minority;
    const int size = clustered ? uniform(4, 30) : 1;
    const std::string vhash = random_hex(rng, 32);
    const auto center = random_digest(rng);
    const std::string family = family_name(rng);
    const std::optional<std::string> imphash =
        uniform(0, 1) ? std::optional<std::string>(random_hex(rng, 32)) : std::nullopt;
    const auto filetype = static_cast<std::size_t>(uniform(0, kFiletypes.size() - 1));

    // Per-member scores.
    std::vector<int> scores(static_cast<std::size_t>(size), 0);
    if (kind == Kind::Malicious) {
      const int zeros = uniform(1, std::max(1, size / 5));
      for (int i = zeros; i < size; ++i) scores[static_cast<std::size_t>(i)] = uniform(4, 60);
    } else if (kind == Kind::Minority) {
      const int detected = uniform(1, (size - 1) / 2);
      for (int i = 0; i < detected; ++i) scores[static_cast<std::size_t>(i)] = uniform(4, 60);
    } else if (!clustered) {
      scores[0] = uniform(0, 1) ? 0 : uniform(1, 60);
    }
    std::shuffle(scores.begin(), scores.end(), rng);

    for (int i = 0; i < size; ++i) {
      SampleSpec s;
      s.sha256 = random_hex(rng, 64);
      s.final_score = scores[static_cast<std::size_t>(i)];
      if (kind != Kind::NullVhash) s.vhash = kind == Kind::Singleton ? random_hex(rng, 32) : vhash;
      s.digest = perturb(center, uniform(0, 2), rng);
      s.imphash = imphash;
      s.family = family;
      s.filetype = filetype;
      if (kind == Kind::Malicious && s.final_score == 0) m.planted_flagged.push_back(s.sha256);
      emit_sample(s);
      ++m.samples;
    }
    switch (kind) {
      case Kind::Malicious: ++m.malicious_clusters; break;
      case Kind::Benign: ++m.benign_clusters; break;
      case Kind::Minority: ++m.minority_clusters; break;
      default: ++m.singletons; break;
    }
  }
  std::stable_sort(feed.reports.begin(), feed.reports.end(),
                   [](const ReportRecord& a, const ReportRecord& b) { return a.scan_date < b.scan_date; });
  std::sort(m.planted_flagged.begin(), m.planted_flagged.end());
  m.reports = feed.reports.size();
  for (auto& [day, d] : days) {
    d.day = day;
    m.days.push_back(d);
  }
  return feed;
}

void write_manifest(std::ostream& out, const FeedManifest& m) {
  nlohmann::json j;
  j["window"] = {{"start", m.window.start}, {"end", m.window.end}};
  j["reports"] = m.reports;
  j["samples"] = m.samples;
  j["malicious_clusters"] = m.malicious_clusters;
  j["benign_clusters"] = m.benign_clusters;
  j["minority_clusters"] = m.minority_clusters;
  j["singletons"] = m.singletons;
  j["planted_flagged"] = m.planted_flagged;
  j["filetypes"] = m.filetypes;
  auto& days = j["days"] = nlohmann::json::array();
  for (const auto& d : m.days) {
    days.push_back({{"day", d.day}, {"reports", d.reports}, {"samples", d.samples}, {"new_samples", d.new_samples}});
  }
  out << j.dump(2) << '\n';
}

}  // namespace vtfeed::synth
