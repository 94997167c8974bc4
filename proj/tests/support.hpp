#pragma once

// Shared generators and brute-force oracles for the unit and acceptance tests.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vtfeed/clustering.hpp"
#include "vtfeed/hunting.hpp"
#include "vtfeed/report.hpp"
#include "vtfeed/synth.hpp"
#include "vtfeed/tlsh.hpp"

namespace testsupport {

using Partition = std::set<std::vector<std::string>>;

inline Partition partition_of(const vtfeed::Clustering& c) {
  Partition p;
  for (const auto& cl : c.clusters()) {
    auto m = cl.members;
    std::sort(m.begin(), m.end());
    p.insert(std::move(m));
  }
  return p;
}

/// Connected components of {(i, j) : linked(i, j)} by breadth-first search over all pairs.
inline Partition brute_components(const std::vector<std::string>& ids,
                                  const std::function<bool(std::size_t, std::size_t)>& linked) {
  const std::size_t n = ids.size();
  std::vector<char> seen(n, 0);
  Partition out;
  for (std::size_t s = 0; s < n; ++s) {
    if (seen[s]) continue;
    std::vector<std::size_t> queue{s};
    seen[s] = 1;
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const auto i = queue[q];
      for (std::size_t j = 0; j < n; ++j) {
        if (!seen[j] && linked(i, j)) {
          seen[j] = 1;
          queue.push_back(j);
        }
      }
    }
    std::vector<std::string> members;
    for (auto i : queue) members.push_back(ids[i]);
    std::sort(members.begin(), members.end());
    out.insert(std::move(members));
  }
  return out;
}

inline std::string sha(std::mt19937_64& rng) { return vtfeed::synth::random_hex(rng, 64); }

/// Digests scattered around a few random centres, with header jitter, so that radius-30
/// neighbourhoods are non-trivial.
inline std::vector<vtfeed::tlsh::Digest> clustered_digests(std::size_t n, std::size_t centres, std::mt19937_64& rng) {
  std::vector<vtfeed::tlsh::Digest> c;
  for (std::size_t i = 0; i < centres; ++i) c.push_back(vtfeed::synth::random_digest(rng));
  std::vector<vtfeed::tlsh::Digest> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto d = vtfeed::synth::perturb(c[rng() % centres], static_cast<int>(rng() % 12), rng);
    switch (rng() % 6) {
      case 0: d.lvalue = static_cast<std::uint8_t>(d.lvalue + 1); break;
      case 1: d.q1ratio = static_cast<std::uint8_t>((d.q1ratio + 1) & 0xF); break;
      case 2: d.q2ratio = static_cast<std::uint8_t>((d.q2ratio + 15) & 0xF); break;
      case 3: d.checksum = static_cast<std::uint8_t>(rng()); break;
      default: break;
    }
    out.push_back(d);
  }
  return out;
}

/// Samples with mixed feature availability over small value pools, so that equal values and
/// near tlsh digests are common.
inline std::vector<vtfeed::SampleFeatures> random_samples(std::size_t n, std::mt19937_64& rng) {
  const auto digests = clustered_digests(n, std::max<std::size_t>(2, n / 20), rng);
  std::vector<vtfeed::SampleFeatures> out(n);
  auto pick = [&](int pool, int null_pct) -> std::optional<std::string> {
    if (static_cast<int>(rng() % 100) < null_pct) return std::nullopt;
    return std::to_string(rng() % static_cast<std::uint64_t>(pool));
  };
  for (std::size_t i = 0; i < n; ++i) {
    auto& s = out[i];
    s.sha256 = sha(rng);
    s.filetype = pick(4, 10);
    s.vhash = pick(static_cast<int>(n / 8 + 1), 30);
    s.imphash = pick(static_cast<int>(n / 5 + 1), 50);
    s.cert_thumbprint = pick(static_cast<int>(n / 3 + 1), 80);
    if (rng() % 100 >= 30) s.tlsh = vtfeed::tlsh::encode_digest(digests[i]);
  }
  return out;
}

struct FudCorpus {
  std::vector<vtfeed::SampleHistory> histories;
  std::set<std::string> planted;  // samples a correct detector must report
  std::size_t grace_excluded = 0;
};

/// Histories of known kinds: planted originally-FUD samples (zero first scan, or first seen before
/// collection outside any gap) and decoys that break exactly one condition. Threshold 4, grace 300 s.
inline FudCorpus fud_corpus(std::size_t n, std::mt19937_64& rng, const vtfeed::TimeWindow& window,
                            const std::vector<vtfeed::TimeWindow>& gaps) {
  using vtfeed::Timestamp;
  FudCorpus c;
  auto in_window = [&] {
    for (;;) {
      const Timestamp t = window.start + static_cast<Timestamp>(rng() % static_cast<std::uint64_t>(window.end - window.start));
      bool gap = false;
      for (const auto& g : gaps) gap = gap || g.contains(t);
      if (!gap) return t;
    }
  };
  auto below = [&] { return static_cast<int>(rng() % 4); };       // 0..3
  auto above = [&] { return 4 + static_cast<int>(rng() % 50); };  // >= 4
  for (std::size_t i = 0; i < n; ++i) {
    vtfeed::SampleHistory h;
    h.sha256 = sha(rng);
    const int kind = static_cast<int>(rng() % 9);
    Timestamp t = in_window();
    h.fseen_date = t;
    auto scan = [&](Timestamp at, int score) { h.scans.push_back({at, score}); };
    switch (kind) {
      case 0: {  // zero first scan, flips after the grace period
        scan(t, 0);
        Timestamp at = t + 301 + static_cast<Timestamp>(rng() % (30 * 86'400));
        for (int k = 0; k < static_cast<int>(rng() % 3); ++k, at += 1 + static_cast<Timestamp>(rng() % 3600)) scan(at, below());
        scan(at, above());
        if (rng() % 2) scan(at + 86'400, above());
        c.planted.insert(h.sha256);
        break;
      }
      case 1: {  // first seen before collection started, outside any gap; first collected scan already detected
        const Timestamp first = t + 301 + static_cast<Timestamp>(rng() % 86'400);
        scan(first, rng() % 2 ? below() + 1 : above());
        scan(first + 100, above());
        c.planted.insert(h.sha256);
        break;
      }
      case 2:  // flips within the grace period
        scan(t, 0);
        scan(t + 1 + static_cast<Timestamp>(rng() % 300), above());
        scan(t + 86'400, above());
        ++c.grace_excluded;
        break;
      case 3:  // never reaches the threshold
        scan(t, 0);
        scan(t + 86'400, below());
        break;
      case 4:  // detected in between, clean on the last scan
        scan(t, 0);
        scan(t + 86'400, above());
        scan(t + 2 * 86'400, below());
        break;
      case 5:  // first seen outside the window
        h.fseen_date = window.start - 1 - static_cast<Timestamp>(rng() % 86'400);
        scan(window.start + 10, 0);
        scan(window.start + 86'400, above());
        break;
      case 6:  // detected at first sight, seen by the collector right away
        scan(t, 1 + below());
        scan(t + 86'400, above());
        break;
      case 7: {  // first seen inside a gap, detected when first collected
        if (gaps.empty()) {
          scan(t, 1 + below());
          scan(t + 86'400, above());
          break;
        }
        const auto& g = gaps[rng() % gaps.size()];
        h.fseen_date = g.start + static_cast<Timestamp>(rng() % static_cast<std::uint64_t>(g.end - g.start));
        scan(g.end + 10, above());
        break;
      }
      default:  // zero first scan and a long history
        scan(t, 0);
        scan(t + 400, 2);
        scan(t + 9000, above());
        c.planted.insert(h.sha256);
        break;
    }
    c.histories.push_back(std::move(h));
  }
  return c;
}

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "vtfeed-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace testsupport
