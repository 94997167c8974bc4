#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "vtfeed/report.hpp"
#include "vtfeed/tlsh.hpp"

// Synthetic feed generator for tests and benchmarks. Clusters are planted through a shared vhash
// and a shared TLSH neighbourhood; the manifest records what a correct pipeline must recover.
namespace vtfeed::synth {

std::string random_hex(std::mt19937_64& rng, std::size_t len);
tlsh::Digest random_digest(std::mt19937_64& rng);
/// Copy of `d` with `changes` random bucket edits (each edit adds at most 6 to the distance).
tlsh::Digest perturb(const tlsh::Digest& d, int changes, std::mt19937_64& rng);

struct FeedOptions {
  std::size_t reports = 100'000;
  std::uint64_t seed = 1;
  Timestamp start = 1'609'459'200;  // 2021-01-01T00:00:00Z
  int days = 30;
};

struct DayTruth {
  std::int64_t day = 0;  // UTC day number
  std::size_t reports = 0;
  std::size_t samples = 0;
  std::size_t new_samples = 0;
};

struct FeedManifest {
  TimeWindow window;
  std::size_t reports = 0;
  std::size_t samples = 0;
  std::size_t malicious_clusters = 0;  // r4 >= 0.8 by construction, each with planted zero-score members
  std::size_t benign_clusters = 0;
  std::size_t minority_clusters = 0;  // detected by >= 4 engines in fewer than half the members
  std::size_t singletons = 0;
  /// Zero-detection members of malicious clusters: exactly what r4 >= 0.5 hunting must flag.
  std::vector<std::string> planted_flagged;
  std::vector<DayTruth> days;                   // ascending, days with at least one report
  std::map<std::string, std::size_t> filetypes;  // canonical filetype -> samples
};

struct Feed {
  std::vector<ReportRecord> reports;  // ordered by scan_date
  FeedManifest manifest;
};

Feed generate_feed(const FeedOptions& options);

void write_manifest(std::ostream& out, const FeedManifest& m);

}  // namespace vtfeed::synth
