#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "vtfeed/report.hpp"

namespace vtfeed {

/// Pipeline settings. Loaded from a JSON file (docs/defaults.md lists every key) and then
/// overridden by command-line flags.
struct PipelineConfig {
  TimeWindow window{0, std::numeric_limits<Timestamp>::max()};
  std::vector<TimeWindow> gaps;
  std::size_t memory_budget = std::size_t{1} << 30;
  std::filesystem::path temp_dir;
  std::uint64_t seed = 0;
  std::string taxonomy_path;
  std::string alias_path;
  std::string filetype_mapping_path;
  int low_threshold = 1;
  int high_threshold = 4;
  int cdist = 30;
  double hac_threshold = 0.8;
  std::size_t hac_limit = 50'000;
  int fud_threshold = 4;
  Timestamp grace_seconds = 300;
  int threads = 0;

  static constexpr std::size_t kMinMemoryBudget = std::size_t{64} << 20;

  /// Throws Error on an inverted window, a budget under 64 MiB or negative thresholds.
  void validate() const;

  /// Applies keys present in a JSON document over the current values. Throws Error.
  void merge_json(const std::string& json_text);
  static PipelineConfig load(const std::string& path);
};

}  // namespace vtfeed
