#pragma once

#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "vtfeed/exec.hpp"

namespace vtfeed {

/// Lexicographic order over tab-separated key columns; an empty column list compares whole lines.
struct LineOrder {
  std::vector<std::size_t> key_columns;
  char separator = '\t';

  int compare(std::string_view a, std::string_view b) const;
  bool operator()(std::string_view a, std::string_view b) const { return compare(a, b) < 0; }
};

struct SortOptions {
  std::size_t memory_budget = std::size_t{1} << 30;
  std::filesystem::path temp_dir;  // empty: default_temp_dir()
  LineOrder order;
  Exec exec = Exec::Parallel;
  std::size_t max_fan_in = 128;
};

/// $VTFEED_TMPDIR when set, else the system temp directory.
std::filesystem::path default_temp_dir();

struct SortReport {
  std::size_t rows = 0;
  std::size_t runs = 0;  // spilled runs; 0 when everything fit in memory
  double sort_seconds = 0;
  double merge_seconds = 0;
};

/// Stable external merge sort of text lines.
///
/// Lines are buffered in memory until the budget is reached, then each chunk is sorted and
/// spilled to a run file under a private temp directory. finish() merges the runs (k-way,
/// cascading when there are more than max_fan_in) into one sorted file; without spills the
/// chunk is served from memory. Temp files are removed on destruction. Write failures throw
/// SortSpill after the partial files are removed.
class ExternalSorter {
 public:
  explicit ExternalSorter(SortOptions options);
  ~ExternalSorter();
  ExternalSorter(const ExternalSorter&) = delete;
  ExternalSorter& operator=(const ExternalSorter&) = delete;

  /// `line` must not contain '\n'. Throws MalformedRow if a key column is missing.
  void add(std::string_view line);
  void finish();
  /// Sorted lines, valid until the next call. Only after finish().
  bool next(std::string_view& line);

  const SortReport& report() const noexcept { return report_; }
  /// Bytes currently held by the in-memory chunk (arena blocks plus line index).
  std::size_t memory_in_use() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  SortReport report_;
};

/// Sorts a file (plain or .gz input, plain output). Leading `#` header lines are copied through unsorted.
SortReport external_sort(const std::string& input, const std::string& output, const SortOptions& options);

}  // namespace vtfeed
