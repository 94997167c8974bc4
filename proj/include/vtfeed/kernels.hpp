#pragma once

// Data-parallel inner loops. Each kernel has an OpenMP implementation and a serial reference
// selected by Exec; tests and bench/ compare the two.

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vtfeed/clustering.hpp"
#include "vtfeed/exec.hpp"
#include "vtfeed/external_sort.hpp"
#include "vtfeed/report.hpp"
#include "vtfeed/tlsh.hpp"
#include "vtfeed/vptree.hpp"

namespace vtfeed::kernels {

using Edge = std::pair<std::uint32_t, std::uint32_t>;

/// Upper bound on the temporary bytes per line that sort_lines allocates on top of the views.
inline constexpr std::size_t kSortScratchPerLine = 64;

/// Stable sort of line views.
void sort_lines(std::vector<std::string_view>& lines, const LineOrder& order, Exec exec);

/// Parses report lines; malformed lines leave an empty optional and their error text in `errors`.
struct ParsedReports {
  std::vector<std::optional<ReportRecord>> records;
  std::vector<std::string> errors;  // parallel to records; empty on success
};
ParsedReports parse_reports(const std::vector<std::string>& lines, Exec exec);

/// Sample features laid out for O(n^2) distance evaluation: equality features are interned to
/// integer codes, tlsh is pre-decoded. Code -1 marks NULL.
struct HacMatrix {
  std::size_t rows = 0;
  std::vector<FeatureKind> kinds;
  std::vector<std::int64_t> codes;      // rows * kinds.size(), row-major
  std::vector<tlsh::Digest> digests;    // one per row, meaningful where the tlsh code is >= 0

  static HacMatrix build(std::span<const SampleFeatures> samples, const DistanceSpec& spec);
  double distance(std::size_t i, std::size_t j) const noexcept;
  bool all_null(std::size_t i) const noexcept;
};

/// Edges of a spanning forest of the graph {(i, j) : distance(i, j) < threshold}.
std::vector<Edge> hac_spanning_edges(const HacMatrix& m, double threshold, Exec exec);

/// Edges of a spanning forest of the graph {(i, j) : j in tree.radius_query(digest i, cdist)}.
std::vector<Edge> hact_spanning_edges(const VPTree& tree, int cdist, bool exact, Exec exec);

}  // namespace vtfeed::kernels
