#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vtfeed/tlsh.hpp"

namespace vtfeed {

/// Vantage-point tree over TLSH digests.
///
/// Splits and pruning use tlsh::bound (a metric); matches are decided by tlsh::distance.
/// For every internal node, inside-subtree digests lie within `radius` of the vantage under
/// tlsh::bound and outside-subtree digests lie strictly beyond it.
class VPTree {
 public:
  struct Node {
    std::int32_t vantage = -1;  // digest index; -1 for leaves
    int radius = 0;
    std::int32_t inside = -1;
    std::int32_t outside = -1;
    std::uint32_t bucket_begin = 0;  // leaf bucket range in bucket_items()
    std::uint32_t bucket_end = 0;

    bool is_leaf() const noexcept { return vantage < 0; }
  };

  VPTree() = default;
  static VPTree build(std::vector<tlsh::Digest> digests, std::uint64_t seed = 0, std::size_t leaf_size = 8);

  /// Indices with distance(q, digest) <= r, ascending. Exact mode descends every subtree the
  /// bound metric cannot exclude; approximate mode follows only the nearer child.
  std::vector<std::uint32_t> radius_query(const tlsh::Digest& q, int r, bool exact) const;

  std::size_t size() const noexcept { return digests_.size(); }
  bool empty() const noexcept { return digests_.empty(); }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const std::vector<std::uint32_t>& bucket_items() const noexcept { return bucket_items_; }
  const std::vector<tlsh::Digest>& digests() const noexcept { return digests_; }

 private:
  std::vector<tlsh::Digest> digests_;
  std::vector<Node> nodes_;  // nodes_[0] is the root when non-empty
  std::vector<std::uint32_t> bucket_items_;
};

}  // namespace vtfeed
