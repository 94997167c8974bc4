#pragma once

#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

namespace vtfeed {

/// Disjoint sets with path compression and union by size.
class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), std::uint32_t{0});
  }

  std::uint32_t find(std::uint32_t x) {
    std::uint32_t root = x;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[x] != root) x = std::exchange(parent_[x], root);
    return root;
  }

  /// Returns true when the two elements were in different sets.
  bool unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return true;
  }

  std::size_t size() const noexcept { return parent_.size(); }

  /// Set members grouped by root, in order of each set's smallest element.
  std::vector<std::vector<std::uint32_t>> groups() {
    std::vector<std::int64_t> slot(parent_.size(), -1);
    std::vector<std::vector<std::uint32_t>> out;
    for (std::uint32_t i = 0; i < parent_.size(); ++i) {
      auto& s = slot[find(i)];
      if (s < 0) {
        s = static_cast<std::int64_t>(out.size());
        out.emplace_back();
      }
      out[static_cast<std::size_t>(s)].push_back(i);
    }
    return out;
  }

 private:
  std::vector<std::uint32_t> parent_;
  std::vector<std::uint32_t> size_;
};

}  // namespace vtfeed
