#include "vtfeed/vptree.hpp"

#include <algorithm>
#include <random>
#include <utility>

namespace vtfeed {

namespace {

struct BuildTask {
  std::int32_t node;
  std::vector<std::uint32_t> items;
};

}  // namespace

VPTree VPTree::build(std::vector<tlsh::Digest> digests, std::uint64_t seed, std::size_t leaf_size) {
  VPTree tree;
  tree.digests_ = std::move(digests);
  if (tree.digests_.empty()) return tree;
  leaf_size = std::max<std::size_t>(leaf_size, 1);

  std::mt19937_64 rng(seed);
  std::vector<BuildTask> stack;
  {
    std::vector<std::uint32_t> all(tree.digests_.size());
    for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
    tree.nodes_.emplace_back();
    stack.push_back({0, std::move(all)});
  }

  std::vector<std::pair<int, std::uint32_t>> dist;
  while (!stack.empty()) {
    BuildTask task = std::move(stack.back());
    stack.pop_back();
    auto& items = task.items;

    auto make_leaf = [&] {
      Node& node = tree.nodes_[static_cast<std::size_t>(task.node)];
      node.bucket_begin = static_cast<std::uint32_t>(tree.bucket_items_.size());
      tree.bucket_items_.insert(tree.bucket_items_.end(), items.begin(), items.end());
      node.bucket_end = static_cast<std::uint32_t>(tree.bucket_items_.size());
    };
    if (items.size() <= leaf_size) {
      make_leaf();
      continue;
    }

    std::uniform_int_distribution<std::size_t> pick(0, items.size() - 1);
    std::swap(items[pick(rng)], items.back());
    const std::uint32_t vantage = items.back();
    items.pop_back();

    dist.clear();
    for (auto i : items) dist.emplace_back(tlsh::bound(tree.digests_[vantage], tree.digests_[i]), i);
    auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
    std::nth_element(dist.begin(), mid, dist.end());
    const int radius = mid->first;

    std::vector<std::uint32_t> inside, outside;
    for (const auto& [d, i] : dist) (d <= radius ? inside : outside).push_back(i);
    if (outside.empty()) {
      // Over half the points share the maximal distance; splitting would only peel one point.
      items.push_back(vantage);
      make_leaf();
      continue;
    }

    const auto inside_id = static_cast<std::int32_t>(tree.nodes_.size());
    const auto outside_id = inside_id + 1;
    tree.nodes_.emplace_back();
    tree.nodes_.emplace_back();
    Node& node = tree.nodes_[static_cast<std::size_t>(task.node)];
    node.vantage = static_cast<std::int32_t>(vantage);
    node.radius = radius;
    node.inside = inside_id;
    node.outside = outside_id;
    stack.push_back({outside_id, std::move(outside)});
    stack.push_back({inside_id, std::move(inside)});
  }
  return tree;
}

std::vector<std::uint32_t> VPTree::radius_query(const tlsh::Digest& q, int r, bool exact) const {
  std::vector<std::uint32_t> out;
  if (nodes_.empty()) return out;
  std::vector<std::int32_t> stack{0};
  while (!stack.empty()) {
    const Node& node = nodes_[static_cast<std::size_t>(stack.back())];
    stack.pop_back();
    if (node.is_leaf()) {
      for (auto k = node.bucket_begin; k < node.bucket_end; ++k) {
        const auto i = bucket_items_[k];
        if (tlsh::distance(q, digests_[i]) <= r) out.push_back(i);
      }
      continue;
    }
    const auto& v = digests_[static_cast<std::size_t>(node.vantage)];
    const int db = tlsh::bound(q, v);
    if (db <= r && tlsh::distance(q, v) <= r) out.push_back(static_cast<std::uint32_t>(node.vantage));
    if (exact) {
      if (db - r <= node.radius) stack.push_back(node.inside);
      if (db + r > node.radius) stack.push_back(node.outside);
    } else {
      stack.push_back(db <= node.radius ? node.inside : node.outside);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace vtfeed
