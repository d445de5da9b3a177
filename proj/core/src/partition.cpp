// SPDX-License-Identifier: Apache-2.0

#include "coreagent/partition.hpp"

#include <algorithm>
#include <unordered_map>

#include "coreagent/error.hpp"

namespace coreagent::blocks {

std::string Block::rendered() const {
  std::string out;
  for (std::size_t i = 0; i < renderings.size(); ++i) {
    if (i > 0) out += '\n';
    out += renderings[i];
  }
  return out;
}

std::size_t Partition::element_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.size();
  return n;
}

const Block& Partition::block(int block_id) const {
  if (block_id < 0 || block_id >= static_cast<int>(blocks.size())) {
    throw Error(ErrorKind::InvalidArgument, "unknown block id " + std::to_string(block_id));
  }
  return blocks[static_cast<std::size_t>(block_id)];
}

Grouping group_at_level(const std::vector<ui::UiElement>& elements, int level) {
  Grouping groups;
  std::unordered_map<int, std::size_t> slot;
  for (const auto& e : elements) {
    int key = e.node_id;
    const auto& path = e.ancestor_path;
    if (!path.empty()) {
      key = level < static_cast<int>(path.size()) ? path[static_cast<std::size_t>(level)] : path.back();
    }
    auto [it, inserted] = slot.try_emplace(key, groups.size());
    if (inserted) groups.emplace_back(key, std::vector<int>{});
    groups[it->second].second.push_back(e.element_index);
  }
  return groups;
}

namespace {

Partition from_grouping(const ui::UiTree& tree, const Grouping& grouping) {
  Partition p;
  for (const auto& [anchor, members] : grouping) {
    Block b;
    b.anchor_node = anchor;
    b.element_indices = members;
    std::sort(b.element_indices.begin(), b.element_indices.end());
    for (std::size_t i = 0; i < b.element_indices.size(); ++i) {
      const auto* e = tree.element(b.element_indices[i]);
      b.renderings.push_back(e->rendered);
      b.bounds = i == 0 ? e->bounds : b.bounds.united(e->bounds);
    }
    p.blocks.push_back(std::move(b));
  }
  std::sort(p.blocks.begin(), p.blocks.end(),
            [](const Block& a, const Block& b) { return a.element_indices.front() < b.element_indices.front(); });
  for (std::size_t i = 0; i < p.blocks.size(); ++i) p.blocks[i].block_id = static_cast<int>(i);
  return p;
}

Block merge_pair(const Block& a, const Block& b) {
  Block m;
  m.anchor_node = a.anchor_node;
  m.bounds = a.bounds.united(b.bounds);
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() || j < b.size()) {
    const bool take_a = j >= b.size() || (i < a.size() && a.element_indices[i] < b.element_indices[j]);
    const Block& src = take_a ? a : b;
    std::size_t& k = take_a ? i : j;
    m.element_indices.push_back(src.element_indices[k]);
    m.renderings.push_back(src.renderings[k]);
    ++k;
  }
  return m;
}

}  // namespace

Partition partition(const ui::UiTree& tree, const PartitionOptions& options) {
  const auto& elements = tree.elements();
  if (elements.empty()) {
    Partition p;
    p.degenerate = true;
    return p;
  }

  std::size_t max_len = 0;
  for (const auto& e : elements) max_len = std::max(max_len, e.ancestor_path.size());
  const int levels = std::max<int>(1, static_cast<int>(max_len));

  Grouping grouping;
  int level = 0;
  for (; level < levels; ++level) {
    grouping = group_at_level(elements, level);
    if (static_cast<int>(grouping.size()) >= options.threshold) break;
  }
  const bool reached = level < levels;
  if (!reached) level = levels - 1;

  Partition p = from_grouping(tree, grouping);
  p.chosen_level = level;
  p.reached_threshold = reached;
  if (options.max_blocks > 0) p = merge_to_limit(p, options.max_blocks);
  return p;
}

Partition merge_to_limit(const Partition& p, int max_blocks) {
  if (max_blocks < 1) throw Error(ErrorKind::InvalidArgument, "max_blocks must be >= 1");
  Partition out = p;
  while (static_cast<int>(out.blocks.size()) > max_blocks) {
    std::size_t best = 0;
    std::size_t best_size = out.blocks[0].size() + out.blocks[1].size();
    for (std::size_t i = 1; i + 1 < out.blocks.size(); ++i) {
      const std::size_t s = out.blocks[i].size() + out.blocks[i + 1].size();
      if (s < best_size) {
        best = i;
        best_size = s;
      }
    }
    out.blocks[best] = merge_pair(out.blocks[best], out.blocks[best + 1]);
    out.blocks.erase(out.blocks.begin() + static_cast<std::ptrdiff_t>(best) + 1);
  }
  std::sort(out.blocks.begin(), out.blocks.end(),
            [](const Block& a, const Block& b) { return a.element_indices.front() < b.element_indices.front(); });
  for (std::size_t i = 0; i < out.blocks.size(); ++i) out.blocks[i].block_id = static_cast<int>(i);
  return out;
}

Partition equal_split(const ui::UiTree& tree, int parts) {
  if (parts < 1) throw Error(ErrorKind::InvalidArgument, "parts must be >= 1");
  const auto& elements = tree.elements();
  if (elements.empty()) {
    Partition p;
    p.degenerate = true;
    return p;
  }
  const auto n = elements.size();
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(parts), n);
  Grouping grouping;
  std::size_t next = 0;
  for (std::size_t g = 0; g < k; ++g) {
    const std::size_t count = n / k + (g < n % k ? 1 : 0);
    std::vector<int> members;
    for (std::size_t i = 0; i < count; ++i) members.push_back(elements[next++].element_index);
    grouping.emplace_back(tree.root().node_id, std::move(members));
  }
  Partition p = from_grouping(tree, grouping);
  p.reached_threshold = static_cast<int>(k) >= kDefaultBlockThreshold;
  return p;
}

Partition single_block(const ui::UiTree& tree) {
  const auto& elements = tree.elements();
  if (elements.empty()) {
    Partition p;
    p.degenerate = true;
    return p;
  }
  std::vector<int> members;
  for (const auto& e : elements) members.push_back(e.element_index);
  return from_grouping(tree, Grouping{{tree.root().node_id, std::move(members)}});
}

}  // namespace coreagent::blocks
