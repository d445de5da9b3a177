// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "coreagent/ui_model.hpp"

namespace coreagent::blocks {

/// A group of elements sharing a layout ancestor; the unit of upload.
struct Block {
  int block_id = 0;
  std::vector<int> element_indices;
  /// Member renderings, parallel to element_indices.
  std::vector<std::string> renderings;
  int anchor_node = 0;
  ui::Rect bounds;

  /// Newline-joined member renderings.
  [[nodiscard]] std::string rendered() const;
  [[nodiscard]] std::size_t size() const { return element_indices.size(); }

  friend bool operator==(const Block&, const Block&) = default;
};

struct Partition {
  std::vector<Block> blocks;
  int chosen_level = 0;
  bool reached_threshold = false;
  /// Page with no important elements: one empty placeholder block, nothing to reduce.
  bool degenerate = false;

  [[nodiscard]] std::size_t element_count() const;
  [[nodiscard]] const Block& block(int block_id) const;

  friend bool operator==(const Partition&, const Partition&) = default;
};

/// Anchor node id -> element indices, in first-appearance order of the anchor.
using Grouping = std::vector<std::pair<int, std::vector<int>>>;

inline constexpr int kDefaultBlockThreshold = 3;

struct PartitionOptions {
  int threshold = kDefaultBlockThreshold;
  /// Merge down to at most this many blocks when > 0.
  int max_blocks = 0;
};

/// Groups elements by their level-th ancestor (or their deepest ancestor when the
/// path is shorter than level).
Grouping group_at_level(const std::vector<ui::UiElement>& elements, int level);

/// Scans ancestor levels from the root down and keeps the first grouping with at
/// least `threshold` blocks; otherwise the grouping at the deepest level.
Partition partition(const ui::UiTree& tree, const PartitionOptions& options = {});

/// Repeatedly merges the adjacent pair of blocks with the smallest combined size.
Partition merge_to_limit(const Partition& p, int max_blocks);

/// Contiguous split of the element list into `parts` near-equal chunks, ignoring layout.
Partition equal_split(const ui::UiTree& tree, int parts);

/// Full page as a single block (used when blocks are not needed).
Partition single_block(const ui::UiTree& tree);

}  // namespace coreagent::blocks
