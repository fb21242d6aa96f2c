#pragma once

#include <span>

#include "jif/format.h"

namespace jif::detail {

constexpr size_t ChildIndex(size_t node, size_t j) {
  return node * (kNodeFanout + 1) + j + 1;
}

// In-order walk over every slot (used or not) of an implicit tree.
template <typename Fn>
void WalkSlots(std::span<const TreeNode> tree, Fn &&fn, size_t node = 0) {
  if (node >= tree.size()) return;
  for (size_t j = 0; j < kNodeFanout; ++j) {
    WalkSlots(tree, fn, ChildIndex(node, j));
    fn(tree[node].slots[j]);
  }
  WalkSlots(tree, fn, ChildIndex(node, kNodeFanout));
}

}  // namespace jif::detail
