// overlay.h - overlay interval trees and per-page restore-source resolution.
//
// A VMA's tree is a pre-balanced B-tree of up to four half-open intervals per
// node, stored breadth-first with implicit children: the j-th child
// (0 <= j <= 4) of node i is node 5*i + j + 1 when that index exists. Child j
// holds the intervals that sort before slot j; child 4 those after slot 3.
// Unused slots (start = end = 0) only appear at the tail of the in-order
// sequence.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "jif/backing.h"
#include "jif/format.h"
#include "jif/status.h"

namespace jif {

inline constexpr size_t kTreeChildren = kNodeFanout + 1;

enum class IntervalKind : uint8_t { kPrivate, kZero };

struct Interval {
  uint64_t start = 0;
  uint64_t end = 0;
  IntervalKind kind = IntervalKind::kZero;
  uint64_t data_offset = 0;  // kPrivate only
  bool eager_writable = false;

  static Interval Private(uint64_t start, uint64_t end, uint64_t data_offset,
                          bool eager = false) {
    return {start, end, IntervalKind::kPrivate, data_offset, eager};
  }
  static Interval Zero(uint64_t start, uint64_t end) {
    return {start, end, IntervalKind::kZero, 0, false};
  }

  [[nodiscard]] bool IsPrivate() const { return kind == IntervalKind::kPrivate; }
  [[nodiscard]] uint64_t Pages() const { return PagesIn(start, end); }
  [[nodiscard]] bool Contains(uint64_t addr) const {
    return addr >= start && addr < end;
  }

  bool operator==(const Interval &) const = default;
};

IntervalSlot EncodeSlot(const Interval &ival);
Interval DecodeSlot(const IntervalSlot &slot);

using OverlayTree = std::vector<TreeNode>;

// Builds the balanced tree; input must be sorted, disjoint, non-empty and
// page aligned.
Status<OverlayTree> BuildITree(std::span<const Interval> intervals);

// Number of levels in a tree of `n_nodes` nodes.
size_t TreeHeight(size_t n_nodes);
// Upper bound on the height of a tree built from `n_intervals` intervals.
size_t TreeHeightBound(size_t n_intervals);

// Interval containing addr, or nullopt. `visits`, when given, receives the
// number of nodes inspected.
std::optional<Interval> QueryInterval(std::span<const TreeNode> tree,
                                      uint64_t addr, size_t *visits = nullptr);

// Used slots in ascending order.
std::vector<Interval> InOrder(std::span<const TreeNode> tree);

struct PrivatePage {
  uint64_t data_offset = 0;
  bool eager_writable = false;
  bool operator==(const PrivatePage &) const = default;
};
struct SharedPage {
  std::string_view path;  // view into the image's string table
  uint64_t file_offset = 0;
  bool operator==(const SharedPage &) const = default;
};
struct ZeroPage {
  bool operator==(const ZeroPage &) const = default;
};

using PageSource = std::variant<PrivatePage, SharedPage, ZeroPage>;

SegmentKind KindOf(const PageSource &src);

// Where the restore of addr is served from; kUnmapped when no VMA holds it.
Status<PageSource> ResolvePage(const JifImage &img, uint64_t addr);
// Same, for an already located VMA.
PageSource ResolveInVma(const JifImage &img, const VmaDescriptor &vma,
                        uint64_t addr);

// Reassembles the full contents of vma from its page sources. Shared reads
// past the end of the backing file yield zeros.
Status<Bytes> MaterializeVma(const JifImage &img, const VmaDescriptor &vma,
                             const BackingStore &backing);

struct OwnedInterval {
  size_t vma_index = 0;
  Interval interval;
  bool operator==(const OwnedInterval &) const = default;
};

// Calls fn for every private interval in ascending address order.
void ForEachPrivateInterval(const JifImage &img,
                            const std::function<void(const OwnedInterval &)> &fn);
std::vector<OwnedInterval> PrivateIntervals(const JifImage &img);

}  // namespace jif
