#include "jif/overlay.h"

#include <algorithm>

#include "jif/kernels.h"
#include "tree_walk.h"

namespace jif {

namespace {

void FillInOrder(OverlayTree &tree, std::span<const Interval> intervals,
                 size_t &next, size_t node) {
  if (node >= tree.size()) return;
  for (size_t j = 0; j < kNodeFanout; ++j) {
    FillInOrder(tree, intervals, next, detail::ChildIndex(node, j));
    if (next < intervals.size()) tree[node].slots[j] = EncodeSlot(intervals[next++]);
  }
  FillInOrder(tree, intervals, next, detail::ChildIndex(node, kNodeFanout));
}

}  // namespace

IntervalSlot EncodeSlot(const Interval &ival) {
  IntervalSlot s{ival.start, ival.end, kZeroOffset};
  if (ival.IsPrivate())
    s.off = IntervalSlot::EncodeOffset(ival.data_offset, ival.eager_writable);
  return s;
}

Interval DecodeSlot(const IntervalSlot &slot) {
  if (slot.IsZero()) return Interval::Zero(slot.start, slot.end);
  return Interval::Private(slot.start, slot.end, slot.DataOffset(),
                           slot.EagerWritable());
}

Status<OverlayTree> BuildITree(std::span<const Interval> intervals) {
  for (size_t i = 0; i < intervals.size(); ++i) {
    const Interval &iv = intervals[i];
    if (iv.start >= iv.end || !IsPageAligned(iv.start) || !IsPageAligned(iv.end))
      return MakeError(Errc::kInvariantViolation,
                       "bad interval [" + FormatHex(iv.start) + ", " +
                           FormatHex(iv.end) + ")");
    if (iv.IsPrivate() && !IsPageAligned(iv.data_offset))
      return MakeError(Errc::kInvariantViolation, "misaligned data offset");
    if (i == 0) continue;
    if (iv.start < intervals[i - 1].start)
      return MakeError(Errc::kUnsortedInput, "at index " + std::to_string(i));
    if (iv.start < intervals[i - 1].end)
      return MakeError(Errc::kOverlappingIntervals,
                       "at index " + std::to_string(i));
  }

  OverlayTree tree((intervals.size() + kNodeFanout - 1) / kNodeFanout);
  size_t next = 0;
  FillInOrder(tree, intervals, next, 0);
  return tree;
}

size_t TreeHeight(size_t n_nodes) {
  size_t height = 0, covered = 0, level = 1;
  while (covered < n_nodes) {
    covered += level;
    level *= kTreeChildren;
    ++height;
  }
  return height;
}

size_t TreeHeightBound(size_t n_intervals) {
  // ceil(log5(n/4 + 1)) + 1, in integers: smallest k with 4 * 5^k >= n + 4.
  size_t k = 0;
  uint64_t pow = 1;
  while (kNodeFanout * pow < n_intervals + kNodeFanout) {
    pow *= kTreeChildren;
    ++k;
  }
  return k + 1;
}

std::optional<Interval> QueryInterval(std::span<const TreeNode> tree,
                                      uint64_t addr, size_t *visits) {
  size_t node = 0, seen = 0;
  std::optional<Interval> hit;
  while (node < tree.size() && !hit) {
    ++seen;
    size_t j = 0;
    for (; j < kNodeFanout; ++j) {
      const IntervalSlot &s = tree[node].slots[j];
      if (!s.IsUsed() || addr < s.start) break;
      if (addr < s.end) {
        hit = DecodeSlot(s);
        break;
      }
    }
    node = detail::ChildIndex(node, j);
  }
  if (visits) *visits = seen;
  return hit;
}

std::vector<Interval> InOrder(std::span<const TreeNode> tree) {
  std::vector<Interval> out;
  detail::WalkSlots(tree, [&](const IntervalSlot &s) {
    if (s.IsUsed()) out.push_back(DecodeSlot(s));
  });
  return out;
}

SegmentKind KindOf(const PageSource &src) {
  if (std::holds_alternative<PrivatePage>(src)) return SegmentKind::kPrivate;
  if (std::holds_alternative<SharedPage>(src)) return SegmentKind::kShared;
  return SegmentKind::kZero;
}

PageSource ResolveInVma(const JifImage &img, const VmaDescriptor &vma,
                        uint64_t addr) {
  if (std::optional<Interval> iv = QueryInterval(img.TreeOf(vma), addr)) {
    if (iv->IsPrivate())
      return PrivatePage{iv->data_offset + (addr - iv->start), iv->eager_writable};
    return ZeroPage{};
  }
  if (!vma.IsAnonymous())
    return SharedPage{img.PathOf(vma), vma.ref_file_offset + (addr - vma.vbegin)};
  return ZeroPage{};
}

Status<PageSource> ResolvePage(const JifImage &img, uint64_t addr) {
  std::optional<size_t> vi = img.FindVma(addr);
  if (!vi) return MakeError(Errc::kUnmapped, FormatHex(addr));
  return ResolveInVma(img, img.vmas[*vi], addr);
}

Status<Bytes> MaterializeVma(const JifImage &img, const VmaDescriptor &vma,
                             const BackingStore &backing) {
  const Bytes *file = nullptr;
  if (!vma.IsAnonymous()) {
    file = backing.Find(img.PathOf(vma));
    // A fully overlaid VMA never reads its backing file.
    if (!file) {
      std::vector<Interval> ivs = InOrder(img.TreeOf(vma));
      uint64_t covered = 0;
      for (const Interval &iv : ivs) covered += iv.end - iv.start;
      if (covered != vma.vend - vma.vbegin)
        return MakeError(Errc::kMissingBackingFile, std::string(img.PathOf(vma)));
    }
  }
  Bytes out(vma.vend - vma.vbegin);
  MaterializePages(img, vma, file, out);
  return out;
}

void ForEachPrivateInterval(
    const JifImage &img, const std::function<void(const OwnedInterval &)> &fn) {
  for (size_t i = 0; i < img.vmas.size(); ++i) {
    detail::WalkSlots(img.TreeOf(img.vmas[i]), [&](const IntervalSlot &s) {
      if (s.IsUsed() && !s.IsZero()) fn(OwnedInterval{i, DecodeSlot(s)});
    });
  }
}

std::vector<OwnedInterval> PrivateIntervals(const JifImage &img) {
  std::vector<OwnedInterval> out;
  ForEachPrivateInterval(img, [&](const OwnedInterval &o) { out.push_back(o); });
  return out;
}

}  // namespace jif
