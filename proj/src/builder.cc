#include "jif/builder.h"

#include <algorithm>
#include <cstring>
#include <map>
#include <numeric>
#include <unordered_map>

namespace jif {

namespace {

bool Mergeable(const Interval &a, const Interval &b) {
  if (a.end != b.start || a.kind != b.kind) return false;
  if (!a.IsPrivate()) return true;
  return a.eager_writable == b.eager_writable &&
         a.data_offset + (a.end - a.start) == b.data_offset;
}

void PushMerged(std::vector<Interval> &out, const Interval &iv) {
  if (!out.empty() && Mergeable(out.back(), iv))
    out.back().end = iv.end;
  else
    out.push_back(iv);
}

std::vector<size_t> SortedVmaOrder(const RawSnapshot &raw) {
  std::vector<size_t> order(raw.vmas.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return raw.vmas[a].vbegin < raw.vmas[b].vbegin;
  });
  return order;
}

std::span<std::byte> VmaBytes(RawSnapshot &raw, size_t vi) {
  const RawVma &v = raw.vmas[vi];
  return {raw.memory.data() + raw.MemoryOffset(vi), v.vend - v.vbegin};
}

}  // namespace

uint64_t RawSnapshot::MemoryOffset(size_t vma) const {
  uint64_t off = 0;
  for (size_t i = 0; i < vma; ++i) off += vmas[i].vend - vmas[i].vbegin;
  return off;
}

std::optional<size_t> RawSnapshot::FindVma(uint64_t addr) const {
  for (size_t i = 0; i < vmas.size(); ++i)
    if (addr >= vmas[i].vbegin && addr < vmas[i].vend) return i;
  return std::nullopt;
}

Status<void> CheckRawSnapshot(const RawSnapshot &raw) {
  uint64_t total = 0;
  for (size_t i = 0; i < raw.vmas.size(); ++i) {
    const RawVma &v = raw.vmas[i];
    const std::string where = "vma " + std::to_string(i);
    if (v.vbegin >= v.vend || !IsPageAligned(v.vbegin) || !IsPageAligned(v.vend))
      return MakeError(Errc::kInvariantViolation, where + ": bad bounds");
    if (v.path && !IsPageAligned(v.file_offset))
      return MakeError(Errc::kInvariantViolation, where + ": unaligned file offset");
    if (v.prot & ~(kProtRead | kProtWrite | kProtExec))
      return MakeError(Errc::kInvariantViolation, where + ": bad prot");
    total += v.vend - v.vbegin;
  }
  std::vector<size_t> order = SortedVmaOrder(raw);
  for (size_t k = 1; k < order.size(); ++k)
    if (raw.vmas[order[k]].vbegin < raw.vmas[order[k - 1]].vend)
      return MakeError(Errc::kInvariantViolation, "overlapping vmas");
  if (raw.memory.size() != total)
    return MakeError(Errc::kInvariantViolation,
                     "memory is " + std::to_string(raw.memory.size()) +
                         " bytes, vmas span " + std::to_string(total));
  for (const ThreadStack &s : raw.stacks) {
    if (s.vma >= raw.vmas.size() || s.sp < raw.vmas[s.vma].vbegin ||
        s.sp > raw.vmas[s.vma].vend)
      return MakeError(Errc::kStackPointerOutsideVma, FormatHex(s.sp));
  }
  for (const PageRange &r : raw.lazy_free) {
    std::optional<size_t> vi = raw.FindVma(r.begin);
    if (r.begin >= r.end || !IsPageAligned(r.begin) || !IsPageAligned(r.end) ||
        !vi || r.end > raw.vmas[*vi].vend)
      return MakeError(Errc::kRangeOutsideVma,
                       FormatHex(r.begin) + "-" + FormatHex(r.end));
  }
  return {};
}

Status<VmaIntervals> DiffAgainstBacking(const RawSnapshot &raw,
                                        const BackingStore &backing, Exec exec) {
  VmaIntervals out(raw.vmas.size());
  uint64_t mem_off = 0;
  for (size_t i = 0; i < raw.vmas.size(); ++i) {
    const RawVma &v = raw.vmas[i];
    const uint64_t len = v.vend - v.vbegin;
    const Bytes *file = nullptr;
    if (v.path) {
      file = backing.Find(*v.path);
      if (!file) return MakeError(Errc::kMissingBackingFile, *v.path);
    }
    std::span<const std::byte> mem(raw.memory.data() + mem_off, len);
    std::vector<PageClass> classes = ClassifyPages(mem, file, v.file_offset, exec);

    std::vector<Interval> &ivs = out[i];
    for (size_t p = 0; p < classes.size(); ++p) {
      const uint64_t addr = v.vbegin + p * kPageSize;
      switch (classes[p]) {
        case PageClass::kShared:
          break;
        case PageClass::kZero:
          PushMerged(ivs, Interval::Zero(addr, addr + kPageSize));
          break;
        case PageClass::kPrivate:
          PushMerged(ivs, Interval::Private(addr, addr + kPageSize,
                                            mem_off + p * kPageSize));
          break;
      }
    }
    mem_off += len;
  }
  return out;
}

Status<RawSnapshot> ApplyLazyFree(RawSnapshot raw) {
  for (const PageRange &r : raw.lazy_free) {
    std::optional<size_t> vi = raw.FindVma(r.begin);
    if (r.begin > r.end || !IsPageAligned(r.begin) || !IsPageAligned(r.end) ||
        !vi || r.end > raw.vmas[*vi].vend)
      return MakeError(Errc::kRangeOutsideVma,
                       FormatHex(r.begin) + "-" + FormatHex(r.end));
    std::span<std::byte> mem = VmaBytes(raw, *vi);
    const uint64_t from = r.begin - raw.vmas[*vi].vbegin;
    std::memset(mem.data() + from, 0, r.end - r.begin);
  }
  raw.lazy_free.clear();
  return raw;
}

Status<RawSnapshot> TrimStack(RawSnapshot raw, uint64_t redzone) {
  for (const ThreadStack &s : raw.stacks) {
    if (s.vma >= raw.vmas.size())
      return MakeError(Errc::kStackPointerOutsideVma,
                       "no vma " + std::to_string(s.vma));
    const RawVma &v = raw.vmas[s.vma];
    if (s.sp < v.vbegin || s.sp > v.vend)
      return MakeError(Errc::kStackPointerOutsideVma, FormatHex(s.sp));
    // Everything below the page holding sp - redzone is dead stack.
    const uint64_t live = s.sp - v.vbegin < redzone ? v.vbegin
                                                    : PageFloor(s.sp - redzone);
    if (live <= v.vbegin) continue;
    std::span<std::byte> mem = VmaBytes(raw, s.vma);
    std::memset(mem.data(), 0, live - v.vbegin);
  }
  return raw;
}

VmaIntervals ClassifyWriteSets(const WriteSet &ws, const VmaIntervals &intervals) {
  VmaIntervals out(intervals.size());
  for (size_t i = 0; i < intervals.size(); ++i) {
    for (const Interval &iv : intervals[i]) {
      if (!iv.IsPrivate()) {
        out[i].push_back(iv);
        continue;
      }
      // Split at every change of write-set membership.
      auto written = [&](uint64_t addr) { return ws.pages.count(addr) != 0; };
      uint64_t run = iv.start;
      bool flag = written(run);
      for (uint64_t a = iv.start + kPageSize; a <= iv.end; a += kPageSize) {
        if (a < iv.end && written(a) == flag) continue;
        out[i].push_back(Interval::Private(
            run, a, iv.data_offset + (run - iv.start), flag));
        if (a < iv.end) {
          run = a;
          flag = written(a);
        }
      }
    }
  }
  return out;
}

Status<JifImage> AssembleImage(const RawSnapshot &raw, const VmaIntervals &intervals,
                               Bytes metadata) {
  if (intervals.size() != raw.vmas.size())
    return MakeError(Errc::kInvariantViolation, "interval lists do not match vmas");

  JifImage img;
  img.metadata = std::move(metadata);
  std::map<std::string, uint32_t, std::less<>> paths;

  for (size_t i : SortedVmaOrder(raw)) {
    const RawVma &rv = raw.vmas[i];
    VmaDescriptor v;
    v.vbegin = rv.vbegin;
    v.vend = rv.vend;
    v.prot = rv.prot;
    if (rv.path) {
      auto it = paths.find(*rv.path);
      if (it == paths.end()) {
        const auto off = static_cast<uint32_t>(img.strings.size());
        img.strings.insert(img.strings.end(), rv.path->begin(), rv.path->end());
        img.strings.push_back('\0');
        it = paths.emplace(*rv.path, off).first;
      }
      v.ref_path = it->second;
      v.ref_file_offset = rv.file_offset;
    }

    std::vector<Interval> ivs = intervals[i];
    for (Interval &iv : ivs) {
      if (!iv.IsPrivate()) continue;
      const uint64_t len = iv.end - iv.start;
      if (iv.data_offset + len > raw.memory.size())
        return MakeError(Errc::kInvariantViolation, "interval data out of range");
      const uint64_t dst = img.data.size();
      img.data.insert(img.data.end(), raw.memory.begin() + iv.data_offset,
                      raw.memory.begin() + iv.data_offset + len);
      iv.data_offset = dst;
      if (iv.eager_writable) v.vflags |= kVmaEagerWritablePresent;
    }
    Status<OverlayTree> tree = BuildITree(ivs);
    if (!tree) return MakeError(tree);
    v.itree_first = static_cast<uint32_t>(img.nodes.size());
    v.itree_count = static_cast<uint32_t>(tree->size());
    img.nodes.insert(img.nodes.end(), tree->begin(), tree->end());
    img.vmas.push_back(v);
  }
  SealHeader(img);
  return img;
}

Status<JifImage> ReorderByTrace(const JifImage &img, const AccessTrace &trace) {
  struct Located {
    size_t vma;
    uint64_t addr;
    SegmentKind kind;
  };
  std::vector<Located> touched;
  for (uint64_t page : FirstTouchPages(trace)) {
    std::optional<size_t> vi = img.FindVma(page);
    if (!vi) return MakeError(Errc::kTraceOutOfRange, FormatHex(page));
    touched.push_back(
        {*vi, page, KindOf(ResolveInVma(img, img.vmas[*vi], page))});
  }

  // Old data offset of every private page, by address.
  std::unordered_map<uint64_t, std::pair<size_t, Interval>> private_pages;
  std::vector<std::pair<uint64_t, uint64_t>> by_offset;  // (old offset, addr)
  ForEachPrivateInterval(img, [&](const OwnedInterval &o) {
    for (uint64_t a = o.interval.start; a < o.interval.end; a += kPageSize) {
      const uint64_t off = o.interval.data_offset + (a - o.interval.start);
      private_pages[a] = {o.vma_index,
                          Interval::Private(a, a + kPageSize, off,
                                            o.interval.eager_writable)};
      by_offset.emplace_back(off, a);
    }
  });
  std::sort(by_offset.begin(), by_offset.end());

  // New layout: traced private pages in first-touch order, then the rest in
  // their previous order.
  std::vector<uint64_t> layout;
  std::unordered_map<uint64_t, bool> placed;
  for (const Located &l : touched) {
    if (l.kind != SegmentKind::kPrivate) continue;
    layout.push_back(l.addr);
    placed[l.addr] = true;
  }
  for (const auto &[off, addr] : by_offset)
    if (!placed.count(addr)) layout.push_back(addr);

  JifImage out = img;
  out.data.assign(layout.size() * kPageSize, std::byte{0});
  std::vector<std::vector<Interval>> per_vma(img.vmas.size());
  for (size_t k = 0; k < layout.size(); ++k) {
    auto &[vi, iv] = private_pages.at(layout[k]);
    std::memcpy(out.data.data() + k * kPageSize, img.data.data() + iv.data_offset,
                kPageSize);
    per_vma[vi].push_back(
        Interval::Private(iv.start, iv.end, k * kPageSize, iv.eager_writable));
  }

  out.nodes.clear();
  for (size_t i = 0; i < img.vmas.size(); ++i) {
    std::vector<Interval> ivs = std::move(per_vma[i]);
    for (const Interval &iv : InOrder(img.TreeOf(img.vmas[i])))
      if (!iv.IsPrivate()) ivs.push_back(iv);
    std::sort(ivs.begin(), ivs.end(),
              [](const Interval &a, const Interval &b) { return a.start < b.start; });
    std::vector<Interval> merged;
    for (const Interval &iv : ivs) PushMerged(merged, iv);
    Status<OverlayTree> tree = BuildITree(merged);
    if (!tree) return MakeError(tree);
    VmaDescriptor &v = out.vmas[i];
    v.itree_first = static_cast<uint32_t>(out.nodes.size());
    v.itree_count = static_cast<uint32_t>(tree->size());
    out.nodes.insert(out.nodes.end(), tree->begin(), tree->end());
  }

  // Access order as runs of address-contiguous same-kind pages.
  out.ord.clear();
  for (size_t k = 0; k < touched.size(); ++k) {
    const Located &l = touched[k];
    if (!out.ord.empty() && k > 0 && touched[k - 1].vma == l.vma) {
      OrdSegment &s = out.ord.back();
      if (s.kind == l.kind && s.vaddr + uint64_t{s.n_pages} * kPageSize == l.addr) {
        ++s.n_pages;
        continue;
      }
    }
    out.ord.push_back(OrdSegment{l.addr, 1, l.kind, {}});
  }

  return Canonicalize(out);
}

Status<JifImage> BuildJif(const RawSnapshot &raw, const BackingStore &backing,
                          const WriteSet &ws, const AccessTrace *trace,
                          const ProcessMeta &meta, const BuildOptions &opts) {
  if (Status<void> s = CheckRawSnapshot(raw); !s) return MakeError(s);
  Status<RawSnapshot> freed = ApplyLazyFree(raw);
  if (!freed) return MakeError(freed);
  Status<RawSnapshot> trimmed = TrimStack(std::move(*freed), opts.redzone);
  if (!trimmed) return MakeError(trimmed);
  Status<VmaIntervals> diff = DiffAgainstBacking(*trimmed, backing, opts.exec);
  if (!diff) return MakeError(diff);
  VmaIntervals classified = ClassifyWriteSets(ws, *diff);
  Status<Bytes> blob = EncodeMeta(meta);
  if (!blob) return MakeError(blob);
  Status<JifImage> img = AssembleImage(*trimmed, classified, std::move(*blob));
  if (!img) return MakeError(img);
  if (trace) {
    Status<JifImage> reordered = ReorderByTrace(*img, *trace);
    if (!reordered) return MakeError(reordered);
    img = std::move(reordered);
  }
  Status<JifImage> canon = Canonicalize(*img);
  if (!canon) return MakeError(canon);
  if (std::vector<Finding> f = Validate(*canon); !f.empty())
    return MakeError(Errc::kInvariantViolation, f.front().code + " (" + f.front().detail + ")");
  return canon;
}

}  // namespace jif
