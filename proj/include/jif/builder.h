// builder.h - turns a raw memory dump into a lean, reorder-optimized JIF.
//
// Pipeline (BuildJif): lazy-free -> stack trim -> diff against backing files
// -> write-set classification -> data layout + trees -> metadata -> optional
// trace reordering -> canonicalization.

#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "jif/backing.h"
#include "jif/format.h"
#include "jif/kernels.h"
#include "jif/meta.h"
#include "jif/overlay.h"
#include "jif/status.h"
#include "jif/trace.h"

namespace jif {

struct RawVma {
  uint64_t vbegin = 0;
  uint64_t vend = 0;
  uint8_t prot = 0;
  std::optional<std::string> path;  // nullopt: anonymous
  uint64_t file_offset = 0;

  [[nodiscard]] uint64_t Pages() const { return PagesIn(vbegin, vend); }
  bool operator==(const RawVma &) const = default;
};

struct ThreadStack {
  size_t vma = 0;  // index into RawSnapshot::vmas
  uint64_t sp = 0;
  bool operator==(const ThreadStack &) const = default;
};

struct PageRange {
  uint64_t begin = 0;
  uint64_t end = 0;
  bool operator==(const PageRange &) const = default;
};

// A full-memory checkpoint: VMA map plus the concatenated VMA contents in
// table order.
struct RawSnapshot {
  std::vector<RawVma> vmas;
  Bytes memory;
  std::vector<ThreadStack> stacks;
  std::vector<PageRange> lazy_free;

  // Byte offset of vma i's contents in `memory`.
  [[nodiscard]] uint64_t MemoryOffset(size_t vma) const;
  [[nodiscard]] std::optional<size_t> FindVma(uint64_t addr) const;

  bool operator==(const RawSnapshot &) const = default;
};

Status<void> CheckRawSnapshot(const RawSnapshot &raw);

struct WriteSet {
  std::set<uint64_t> pages;
  uint32_t runs_observed = 0;
};

inline constexpr uint64_t kDefaultRedzone = 128;

// Per-VMA intervals (same order as raw.vmas). Private intervals carry the
// byte offset of their first page within raw.memory as data_offset.
using VmaIntervals = std::vector<std::vector<Interval>>;

Status<VmaIntervals> DiffAgainstBacking(const RawSnapshot &raw,
                                        const BackingStore &backing,
                                        Exec exec = Exec::kParallel);

// Zero-fills every page of raw.lazy_free (the MADV_FREE -> MADV_DONTNEED
// translation) and clears the list.
Status<RawSnapshot> ApplyLazyFree(RawSnapshot raw);

// Zero-fills, per thread, the stack pages wholly below page_floor(sp -
// redzone); stacks grow downward.
Status<RawSnapshot> TrimStack(RawSnapshot raw, uint64_t redzone = kDefaultRedzone);

// Splits private intervals at write-set boundaries and flags written pages
// eager-writable.
VmaIntervals ClassifyWriteSets(const WriteSet &ws, const VmaIntervals &intervals);

// Assembles an image: data laid out in ascending address order, one tree per
// VMA, deduplicated paths.
Status<JifImage> AssembleImage(const RawSnapshot &raw, const VmaIntervals &intervals,
                               Bytes metadata);

// Moves the private pages first touched by the trace to the front of the data
// section in first-access order and records the access order as ord segments.
Status<JifImage> ReorderByTrace(const JifImage &img, const AccessTrace &trace);

struct BuildOptions {
  uint64_t redzone = kDefaultRedzone;
  Exec exec = Exec::kParallel;
};

Status<JifImage> BuildJif(const RawSnapshot &raw, const BackingStore &backing,
                          const WriteSet &ws, const AccessTrace *trace,
                          const ProcessMeta &meta, const BuildOptions &opts = {});

// Interchange directory: vmas.tsv, mem.bin, optional stacks.tsv,
// lazyfree.tsv and meta.tsv; backing files live under <dir>/backing/.
Status<RawSnapshot> LoadRawSnapshot(const std::string &dir);
Status<void> SaveRawSnapshot(const RawSnapshot &raw, const std::string &dir);
Status<WriteSet> LoadWriteSet(const std::string &path);

}  // namespace jif
