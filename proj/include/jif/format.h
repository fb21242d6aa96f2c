// format.h - the JIF snapshot container.
//
// On-disk layout (all integers little-endian, tables packed back to back):
//
//   header (48 B) | VMA table (40 B each) | tree-node array (96 B each)
//   | ord-segment array (16 B each) | string table | metadata blob
//   | zero padding up to data_offset | data section (whole pages)
//
// The table structs below are the exact on-disk records; parsing copies the
// serialized arrays straight into them.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "jif/common.h"
#include "jif/status.h"
#include "jif/trace.h"

namespace jif {

inline constexpr std::array<uint8_t, 4> kJifMagic = {0x77, 'J', 'I', 'F'};
inline constexpr uint16_t kJifVersion = 1;
inline constexpr uint32_t kAnonymousPath = 0xFFFF'FFFF;
inline constexpr uint64_t kZeroOffset = ~uint64_t{0};
inline constexpr size_t kNodeFanout = 4;  // interval slots per tree node

struct JifHeader {
  std::array<uint8_t, 4> magic = kJifMagic;
  uint16_t version = kJifVersion;
  uint16_t flags = 0;
  uint32_t n_vmas = 0;
  uint32_t n_itree_nodes = 0;
  uint32_t n_ord_segments = 0;
  uint32_t strings_size = 0;
  uint64_t metadata_size = 0;
  uint64_t data_offset = 0;
  uint32_t table_checksum = 0;
  uint32_t reserved = 0;

  bool operator==(const JifHeader &) const = default;
};
static_assert(sizeof(JifHeader) == 48);

enum VmaFlags : uint8_t {
  kVmaEagerWritablePresent = 1,
};

struct VmaDescriptor {
  uint64_t vbegin = 0;
  uint64_t vend = 0;
  uint64_t ref_file_offset = 0;
  uint32_t ref_path = kAnonymousPath;
  uint32_t itree_first = 0;
  uint32_t itree_count = 0;
  uint8_t prot = 0;
  uint8_t vflags = 0;
  uint16_t reserved = 0;

  [[nodiscard]] bool IsAnonymous() const { return ref_path == kAnonymousPath; }
  [[nodiscard]] bool Contains(uint64_t addr) const {
    return addr >= vbegin && addr < vend;
  }
  [[nodiscard]] uint64_t Pages() const { return PagesIn(vbegin, vend); }

  bool operator==(const VmaDescriptor &) const = default;
};
static_assert(sizeof(VmaDescriptor) == 40);

// One stored interval slot. `off` is kZeroOffset for zero-filled intervals;
// otherwise it holds (data offset >> 12) << 1 with bit 0 = EAGER_WRITABLE.
struct IntervalSlot {
  uint64_t start = 0;
  uint64_t end = 0;
  uint64_t off = 0;

  [[nodiscard]] bool IsUsed() const { return start != 0 || end != 0; }
  [[nodiscard]] bool IsZero() const { return off == kZeroOffset; }
  [[nodiscard]] uint64_t DataOffset() const { return (off >> 1) << kPageShift; }
  [[nodiscard]] bool EagerWritable() const { return !IsZero() && (off & 1); }

  static constexpr uint64_t EncodeOffset(uint64_t data_offset, bool eager) {
    return ((data_offset >> kPageShift) << 1) | (eager ? 1 : 0);
  }

  bool operator==(const IntervalSlot &) const = default;
};

struct TreeNode {
  std::array<IntervalSlot, kNodeFanout> slots{};

  bool operator==(const TreeNode &) const = default;
};
static_assert(sizeof(TreeNode) == 96);

enum class SegmentKind : uint8_t { kPrivate = 0, kShared = 1, kZero = 2 };

struct OrdSegment {
  uint64_t vaddr = 0;
  uint32_t n_pages = 0;
  SegmentKind kind = SegmentKind::kPrivate;
  std::array<uint8_t, 3> reserved{};

  bool operator==(const OrdSegment &) const = default;
};
static_assert(sizeof(OrdSegment) == 16);

// In-memory model of a complete container. Header fields that are derived
// from the tables (counts, sizes, data_offset, checksum) are refreshed by
// SealHeader() and by WriteJif().
struct JifImage {
  JifHeader header;
  std::vector<VmaDescriptor> vmas;
  std::vector<TreeNode> nodes;
  std::vector<OrdSegment> ord;
  std::vector<char> strings;
  Bytes metadata;
  Bytes data;

  [[nodiscard]] std::span<const TreeNode> TreeOf(const VmaDescriptor &vma) const;
  [[nodiscard]] std::string_view PathOf(const VmaDescriptor &vma) const;
  // Index of the VMA containing addr.
  [[nodiscard]] std::optional<size_t> FindVma(uint64_t addr) const;

  bool operator==(const JifImage &) const = default;
};

// Byte size of header + tables + strings + metadata.
uint64_t TablesEnd(const JifImage &img);
uint32_t ComputeTableChecksum(const JifImage &img);
// Recomputes every derived header field for the canonical encoding.
void SealHeader(JifImage &img);

struct Finding {
  std::string code;
  std::string detail;

  bool operator==(const Finding &) const = default;
};

// Every invariant violation in img; empty means valid.
std::vector<Finding> Validate(const JifImage &img);

// Decodes the container framing without running Validate(). Checks magic,
// sizes and (optionally) the table checksum.
Status<JifImage> DecodeJif(std::span<const std::byte> bytes,
                           bool verify_checksum = true);
// DecodeJif + Validate; any finding becomes kTableInvariantViolation.
Status<JifImage> ParseJif(std::span<const std::byte> bytes);
Status<Bytes> WriteJif(const JifImage &img);

// Sorts VMAs, rebuilds balanced trees, merges adjacent compatible intervals,
// compacts the data section (keeping the relative page order) and
// deduplicates the string table.
Status<JifImage> Canonicalize(const JifImage &img);

struct StatsCounts {
  uint64_t vmas = 0;
  uint64_t intervals = 0;
  uint64_t private_pages = 0;
  uint64_t shared_pages = 0;
  uint64_t zero_pages = 0;
  uint64_t ws_bytes = 0;

  bool operator==(const StatsCounts &) const = default;
};

struct StatsRecord {
  StatsCounts total;
  std::optional<StatsCounts> working_set;

  // `vmas=.. intervals=.. private=.. shared=.. zero=.. ws_bytes=..`, followed
  // by the same keys prefixed with `ws.` when a working set was supplied.
  [[nodiscard]] std::string ToLine() const;
};

Status<StatsRecord> Stats(const JifImage &img,
                          const AccessTrace *ws = nullptr);

}  // namespace jif
