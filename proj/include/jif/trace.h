// trace.h - page-granular access traces.
//
// Binary form: 9-byte little-endian records, op byte ('R' 0x52 / 'W' 0x57)
// followed by a 64-bit page-aligned virtual address. Text form: one
// `R 0x7f0000001000` per line; blank lines and `#` comments are ignored.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "jif/common.h"
#include "jif/status.h"

namespace jif {

enum class AccessOp : uint8_t { kRead = 'R', kWrite = 'W' };

struct PageAccess {
  AccessOp op = AccessOp::kRead;
  uint64_t addr = 0;

  bool operator==(const PageAccess &) const = default;
};

using AccessTrace = std::vector<PageAccess>;

inline constexpr size_t kTraceRecordSize = 9;

// Accepts either encoding; the text form is recognised by a whitespace
// second byte (a binary record's second byte is the low address byte, which
// is always zero for page-aligned addresses).
Status<AccessTrace> DecodeTrace(std::span<const std::byte> bytes);
Status<AccessTrace> LoadTrace(const std::string &path);

Bytes EncodeTraceBinary(const AccessTrace &trace);
std::string EncodeTraceText(const AccessTrace &trace);

// Distinct pages in order of first access.
std::vector<uint64_t> FirstTouchPages(const AccessTrace &trace);
// Same, keeping the op of the first access.
AccessTrace FirstTouchSequence(const AccessTrace &trace);

}  // namespace jif
