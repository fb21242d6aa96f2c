#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "jif/status.h"

namespace jif {

static_assert(std::endian::native == std::endian::little,
              "jif tables are mapped in place and require a little-endian host");

inline constexpr uint64_t kPageSize = 4096;
inline constexpr uint64_t kPageShift = 12;

using Bytes = std::vector<std::byte>;

constexpr bool IsPageAligned(uint64_t v) { return (v & (kPageSize - 1)) == 0; }
constexpr uint64_t PageFloor(uint64_t v) { return v & ~(kPageSize - 1); }
constexpr uint64_t PageCeil(uint64_t v) {
  return (v + kPageSize - 1) & ~(kPageSize - 1);
}
constexpr uint64_t PagesIn(uint64_t begin, uint64_t end) {
  return (end - begin) >> kPageShift;
}

// Memory protection bits as stored in VMA descriptors.
enum Prot : uint8_t {
  kProtRead = 1,
  kProtWrite = 2,
  kProtExec = 4,
};

std::string FormatHex(uint64_t v);

bool IsAllZero(std::span<const std::byte> bytes);

Status<Bytes> ReadFile(const std::string &path);
Status<void> WriteFile(const std::string &path, std::span<const std::byte> bytes);

}  // namespace jif
