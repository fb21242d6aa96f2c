// Per-page bodies shared by the serial and OpenMP kernels.

#pragma once

#include <cstring>
#include <variant>

#include "jif/backing.h"
#include "jif/kernels.h"
#include "jif/overlay.h"

namespace jif::detail {

inline PageClass ClassifyOne(std::span<const std::byte> page,
                             const Bytes *backing, uint64_t file_offset) {
  const bool zero = IsAllZero(page);
  if (backing == nullptr) return zero ? PageClass::kZero : PageClass::kPrivate;

  std::byte ref[kPageSize];
  ReadBackingPage(*backing, file_offset, ref);
  if (std::memcmp(ref, page.data(), kPageSize) == 0) return PageClass::kShared;
  return zero ? PageClass::kZero : PageClass::kPrivate;
}

inline void MaterializeOne(const JifImage &img, const VmaDescriptor &vma,
                           const Bytes *backing, uint64_t addr,
                           std::span<std::byte> out) {
  PageSource src = ResolveInVma(img, vma, addr);
  if (auto *p = std::get_if<PrivatePage>(&src)) {
    std::memcpy(out.data(), img.data.data() + p->data_offset, kPageSize);
  } else if (auto *s = std::get_if<SharedPage>(&src); s && backing) {
    ReadBackingPage(*backing, s->file_offset, out);
  } else {
    std::memset(out.data(), 0, kPageSize);
  }
}

}  // namespace jif::detail
