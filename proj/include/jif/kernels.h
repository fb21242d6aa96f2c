// kernels.h - page-parallel inner loops.
//
// Each kernel has a serial reference and an OpenMP version selected by Exec.
// Both produce identical output; the serial path is kept for tests and for
// the benchmark that compares the two.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "jif/common.h"
#include "jif/format.h"

namespace jif {

enum class Exec { kSerial, kParallel };

enum class PageClass : uint8_t {
  kShared,   // identical to the backing file page
  kZero,     // all zero and not served by the backing file
  kPrivate,  // must be stored in the snapshot
};

// Classifies each page of one VMA's memory. `backing` is the backing file
// (nullptr for anonymous memory) and file_offset the VMA's offset into it.
std::vector<PageClass> ClassifyPages(std::span<const std::byte> memory,
                                     const Bytes *backing, uint64_t file_offset,
                                     Exec exec = Exec::kParallel);

// Fills out (vma.Pages() * 4096 bytes) from the VMA's page sources.
void MaterializePages(const JifImage &img, const VmaDescriptor &vma,
                      const Bytes *backing, std::span<std::byte> out,
                      Exec exec = Exec::kParallel);

namespace serial {
std::vector<PageClass> ClassifyPages(std::span<const std::byte> memory,
                                     const Bytes *backing, uint64_t file_offset);
void MaterializePages(const JifImage &img, const VmaDescriptor &vma,
                      const Bytes *backing, std::span<std::byte> out);
}  // namespace serial

namespace omp {
std::vector<PageClass> ClassifyPages(std::span<const std::byte> memory,
                                     const Bytes *backing, uint64_t file_offset);
void MaterializePages(const JifImage &img, const VmaDescriptor &vma,
                      const Bytes *backing, std::span<std::byte> out);
}  // namespace omp

}  // namespace jif
