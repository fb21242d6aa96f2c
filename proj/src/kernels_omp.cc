#include <omp.h>

#include "kernels_page.h"

namespace jif::omp {

std::vector<PageClass> ClassifyPages(std::span<const std::byte> memory,
                                     const Bytes *backing,
                                     uint64_t file_offset) {
  const int64_t n = static_cast<int64_t>(memory.size() / kPageSize);
  std::vector<PageClass> out(n);
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i)
    out[i] = detail::ClassifyOne(memory.subspan(i * kPageSize, kPageSize),
                                 backing, file_offset + i * kPageSize);
  return out;
}

void MaterializePages(const JifImage &img, const VmaDescriptor &vma,
                      const Bytes *backing, std::span<std::byte> out) {
  const int64_t n = static_cast<int64_t>(vma.Pages());
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i)
    detail::MaterializeOne(img, vma, backing, vma.vbegin + i * kPageSize,
                           out.subspan(i * kPageSize, kPageSize));
}

}  // namespace jif::omp
