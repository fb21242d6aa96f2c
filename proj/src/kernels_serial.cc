#include "kernels_page.h"

namespace jif {

namespace serial {

std::vector<PageClass> ClassifyPages(std::span<const std::byte> memory,
                                     const Bytes *backing,
                                     uint64_t file_offset) {
  const size_t n = memory.size() / kPageSize;
  std::vector<PageClass> out(n);
  for (size_t i = 0; i < n; ++i)
    out[i] = detail::ClassifyOne(memory.subspan(i * kPageSize, kPageSize),
                                 backing, file_offset + i * kPageSize);
  return out;
}

void MaterializePages(const JifImage &img, const VmaDescriptor &vma,
                      const Bytes *backing, std::span<std::byte> out) {
  const size_t n = vma.Pages();
  for (size_t i = 0; i < n; ++i)
    detail::MaterializeOne(img, vma, backing, vma.vbegin + i * kPageSize,
                           out.subspan(i * kPageSize, kPageSize));
}

}  // namespace serial

std::vector<PageClass> ClassifyPages(std::span<const std::byte> memory,
                                     const Bytes *backing, uint64_t file_offset,
                                     Exec exec) {
  if (exec == Exec::kSerial)
    return serial::ClassifyPages(memory, backing, file_offset);
  return omp::ClassifyPages(memory, backing, file_offset);
}

void MaterializePages(const JifImage &img, const VmaDescriptor &vma,
                      const Bytes *backing, std::span<std::byte> out,
                      Exec exec) {
  if (exec == Exec::kSerial)
    return serial::MaterializePages(img, vma, backing, out);
  omp::MaterializePages(img, vma, backing, out);
}

}  // namespace jif
