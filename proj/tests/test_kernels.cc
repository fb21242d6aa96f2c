#include <gtest/gtest.h>

#include <omp.h>

#include "gen.h"
#include "jif/kernels.h"
#include "jif/overlay.h"

namespace jif {
namespace {

using testing::Rng;

TEST(Kernels, ClassifySerialEqualsParallel) {
  Rng rng(1);
  omp_set_num_threads(4);
  for (int round = 0; round < 30; ++round) {
    testing::GeneratedRaw g = testing::RandomRaw(rng, 6, 200);
    uint64_t off = 0;
    for (const RawVma &v : g.raw.vmas) {
      const uint64_t len = v.vend - v.vbegin;
      std::span<const std::byte> mem(g.raw.memory.data() + off, len);
      const Bytes *file = v.path ? g.backing.Find(*v.path) : nullptr;
      EXPECT_EQ(serial::ClassifyPages(mem, file, v.file_offset),
                omp::ClassifyPages(mem, file, v.file_offset));
      off += len;
    }
  }
}

TEST(Kernels, ClassifyRules) {
  Bytes file(3 * kPageSize, std::byte{5});
  Bytes mem = file;
  mem[kPageSize] = std::byte{6};                                   // differs
  std::fill(mem.begin() + 2 * kPageSize, mem.end(), std::byte{0});  // zeroed
  std::vector<PageClass> want = {PageClass::kShared, PageClass::kPrivate, PageClass::kZero};
  EXPECT_EQ(ClassifyPages(mem, &file, 0, Exec::kSerial), want);

  Bytes anon(2 * kPageSize);
  anon[kPageSize + 1] = std::byte{1};
  EXPECT_EQ(ClassifyPages(anon, nullptr, 0, Exec::kParallel),
            (std::vector<PageClass>{PageClass::kZero, PageClass::kPrivate}));

  // Zero memory over a zero (or absent) file page is simply shared.
  Bytes zfile(kPageSize);
  Bytes zmem(2 * kPageSize);
  EXPECT_EQ(ClassifyPages(zmem, &zfile, 0, Exec::kSerial),
            (std::vector<PageClass>{PageClass::kShared, PageClass::kShared}));
}

TEST(Kernels, MaterializeSerialEqualsParallel) {
  Rng rng(2);
  omp_set_num_threads(4);
  for (int round = 0; round < 30; ++round) {
    testing::GeneratedImage g = testing::RandomImage(rng);
    Bytes file(200 * kPageSize);
    for (auto &b : file) b = static_cast<std::byte>(rng());
    for (const VmaDescriptor &v : g.img.vmas) {
      const Bytes *backing = v.IsAnonymous() ? nullptr : &file;
      Bytes a(v.vend - v.vbegin), b(v.vend - v.vbegin);
      serial::MaterializePages(g.img, v, backing, a);
      omp::MaterializePages(g.img, v, backing, b);
      EXPECT_EQ(a, b);
    }
  }
}

}  // namespace
}  // namespace jif
