// Serial vs OpenMP page kernels on a synthetic file-backed VMA.
//
//   jif_bench --benchmark_filter=Classify

#include <benchmark/benchmark.h>

#include <map>
#include <random>

#include "jif/builder.h"
#include "jif/kernels.h"

namespace {

using namespace jif;

constexpr uint64_t kBase = 0x7f0000000000;
const char *const kPath = "/bench/file.bin";

struct Fixture {
  Bytes file;
  Bytes memory;
  MemoryBackingStore backing;
  JifImage img;
};

// Every fourth page modified, every sixteenth zeroed.
const Fixture &Get(uint64_t pages) {
  static std::map<uint64_t, Fixture> cache;
  auto [it, fresh] = cache.try_emplace(pages);
  Fixture &f = it->second;
  if (!fresh) return f;
  std::mt19937_64 rng(pages);
  f.file.resize(pages * kPageSize);
  for (auto &b : f.file) b = static_cast<std::byte>(rng());
  f.memory = f.file;
  for (uint64_t p = 0; p < pages; ++p) {
    std::byte *page = f.memory.data() + p * kPageSize;
    if (p % 16 == 0) std::fill(page, page + kPageSize, std::byte{0});
    else if (p % 4 == 0) page[rng() % kPageSize] ^= std::byte{1};
  }
  f.backing.Add(kPath, f.file);
  RawSnapshot raw;
  raw.vmas.push_back({kBase, kBase + pages * kPageSize, kProtRead | kProtWrite, kPath, 0});
  raw.memory = f.memory;
  f.img = *BuildJif(raw, f.backing, {}, nullptr, {});
  return f;
}

template <Exec E>
void BM_Classify(benchmark::State &state) {
  const Fixture &f = Get(state.range(0));
  for (auto _ : state) {
    auto classes = ClassifyPages(f.memory, &f.file, 0, E);
    benchmark::DoNotOptimize(classes.data());
  }
  state.SetBytesProcessed(state.iterations() * f.memory.size());
}

template <Exec E>
void BM_Materialize(benchmark::State &state) {
  const Fixture &f = Get(state.range(0));
  Bytes out(f.memory.size());
  for (auto _ : state) {
    MaterializePages(f.img, f.img.vmas[0], &f.file, out, E);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetBytesProcessed(state.iterations() * out.size());
}

BENCHMARK(BM_Classify<Exec::kSerial>)->Arg(1 << 12)->Arg(1 << 14);
BENCHMARK(BM_Classify<Exec::kParallel>)->Arg(1 << 12)->Arg(1 << 14);
BENCHMARK(BM_Materialize<Exec::kSerial>)->Arg(1 << 12)->Arg(1 << 14);
BENCHMARK(BM_Materialize<Exec::kParallel>)->Arg(1 << 12)->Arg(1 << 14);

}  // namespace

BENCHMARK_MAIN();
