// sim.h - deterministic restore simulator.
//
// Replays an access trace against a JifImage under one restore strategy and
// accounts faults, I/O, allocations and modeled time. Time is kept in integer
// nanoseconds. Two actors share one FIFO I/O device: the execution timeline
// and, for the prefetching strategies, a background prefetcher.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "jif/format.h"
#include "jif/meta.h"
#include "jif/status.h"
#include "jif/trace.h"

namespace jif {

// Latencies are in seconds. All defaults are tunable placeholders except the
// bandwidth.
struct CostModel {
  double io_bandwidth = 13.6e9;  // bytes/s
  double io_request_latency = 80e-6;
  double minor_fault = 1e-6;
  double major_fault_overhead = 5e-6;
  double cow_copy = 2e-6;
  double pte_install = 0.3e-6;
  double alloc_global = 1e-6;
  double alloc_pool = 0.05e-6;
  double per_access_compute = 0.2e-6;
  uint64_t batch_pages = 256;
  uint64_t initial_batch_pages = 64;
  uint64_t pool_size = 16384;      // pages
  double pool_refill_rate = 0;     // pages/s
  double advisory_honor_prob = 0.8;
  uint64_t rng_seed = 42;
  // Mapping setup: one mmap per VMA, or a batched kernel call.
  double vma_create = 2e-6;
  double vma_create_batched = 0.2e-6;
  double fd_resolve = 5e-6;
  // Backing files of shared pages sit in the page cache.
  bool shared_cached = true;
};

Status<void> CheckCostModel(const CostModel &cm);

enum class StrategyKind { kDemand, kSyncPrefetch, kAsyncAdvisory, kSpice };

struct SpiceToggles {
  bool overlay_vmas = true;
  bool batched_vma_create = true;
  bool reorder_layout = true;
  bool eager_pte = true;
  bool page_pool = true;

  static SpiceToggles None() { return {false, false, false, false, false}; }
  bool operator==(const SpiceToggles &) const = default;
};

struct Strategy {
  StrategyKind kind = StrategyKind::kDemand;
  SpiceToggles toggles;  // SPICE only

  static Strategy Demand() { return {StrategyKind::kDemand, {}}; }
  static Strategy Sync() { return {StrategyKind::kSyncPrefetch, {}}; }
  static Strategy Async() { return {StrategyKind::kAsyncAdvisory, {}}; }
  static Strategy Spice(SpiceToggles t = {}) { return {StrategyKind::kSpice, t}; }

  // demand | sync | async | spice[overlay_vmas,reorder_layout,...]
  [[nodiscard]] std::string Name() const;
};

Status<Strategy> ParseStrategy(std::string_view name, const SpiceToggles &toggles);

enum class SimEventKind : uint8_t {
  kMajorFault,
  kMinorFault,
  kCowFault,
  kStall,
  kIoRequest,
  kFdResolve,
};

struct SimEvent {
  uint64_t t_ns = 0;
  SimEventKind kind = SimEventKind::kMajorFault;
  uint64_t addr = 0;  // page, first page of a request, or fd number
  bool operator==(const SimEvent &) const = default;
};

struct RestoreReport {
  std::string strategy;
  uint64_t major_faults = 0;
  uint64_t minor_faults = 0;
  uint64_t cow_faults = 0;
  uint64_t stalls = 0;
  uint64_t io_requests = 0;
  uint64_t bytes_read = 0;
  uint64_t pool_allocs = 0;
  uint64_t global_allocs = 0;
  uint64_t vmas_created = 0;
  uint64_t lazy_fd_events = 0;
  uint64_t t_first_exec_ns = 0;
  uint64_t t_complete_ns = 0;
  std::vector<SimEvent> events;

  // strategy=.. major=.. minor=.. cow=.. io_reqs=.. bytes=.. t_first_us=..
  // t_done_us=..
  [[nodiscard]] std::string MachineLine() const;
  bool operator==(const RestoreReport &) const = default;
};

// Lazy descriptors touched by the execution: before trace access `index`,
// the program uses descriptor `fd`.
struct FdUse {
  size_t index = 0;
  int32_t fd = 0;
};

Status<RestoreReport> RunRestore(const JifImage &img, const AccessTrace &trace,
                                 const Strategy &strat, const CostModel &cm,
                                 const std::vector<FdUse> &fd_uses = {});

// Working-set read time plus warm execution, with no overlap. Seconds.
double ComputeIdeal(uint64_t ws_bytes, const CostModel &cm, double warm_time);

struct Comparison {
  std::vector<RestoreReport> reports;
  double ideal_seconds = 0;

  // Human table followed by one machine line per report.
  [[nodiscard]] std::string Format() const;
};

// Default strategy set: demand, sync, async, spice with every toggle on.
std::vector<Strategy> DefaultStrategies();

// Warm time is modeled as trace length x per_access_compute.
Status<Comparison> CompareStrategies(const JifImage &img, const AccessTrace &trace,
                                     const CostModel &cm,
                                     const std::vector<Strategy> &strategies);

struct WorkingSetEstimate {
  AccessTrace sequence;   // first-touch ordered union
  size_t iterations = 0;  // traces consumed until two unions matched
};

Status<WorkingSetEstimate> EstimateWorkingSet(const std::vector<AccessTrace> &traces);

// Flat key=value text: CostModel field names plus the SPICE toggle names.
// Blank lines and `#` comments are ignored; unknown keys are kBadConfig.
struct SimConfig {
  CostModel cost;
  SpiceToggles toggles;
};
Status<SimConfig> ParseSimConfig(std::string_view text);
Status<SimConfig> LoadSimConfig(const std::string &path);

}  // namespace jif
