#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "gen.h"
#include "jif/builder.h"
#include "jif/sim.h"

namespace jif {
namespace {

using testing::Rng;

// Image whose ord segments are exactly the trace's first touches.
struct Pair {
  testing::GeneratedImage g;
  AccessTrace trace;
};

Pair RandomPair(Rng &rng, size_t accesses = 400) {
  Pair p;
  testing::ImageGenOptions opts;
  opts.max_pages = 2048;
  opts.with_ord = false;
  p.g = testing::RandomImage(rng, opts);
  p.trace = testing::RandomTrace(rng, p.g.model, accesses);
  p.g.img = *ReorderByTrace(p.g.img, p.trace);
  return p;
}

TEST(Sim, EmptyTraceOnEmptyImage) {
  RestoreReport r = *RunRestore(JifImage{}, {}, Strategy::Demand(), {});
  EXPECT_EQ(r.major_faults + r.minor_faults + r.cow_faults + r.io_requests, 0u);
  EXPECT_EQ(r.t_complete_ns, 0u);
}

TEST(Sim, EmptyTraceCountsNothing) {
  Rng rng(1);
  testing::GeneratedImage g = testing::RandomImage(rng);
  RestoreReport r = *RunRestore(g.img, {}, Strategy::Demand(), {});
  EXPECT_EQ(r.major_faults + r.minor_faults + r.cow_faults + r.io_requests, 0u);
  EXPECT_EQ(r.t_complete_ns, r.t_first_exec_ns);
}

TEST(Sim, DemandMatchesOracle) {
  Rng rng(2);
  CostModel cm;
  for (int i = 0; i < 100; ++i) {
    Pair p = RandomPair(rng);
    RestoreReport r = *RunRestore(p.g.img, p.trace, Strategy::Demand(), cm);
    testing::DemandExpectation e = testing::DemandReplay(p.g.model, p.trace, cm);
    EXPECT_EQ(r.major_faults, e.major);
    EXPECT_EQ(r.minor_faults, e.minor);
    EXPECT_EQ(r.cow_faults, e.cow);
    EXPECT_EQ(r.io_requests, e.major);
    EXPECT_EQ(r.bytes_read, e.major * kPageSize);
    EXPECT_EQ(r.t_complete_ns - r.t_first_exec_ns, e.duration_ns);
  }
}

TEST(Sim, SpiceEliminatesMinorAndEagerCow) {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    Pair p = RandomPair(rng);
    RestoreReport spice = *RunRestore(p.g.img, p.trace, Strategy::Spice(), {});
    RestoreReport demand = *RunRestore(p.g.img, p.trace, Strategy::Demand(), {});
    EXPECT_EQ(spice.minor_faults, 0u);

    std::set<uint64_t> seen, eager_written, cow_written;
    for (const PageAccess &a : p.trace) {
      const testing::PageTruth &t = *p.g.model.Find(a.addr);
      if (a.op != AccessOp::kWrite || t.kind == SegmentKind::kZero) continue;
      (t.kind == SegmentKind::kPrivate && t.eager ? eager_written : cow_written).insert(a.addr);
    }
    EXPECT_EQ(spice.cow_faults, cow_written.size());
    EXPECT_EQ(demand.cow_faults, cow_written.size() + eager_written.size());
  }
}

TEST(Sim, BatchedRequestsWithReorder) {
  Rng rng(4);
  for (uint64_t batch : {1, 7, 64, 256}) {
    Pair p = RandomPair(rng, 800);
    CostModel cm;
    cm.batch_pages = batch;
    uint64_t traced_private = 0;
    for (uint64_t a : FirstTouchPages(p.trace))
      traced_private += p.g.model.Find(a)->kind == SegmentKind::kPrivate;
    RestoreReport r = *RunRestore(p.g.img, p.trace, Strategy::Spice(), cm);
    EXPECT_EQ(r.io_requests, (traced_private + batch - 1) / batch);
    EXPECT_EQ(r.bytes_read, traced_private * kPageSize);
  }
}

TEST(Sim, ReorderOffIssuesOneRequestPerInterval) {
  testing::AblationFixture fx = testing::MakeAblationFixture(600, 2);
  SpiceToggles off;
  off.reorder_layout = false;
  RestoreReport on = *RunRestore(fx.img, fx.trace, Strategy::Spice(), {});
  RestoreReport r = *RunRestore(fx.img, fx.trace, Strategy::Spice(off), {});
  EXPECT_EQ(on.io_requests, (fx.traced_private_pages + 255) / 256);
  EXPECT_EQ(r.io_requests, fx.delta_intervals);
}

TEST(Sim, PacedPrefetchHasNoFaults) {
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    Pair p = RandomPair(rng);
    for (PageAccess &a : p.trace) a.op = AccessOp::kRead;
    CostModel cm;
    cm.per_access_compute = 0.05;  // every batch lands long before its first use
    RestoreReport r = *RunRestore(p.g.img, p.trace, Strategy::Spice(), cm);
    EXPECT_EQ(r.major_faults + r.minor_faults + r.cow_faults, 0u);
    // Only the very first access can wait, for the PTE of the gating page.
    EXPECT_LE(r.stalls, 1u);
  }
}

TEST(Sim, PoolAccounting) {
  Rng rng(6);
  for (uint64_t pool : {0, 5, 50, 100000}) {
    Pair p = RandomPair(rng);
    CostModel cm;
    cm.pool_size = pool;
    RestoreReport r = *RunRestore(p.g.img, p.trace, Strategy::Spice(), cm);
    const uint64_t total = r.pool_allocs + r.global_allocs;
    EXPECT_EQ(r.global_allocs, total > pool ? total - pool : 0);
  }
}

TEST(Sim, OverlapBound) {
  Rng rng(7);
  for (int i = 0; i < 30; ++i) {
    Pair p = RandomPair(rng, 1500);
    CostModel cm;
    cm.initial_batch_pages = 8;
    RestoreReport spice = *RunRestore(p.g.img, p.trace, Strategy::Spice(), cm);
    RestoreReport sync = *RunRestore(p.g.img, p.trace, Strategy::Sync(), cm);
    EXPECT_LE(spice.t_first_exec_ns, sync.t_first_exec_ns);
  }
}

TEST(Sim, SyncStillTakesMinorFaults) {
  Rng rng(8);
  Pair p = RandomPair(rng);
  RestoreReport r = *RunRestore(p.g.img, p.trace, Strategy::Sync(), {});
  EXPECT_EQ(r.major_faults, 0u);
  EXPECT_EQ(r.minor_faults, FirstTouchPages(p.trace).size());
}

TEST(Sim, AsyncHonorsAdvice) {
  Rng rng(9);
  Pair p = RandomPair(rng, 1000);
  CostModel all, none;
  all.advisory_honor_prob = 1;
  none.advisory_honor_prob = 0;
  RestoreReport a = *RunRestore(p.g.img, p.trace, Strategy::Async(), all);
  RestoreReport n = *RunRestore(p.g.img, p.trace, Strategy::Async(), none);
  RestoreReport d = *RunRestore(p.g.img, p.trace, Strategy::Demand(), none);
  EXPECT_EQ(n.major_faults, d.major_faults);
  EXPECT_EQ(n.t_complete_ns, d.t_complete_ns);
  uint64_t traced_private = 0;
  for (uint64_t page : FirstTouchPages(p.trace))
    traced_private += p.g.model.Find(page)->kind == SegmentKind::kPrivate;
  EXPECT_EQ(n.io_requests, traced_private);
  if (traced_private > 1) {
    EXPECT_LT(a.io_requests, n.io_requests);
  }
}

TEST(Sim, Deterministic) {
  Rng rng(10);
  Pair p = RandomPair(rng);
  for (Strategy s : DefaultStrategies()) {
    RestoreReport a = *RunRestore(p.g.img, p.trace, s, {});
    RestoreReport b = *RunRestore(p.g.img, p.trace, s, {});
    EXPECT_EQ(a, b);
    EXPECT_LE(a.t_first_exec_ns, a.t_complete_ns);
  }
}

TEST(Sim, UnmappedIsCrash) {
  Rng rng(11);
  Pair p = RandomPair(rng);
  AccessTrace t = {{AccessOp::kRead, 0x1000}};
  EXPECT_EQ(RunRestore(p.g.img, t, Strategy::Demand(), {}).error().code(), Errc::kSimCrash);
}

TEST(Sim, LazyFdEvents) {
  Rng rng(12);
  Pair p = RandomPair(rng);
  ProcessMeta m;
  m.fds = {{0, "/dev/null", 0, 0, false}, {3, "/a", 0, 0, true}, {4, "/b", 0, 0, true},
           {7, "/c", 0, 0, true}};
  p.g.img.metadata = *EncodeMeta(m);
  SealHeader(p.g.img);
  std::vector<FdUse> uses = {{0, 0}, {1, 3}, {5, 3}, {9, 4}, {9, 3}};
  RestoreReport r = *RunRestore(p.g.img, p.trace, Strategy::Demand(), {}, uses);
  EXPECT_EQ(r.lazy_fd_events, 2u);
  std::vector<FdUse> bad = {{0, 99}};
  EXPECT_EQ(RunRestore(p.g.img, p.trace, Strategy::Demand(), {}, bad).error().code(),
            Errc::kNoSuchFd);
}

TEST(Sim, MachineLineFormat) {
  RestoreReport r;
  r.strategy = "demand";
  r.major_faults = 3;
  r.t_first_exec_ns = 1500;
  r.t_complete_ns = 2'000'250;
  EXPECT_EQ(r.MachineLine(),
            "strategy=demand major=3 minor=0 cow=0 io_reqs=0 bytes=0 t_first_us=1.500 "
            "t_done_us=2000.250");
  EXPECT_EQ(Strategy::Spice(SpiceToggles::None()).Name(), "spice[]");
}

TEST(Ideal, ReferenceRows) {
  CostModel cm;
  cm.io_bandwidth = 13600e6;
  // Java image row: 63.4 MB working set, 255,713 us warm run.
  EXPECT_NEAR(ComputeIdeal(63'400'000, cm, 255'713e-6), 260.4e-3, 260.4e-3 * 0.01);
  // hello row: 1.3 MB, 77 us warm run.
  EXPECT_NEAR(ComputeIdeal(1'300'000, cm, 77e-6) - cm.io_request_latency, 172.6e-6, 0.1e-6);
  EXPECT_DOUBLE_EQ(ComputeIdeal(0, cm, 0), cm.io_request_latency);
}

TEST(Compare, SingleStrategy) {
  Rng rng(13);
  Pair p = RandomPair(rng);
  Comparison c = *CompareStrategies(p.g.img, p.trace, {}, {Strategy::Demand()});
  EXPECT_EQ(c.reports.size(), 1u);
  EXPECT_GT(c.ideal_seconds, 0);
}

TEST(Compare, SpiceBeatsDemand) {
  testing::AblationFixture fx = testing::MakeAblationFixture(400, 2);
  Comparison c = *CompareStrategies(fx.img, fx.trace, {}, DefaultStrategies());
  EXPECT_LE(c.reports[3].t_complete_ns, c.reports[0].t_complete_ns);
}

TEST(WorkingSet, Estimate) {
  AccessTrace a = {{AccessOp::kRead, 0x1000}, {AccessOp::kRead, 0x2000},
                   {AccessOp::kRead, 0x1000}};
  AccessTrace b = {{AccessOp::kRead, 0x3000}, {AccessOp::kRead, 0x2000}};
  WorkingSetEstimate one = *EstimateWorkingSet({a});
  EXPECT_EQ(one.sequence, FirstTouchSequence(a));
  EXPECT_EQ(one.iterations, 1u);
  WorkingSetEstimate same = *EstimateWorkingSet({a, a, b});
  EXPECT_EQ(same.iterations, 2u);
  EXPECT_EQ(same.sequence, FirstTouchSequence(a));
  WorkingSetEstimate grow = *EstimateWorkingSet({a, b});
  EXPECT_EQ(FirstTouchPages(grow.sequence), (std::vector<uint64_t>{0x1000, 0x2000, 0x3000}));
  EXPECT_EQ(EstimateWorkingSet({}).error().code(), Errc::kEmptyInput);
}

TEST(WorkingSet, UnionOfRandomTraces) {
  Rng rng(14);
  for (int i = 0; i < 30; ++i) {
    std::vector<AccessTrace> traces(1 + rng() % 5);
    std::set<uint64_t> all;
    for (AccessTrace &t : traces)
      for (int k = 0; k < 50; ++k) {
        t.push_back({AccessOp::kRead, (rng() % 100) * kPageSize});
      }
    WorkingSetEstimate est = *EstimateWorkingSet(traces);
    for (size_t k = 0; k < est.iterations; ++k)
      for (const PageAccess &a : traces[k]) all.insert(a.addr);
    std::vector<uint64_t> got = FirstTouchPages(est.sequence);
    EXPECT_EQ(std::set<uint64_t>(got.begin(), got.end()), all);
    EXPECT_EQ(got.size(), all.size());
  }
}

TEST(Config, Parse) {
  SimConfig c = *ParseSimConfig("# tuned\nbatch_pages = 128\nio_bandwidth=1e9\neager_pte=0\n");
  EXPECT_EQ(c.cost.batch_pages, 128u);
  EXPECT_EQ(c.cost.io_bandwidth, 1e9);
  EXPECT_FALSE(c.toggles.eager_pte);
  EXPECT_EQ(ParseSimConfig("bogus=1").error().code(), Errc::kBadConfig);
  EXPECT_EQ(ParseSimConfig("alloc_pool=5").error().code(), Errc::kBadConfig);
  EXPECT_EQ(ParseSimConfig("advisory_honor_prob=1.5").error().code(), Errc::kBadConfig);
  EXPECT_EQ(ParseSimConfig("minor_fault=-1").error().code(), Errc::kBadConfig);
}

}  // namespace
}  // namespace jif
