#include "jif/sim.h"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "jif/overlay.h"

namespace jif {

namespace {

uint64_t Ns(double seconds) { return static_cast<uint64_t>(std::llround(seconds * 1e9)); }

enum class Pte : uint8_t { kNone, kCow, kWritable };

struct PageInfo {
  SegmentKind kind = SegmentKind::kZero;
  bool eager_writable = false;
  // Identifies the delta interval (private) or page (uncached shared).
  std::pair<size_t, uint64_t> group{0, 0};
};

struct PageState {
  Pte pte = Pte::kNone;
  bool submitted = false;
  uint64_t land_ns = 0;
  bool installed = false;  // by the prefetcher
  uint64_t ready_ns = 0;
};

// Number of mappings needed when every private interval, anonymous run and
// file run is its own VMA.
uint64_t FragmentedVmaCount(const JifImage &img) {
  uint64_t count = 0;
  for (const VmaDescriptor &v : img.vmas) {
    enum { kNoneRun, kAnonRun, kFileRun } last = kNoneRun;
    uint64_t cursor = v.vbegin;
    auto gap = [&](uint64_t until) {
      if (until <= cursor) return;
      const auto cls = v.IsAnonymous() ? kAnonRun : kFileRun;
      if (cls != last) ++count;
      last = cls;
    };
    for (const Interval &iv : InOrder(img.TreeOf(v))) {
      gap(iv.start);
      if (iv.IsPrivate()) {
        ++count;
        last = kNoneRun;
      } else {
        if (last != kAnonRun) ++count;
        last = kAnonRun;
      }
      cursor = iv.end;
    }
    gap(v.vend);
  }
  return count;
}

class Engine {
 public:
  Engine(const JifImage &img, const Strategy &strat, const CostModel &cm)
      : img_(img), strat_(strat), cm_(cm), rng_(cm.rng_seed) {
    spice_ = strat.kind == StrategyKind::kSpice;
    eager_ = spice_ && strat.toggles.eager_pte;
    pool_ = spice_ && strat.toggles.page_pool;
    pool_level_ = static_cast<double>(cm.pool_size);
  }

  Status<RestoreReport> Run(const AccessTrace &trace, const std::vector<FdUse> &fd_uses) {
    report_.strategy = strat_.Name();

    Status<ProcessMeta> meta = img_.metadata.empty() ? Status<ProcessMeta>(ProcessMeta{})
                                                     : DecodeMeta(img_.metadata);
    if (!meta) return MakeError(meta);
    LazyFdTable fds(*meta);
    std::multimap<size_t, int32_t> uses;
    for (const FdUse &u : fd_uses) uses.emplace(u.index, u.fd);

    // Mapping setup.
    uint64_t n_maps = FragmentedVmaCount(img_);
    double per_map = cm_.vma_create;
    if (spice_) {
      if (strat_.toggles.overlay_vmas) n_maps = img_.vmas.size();
      if (strat_.toggles.batched_vma_create) per_map = cm_.vma_create_batched;
    }
    report_.vmas_created = n_maps;
    const uint64_t t_vma = n_maps * Ns(per_map);

    if (Status<void> s = PlanPrefetch(); !s) return MakeError(s);
    pf_ = (spice_ && strat_.toggles.batched_vma_create) ? 0 : t_vma;

    // Start of execution.
    uint64_t te = t_vma;
    if (strat_.kind == StrategyKind::kSyncPrefetch) {
      while (next_op_ < ops_.size()) StepPrefetcher();
      te = std::max({t_vma, pf_, device_free_});
    } else if (spice_ && !io_pages_.empty()) {
      const size_t k = std::min<uint64_t>(std::max<uint64_t>(cm_.initial_batch_pages, 1),
                                          io_pages_.size());
      const uint64_t gate = io_pages_[k - 1];
      while (!state_[gate].submitted) StepPrefetcher();
      te = std::max(t_vma, state_[gate].land_ns);
    }
    report_.t_first_exec_ns = te;

    size_t i = 0;
    bool fd_done = false;
    while (i < trace.size()) {
      if (!fd_done) {
        for (auto [it, end] = uses.equal_range(i); it != end; ++it) {
          if (!fds.Contains(it->second))
            return MakeError(Errc::kNoSuchFd, std::to_string(it->second));
          if (!fds.NeedsResolution(it->second)) continue;
          Status<FdResolution> r = fds.Resolve(it->second);
          if (!r) return MakeError(r);
          te += Ns(cm_.fd_resolve);
          Log(te, SimEventKind::kFdResolve, static_cast<uint64_t>(it->second));
        }
        fd_done = true;
      }
      // Let the prefetcher catch up to the execution clock first.
      if (next_op_ < ops_.size() && pf_ <= te) {
        StepPrefetcher();
        continue;
      }
      Status<bool> done = Access(trace[i], te);
      if (!done) return MakeError(done);
      if (!*done) {
        if (next_op_ >= ops_.size())
          return MakeError(Errc::kSimCrash, "waiting on a page the prefetcher never serves");
        StepPrefetcher();  // blocked on the prefetcher
        continue;
      }
      ++i;
      fd_done = false;
    }
    report_.lazy_fd_events = fds.events();
    report_.t_complete_ns = te;
    return std::move(report_);
  }

 private:
  struct Op {
    bool submit;
    size_t index;  // request index or install-list index
  };

  Status<PageInfo> Info(uint64_t page) {
    if (auto it = info_.find(page); it != info_.end()) return it->second;
    std::optional<size_t> vi = img_.FindVma(page);
    if (!vi) return MakeError(Errc::kSimCrash, "unmapped " + FormatHex(page));
    const VmaDescriptor &v = img_.vmas[*vi];
    PageInfo info;
    std::optional<Interval> iv = QueryInterval(img_.TreeOf(v), page);
    if (iv && iv->IsPrivate()) {
      info.kind = SegmentKind::kPrivate;
      info.eager_writable = iv->eager_writable;
      info.group = {*vi, iv->start};
    } else if (iv || v.IsAnonymous()) {
      info.kind = SegmentKind::kZero;
    } else {
      info.kind = SegmentKind::kShared;
      info.group = {*vi, page};
    }
    return info_[page] = info;
  }

  bool NeedsIo(const PageInfo &p) const {
    return p.kind == SegmentKind::kPrivate ||
           (p.kind == SegmentKind::kShared && !cm_.shared_cached);
  }

  Pte InstallMode(const PageInfo &p) const {
    if (p.kind == SegmentKind::kZero) return Pte::kWritable;
    if (spice_ && p.eager_writable) return Pte::kWritable;
    return Pte::kCow;
  }

  uint64_t Alloc(uint64_t t) {
    if (pool_) {
      if (t > pool_t_) {
        pool_level_ = std::min(static_cast<double>(cm_.pool_size),
                               pool_level_ + cm_.pool_refill_rate * (t - pool_t_) / 1e9);
        pool_t_ = t;
      }
      if (pool_level_ >= 1) {
        pool_level_ -= 1;
        ++report_.pool_allocs;
        return Ns(cm_.alloc_pool);
      }
    }
    ++report_.global_allocs;
    return Ns(cm_.alloc_global);
  }

  uint64_t Transfer(uint64_t pages) const {
    return static_cast<uint64_t>(
        std::llround(static_cast<double>(pages * kPageSize) * 1e9 / cm_.io_bandwidth));
  }

  void Log(uint64_t t, SimEventKind kind, uint64_t addr) {
    report_.events.push_back({t, kind, addr});
  }

  Status<void> PlanPrefetch() {
    if (strat_.kind == StrategyKind::kDemand) return {};
    const bool advisory = strat_.kind == StrategyKind::kAsyncAdvisory;
    std::unordered_set<uint64_t> seen;
    for (const OrdSegment &s : img_.ord) {
      for (uint32_t k = 0; k < s.n_pages; ++k) {
        const uint64_t page = s.vaddr + uint64_t{k} * kPageSize;
        if (!seen.insert(page).second) continue;
        Status<PageInfo> info = Info(page);
        if (!info) return MakeError(info);
        if (advisory) {
          const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
          if (!(u < cm_.advisory_honor_prob)) continue;
        }
        planned_.insert(page);
        install_list_.push_back(page);
        if (NeedsIo(*info)) io_pages_.push_back(page);
      }
    }

    // Group I/O pages into device requests.
    const bool per_interval = spice_ && !strat_.toggles.reorder_layout;
    const uint64_t batch = std::max<uint64_t>(cm_.batch_pages, 1);
    for (uint64_t page : io_pages_) {
      const PageInfo &p = info_[page];
      bool fresh = requests_.empty() || requests_.back().size() >= batch;
      if (!fresh && per_interval) fresh = info_[requests_.back().back()].group != p.group;
      if (fresh) requests_.emplace_back();
      requests_.back().push_back(page);
      request_of_[page] = requests_.size() - 1;
    }

    // Submit request k, then install what request k-1 brought in.
    size_t next = 0;
    auto install_upto = [&](size_t limit) {
      while (next < install_list_.size()) {
        auto it = request_of_.find(install_list_[next]);
        if (it != request_of_.end() && it->second >= limit) break;
        ops_.push_back({false, next++});
      }
    };
    for (size_t k = 0; k < requests_.size(); ++k) {
      ops_.push_back({true, k});
      if (eager_) install_upto(k);
    }
    if (eager_) install_upto(requests_.size());
    return {};
  }

  void StepPrefetcher() {
    const Op op = ops_[next_op_++];
    if (op.submit) {
      const std::vector<uint64_t> &req = requests_[op.index];
      for (size_t j = 0; j < req.size(); ++j) pf_ += Alloc(pf_);
      const uint64_t start = std::max(pf_, device_free_);
      const uint64_t lat = Ns(cm_.io_request_latency);
      for (size_t j = 0; j < req.size(); ++j) {
        PageState &st = state_[req[j]];
        st.submitted = true;
        st.land_ns = start + lat + Transfer(j + 1);
      }
      device_free_ = start + lat + Transfer(req.size());
      ++report_.io_requests;
      report_.bytes_read += req.size() * kPageSize;
      Log(start, SimEventKind::kIoRequest, req.front());
      return;
    }
    const uint64_t page = install_list_[op.index];
    PageState &st = state_[page];
    if (st.pte != Pte::kNone) return;
    const PageInfo &p = info_[page];
    if (NeedsIo(p)) pf_ = std::max(pf_, st.land_ns);
    if (p.kind == SegmentKind::kZero) pf_ += Alloc(pf_);
    pf_ += Ns(cm_.pte_install);
    st.pte = InstallMode(p);
    st.installed = true;
    st.ready_ns = pf_;
  }

  // Returns false when the access has to wait for the prefetcher.
  Status<bool> Access(const PageAccess &a, uint64_t &te) {
    Status<PageInfo> info = Info(a.addr);
    if (!info) return MakeError(info);
    const PageInfo &p = *info;
    PageState &st = state_[a.addr];
    const bool planned = planned_.count(a.addr) != 0;

    if (st.pte == Pte::kNone || (eager_ && planned && st.ready_ns > te)) {
      if (planned && eager_) {
        if (!st.installed) return false;
        if (st.ready_ns > te) {
          ++report_.stalls;
          Log(te, SimEventKind::kStall, a.addr);
          if (NeedsIo(p) && st.land_ns > te) {
            ++report_.major_faults;
            Log(te, SimEventKind::kMajorFault, a.addr);
          }
          te = st.ready_ns;
        }
      } else if (planned && NeedsIo(p)) {
        if (!st.submitted) return false;
        if (st.land_ns > te) {
          ++report_.stalls;
          ++report_.major_faults;
          Log(te, SimEventKind::kStall, a.addr);
          Log(te, SimEventKind::kMajorFault, a.addr);
          te = st.land_ns;
        }
        ++report_.minor_faults;
        Log(te, SimEventKind::kMinorFault, a.addr);
        te += Ns(cm_.minor_fault) + Ns(cm_.pte_install);
        st.pte = InstallMode(p);
      } else if (NeedsIo(p)) {
        ++report_.major_faults;
        Log(te, SimEventKind::kMajorFault, a.addr);
        te += Ns(cm_.major_fault_overhead);
        te += Alloc(te);
        const uint64_t start = std::max(te, device_free_);
        const uint64_t land = start + Ns(cm_.io_request_latency) + Transfer(1);
        device_free_ = land;
        ++report_.io_requests;
        report_.bytes_read += kPageSize;
        Log(start, SimEventKind::kIoRequest, a.addr);
        st.submitted = true;
        st.land_ns = land;
        te = land + Ns(cm_.pte_install);
        st.pte = InstallMode(p);
      } else {
        ++report_.minor_faults;
        Log(te, SimEventKind::kMinorFault, a.addr);
        te += Ns(cm_.minor_fault);
        if (p.kind == SegmentKind::kZero) te += Alloc(te);
        te += Ns(cm_.pte_install);
        st.pte = InstallMode(p);
      }
    }

    if (a.op == AccessOp::kWrite && st.pte == Pte::kCow) {
      ++report_.cow_faults;
      Log(te, SimEventKind::kCowFault, a.addr);
      te += Ns(cm_.cow_copy);
      te += Alloc(te);
      st.pte = Pte::kWritable;
    }
    te += Ns(cm_.per_access_compute);
    return true;
  }

  const JifImage &img_;
  Strategy strat_;
  CostModel cm_;
  std::mt19937_64 rng_;
  bool spice_ = false;
  bool eager_ = false;
  bool pool_ = false;
  double pool_level_ = 0;
  uint64_t pool_t_ = 0;

  std::unordered_map<uint64_t, PageInfo> info_;
  std::unordered_map<uint64_t, PageState> state_;
  std::unordered_set<uint64_t> planned_;
  std::vector<uint64_t> install_list_;
  std::vector<uint64_t> io_pages_;
  std::vector<std::vector<uint64_t>> requests_;
  std::unordered_map<uint64_t, size_t> request_of_;
  std::vector<Op> ops_;
  size_t next_op_ = 0;
  uint64_t pf_ = 0;
  uint64_t device_free_ = 0;
  RestoreReport report_;
};

constexpr std::pair<const char *, bool SpiceToggles::*> kToggleNames[] = {
    {"overlay_vmas", &SpiceToggles::overlay_vmas},
    {"batched_vma_create", &SpiceToggles::batched_vma_create},
    {"reorder_layout", &SpiceToggles::reorder_layout},
    {"eager_pte", &SpiceToggles::eager_pte},
    {"page_pool", &SpiceToggles::page_pool},
};

std::string FormatUs(uint64_t ns) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", static_cast<double>(ns) / 1e3);
  return buf;
}

}  // namespace

Status<void> CheckCostModel(const CostModel &cm) {
  const double nonneg[] = {cm.io_request_latency, cm.minor_fault, cm.major_fault_overhead,
                           cm.cow_copy, cm.pte_install, cm.alloc_global, cm.alloc_pool,
                           cm.per_access_compute, cm.pool_refill_rate, cm.vma_create,
                           cm.vma_create_batched, cm.fd_resolve};
  for (double v : nonneg)
    if (!(v >= 0) || !std::isfinite(v))
      return MakeError(Errc::kBadConfig, "negative or non-finite cost");
  if (!(cm.io_bandwidth > 0) || !std::isfinite(cm.io_bandwidth))
    return MakeError(Errc::kBadConfig, "io_bandwidth must be positive");
  if (cm.alloc_pool > cm.alloc_global)
    return MakeError(Errc::kBadConfig, "alloc_pool exceeds alloc_global");
  if (cm.vma_create_batched > cm.vma_create)
    return MakeError(Errc::kBadConfig, "vma_create_batched exceeds vma_create");
  if (!(cm.advisory_honor_prob >= 0 && cm.advisory_honor_prob <= 1))
    return MakeError(Errc::kBadConfig, "advisory_honor_prob outside [0,1]");
  if (cm.batch_pages == 0) return MakeError(Errc::kBadConfig, "batch_pages is 0");
  return {};
}

std::string Strategy::Name() const {
  switch (kind) {
    case StrategyKind::kDemand:
      return "demand";
    case StrategyKind::kSyncPrefetch:
      return "sync";
    case StrategyKind::kAsyncAdvisory:
      return "async";
    case StrategyKind::kSpice:
      break;
  }
  std::string out = "spice[";
  bool first = true;
  for (const auto &[name, member] : kToggleNames) {
    if (!(toggles.*member)) continue;
    if (!first) out += ',';
    out += name;
    first = false;
  }
  return out + "]";
}

Status<Strategy> ParseStrategy(std::string_view name, const SpiceToggles &toggles) {
  if (name == "demand") return Strategy::Demand();
  if (name == "sync") return Strategy::Sync();
  if (name == "async") return Strategy::Async();
  if (name == "spice") return Strategy::Spice(toggles);
  return MakeError(Errc::kBadConfig, "unknown strategy " + std::string(name));
}

std::string RestoreReport::MachineLine() const {
  std::ostringstream os;
  os << "strategy=" << strategy << " major=" << major_faults << " minor=" << minor_faults
     << " cow=" << cow_faults << " io_reqs=" << io_requests << " bytes=" << bytes_read
     << " t_first_us=" << FormatUs(t_first_exec_ns) << " t_done_us=" << FormatUs(t_complete_ns);
  return os.str();
}

Status<RestoreReport> RunRestore(const JifImage &img, const AccessTrace &trace,
                                 const Strategy &strat, const CostModel &cm,
                                 const std::vector<FdUse> &fd_uses) {
  if (Status<void> s = CheckCostModel(cm); !s) return MakeError(s);
  Engine engine(img, strat, cm);
  return engine.Run(trace, fd_uses);
}

double ComputeIdeal(uint64_t ws_bytes, const CostModel &cm, double warm_time) {
  return static_cast<double>(ws_bytes) / cm.io_bandwidth + cm.io_request_latency + warm_time;
}

std::string Comparison::Format() const {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof(line), "%-64s %8s %8s %8s %8s %12s %14s %14s\n", "strategy",
                "major", "minor", "cow", "io_reqs", "bytes", "t_first_us", "t_done_us");
  os << line;
  for (const RestoreReport &r : reports) {
    std::snprintf(line, sizeof(line),
                  "%-64s %8" PRIu64 " %8" PRIu64 " %8" PRIu64 " %8" PRIu64 " %12" PRIu64
                  " %14s %14s\n",
                  r.strategy.c_str(), r.major_faults, r.minor_faults, r.cow_faults,
                  r.io_requests, r.bytes_read, FormatUs(r.t_first_exec_ns).c_str(),
                  FormatUs(r.t_complete_ns).c_str());
    os << line;
  }
  std::snprintf(line, sizeof(line), "ideal_us=%.3f\n", ideal_seconds * 1e6);
  os << line;
  for (const RestoreReport &r : reports) os << r.MachineLine() << '\n';
  return os.str();
}

std::vector<Strategy> DefaultStrategies() {
  return {Strategy::Demand(), Strategy::Sync(), Strategy::Async(), Strategy::Spice()};
}

Status<Comparison> CompareStrategies(const JifImage &img, const AccessTrace &trace,
                                     const CostModel &cm,
                                     const std::vector<Strategy> &strategies) {
  Comparison cmp;
  for (const Strategy &s : strategies) {
    Status<RestoreReport> r = RunRestore(img, trace, s, cm);
    if (!r) return MakeError(r);
    cmp.reports.push_back(std::move(*r));
  }
  Status<StatsRecord> stats = Stats(img, &trace);
  if (!stats) return MakeError(Errc::kSimCrash, stats.error().detail());
  const double warm = static_cast<double>(trace.size()) * cm.per_access_compute;
  cmp.ideal_seconds = ComputeIdeal(stats->working_set->ws_bytes, cm, warm);
  return cmp;
}

Status<WorkingSetEstimate> EstimateWorkingSet(const std::vector<AccessTrace> &traces) {
  if (traces.empty()) return MakeError(Errc::kEmptyInput, "no traces");
  WorkingSetEstimate est;
  std::unordered_set<uint64_t> seen;
  for (size_t i = 0; i < traces.size(); ++i) {
    const size_t before = est.sequence.size();
    for (const PageAccess &a : FirstTouchSequence(traces[i]))
      if (seen.insert(a.addr).second) est.sequence.push_back(a);
    est.iterations = i + 1;
    if (i > 0 && est.sequence.size() == before) break;
  }
  return est;
}

Status<SimConfig> ParseSimConfig(std::string_view text) {
  SimConfig cfg;
  CostModel &c = cfg.cost;
  const std::map<std::string, double *, std::less<>> doubles = {
      {"io_bandwidth", &c.io_bandwidth},
      {"io_request_latency", &c.io_request_latency},
      {"minor_fault", &c.minor_fault},
      {"major_fault_overhead", &c.major_fault_overhead},
      {"cow_copy", &c.cow_copy},
      {"pte_install", &c.pte_install},
      {"alloc_global", &c.alloc_global},
      {"alloc_pool", &c.alloc_pool},
      {"per_access_compute", &c.per_access_compute},
      {"pool_refill_rate", &c.pool_refill_rate},
      {"advisory_honor_prob", &c.advisory_honor_prob},
      {"vma_create", &c.vma_create},
      {"vma_create_batched", &c.vma_create_batched},
      {"fd_resolve", &c.fd_resolve},
  };
  const std::map<std::string, uint64_t *, std::less<>> counts = {
      {"batch_pages", &c.batch_pages},
      {"initial_batch_pages", &c.initial_batch_pages},
      {"pool_size", &c.pool_size},
      {"rng_seed", &c.rng_seed},
  };
  std::map<std::string, bool *, std::less<>> flags = {{"shared_cached", &c.shared_cached}};
  for (const auto &[name, member] : kToggleNames) flags.emplace(name, &(cfg.toggles.*member));

  size_t line_no = 0;
  while (!text.empty()) {
    const size_t nl = text.find('\n');
    std::string line(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (size_t hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    auto trim = [](std::string s) {
      const char *ws = " \t\r";
      s.erase(0, s.find_first_not_of(ws));
      s.erase(s.find_last_not_of(ws) + 1);
      return s;
    };
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    const size_t eq = line.find('=');
    if (eq == std::string::npos) return MakeError(Errc::kBadConfig, where + "expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    char *end = nullptr;
    if (auto it = doubles.find(key); it != doubles.end()) {
      const double v = std::strtod(value.c_str(), &end);
      if (value.empty() || *end != '\0') return MakeError(Errc::kBadConfig, where + "bad number");
      *it->second = v;
    } else if (auto it = counts.find(key); it != counts.end()) {
      const unsigned long long v = std::strtoull(value.c_str(), &end, 0);
      if (value.empty() || value[0] == '-' || *end != '\0')
        return MakeError(Errc::kBadConfig, where + "bad count");
      *it->second = v;
    } else if (auto it = flags.find(key); it != flags.end()) {
      if (value == "1" || value == "true" || value == "on") *it->second = true;
      else if (value == "0" || value == "false" || value == "off") *it->second = false;
      else return MakeError(Errc::kBadConfig, where + "bad flag");
    } else {
      return MakeError(Errc::kBadConfig, where + "unknown key " + key);
    }
  }
  if (Status<void> s = CheckCostModel(cfg.cost); !s) return MakeError(s);
  return cfg;
}

Status<SimConfig> LoadSimConfig(const std::string &path) {
  Status<Bytes> b = ReadFile(path);
  if (!b) return MakeError(b);
  return ParseSimConfig(std::string_view(reinterpret_cast<const char *>(b->data()), b->size()));
}

}  // namespace jif
