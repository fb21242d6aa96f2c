// meta.h - compact process metadata, lazy file-descriptor resolution and the
// syscall-replay cost model it is compared against.
//
// Blob layout: u32 record count, then records of
//   u8 tag | u32 payload length | payload
// in a fixed class order (cwd, env, threads, fds, signal handlers, timers).
// Empty collections contribute no records.

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "jif/common.h"
#include "jif/status.h"

namespace jif {

struct ThreadRecord {
  uint32_t tid = 0;
  Bytes regs;  // opaque register file
  uint64_t sp = 0;
  bool operator==(const ThreadRecord &) const = default;
};

struct FdRecord {
  int32_t fd_num = 0;
  std::string path;
  uint64_t offset = 0;
  uint32_t flags = 0;
  bool lazy = false;
  bool operator==(const FdRecord &) const = default;
};

struct SigHandler {
  uint8_t signo = 0;  // 1..64
  uint64_t handler = 0;
  uint64_t mask = 0;
  uint32_t flags = 0;
  bool operator==(const SigHandler &) const = default;
};

struct TimerRecord {
  uint32_t id = 0;
  uint64_t interval_ns = 0;
  uint64_t remaining_ns = 0;
  bool operator==(const TimerRecord &) const = default;
};

struct ProcessMeta {
  std::vector<ThreadRecord> threads;
  std::vector<FdRecord> fds;
  std::vector<SigHandler> sighandlers;
  std::vector<TimerRecord> timers;
  std::string cwd;
  std::vector<std::string> env;  // "KEY=value"

  bool operator==(const ProcessMeta &) const = default;
};

enum class MetaTag : uint8_t {
  kCwd = 1,
  kEnv = 2,
  kThread = 3,
  kFd = 4,
  kSigHandler = 5,
  kTimer = 6,
};

Status<void> CheckMeta(const ProcessMeta &meta);

Status<Bytes> EncodeMeta(const ProcessMeta &meta);
Status<ProcessMeta> DecodeMeta(std::span<const std::byte> blob);

// Text dump, one record per line, tab separated:
//   cwd <path> | env <KEY=value> | thread <tid> <sp> <regs hex>
//   fd <num> <path> <offset> <flags> <lazy> | sig <signo> <handler> <mask> <flags>
//   timer <id> <interval_ns> <remaining_ns>
std::string DumpMetaTsv(const ProcessMeta &meta);
Status<ProcessMeta> ParseMetaTsv(std::string_view text);

struct FdResolution {
  int32_t fd_num = 0;
  std::string path;
  bool operator==(const FdResolution &) const = default;
};

// Per-restore table of descriptors. Lazy descriptors are resolved on first
// use; every other descriptor counts as resolved at restore.
class LazyFdTable {
 public:
  explicit LazyFdTable(const ProcessMeta &meta);

  [[nodiscard]] bool Contains(int32_t fd) const;
  [[nodiscard]] bool NeedsResolution(int32_t fd) const;
  // Marks fd resolved and returns the single resolution event of its
  // lifetime; kAlreadyResolved on any later call.
  Status<FdResolution> Resolve(int32_t fd);
  [[nodiscard]] size_t events() const { return events_; }

 private:
  struct Entry {
    std::string path;
    bool resolved;
  };
  std::map<int32_t, Entry> fds_;
  size_t events_ = 0;
};

struct ReplayCoefficients {
  uint64_t per_fd = 4;        // open, lseek, dup, fcntl
  uint64_t per_vma = 1;       // mmap
  uint64_t per_thread = 2;    // clone, set registers
  uint64_t per_sighandler = 1;  // rt_sigaction
  uint64_t per_timer = 2;     // timer_create, timer_settime
};

// Modeled syscall count of replay-based restore.
uint64_t ReplayCostEstimate(const ProcessMeta &meta, uint64_t n_vma_mappings,
                            const ReplayCoefficients &coef = {});
// A batched restore is one operation regardless of what it restores.
constexpr uint64_t BatchedRestoreCost() { return 1; }

}  // namespace jif
