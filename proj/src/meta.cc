#include "jif/meta.h"

#include <charconv>
#include <cstring>
#include <set>
#include <sstream>

namespace jif {

namespace {

class BlobWriter {
 public:
  template <typename T>
  void Put(T v) {
    auto b = std::as_bytes(std::span(&v, 1));
    buf_.insert(buf_.end(), b.begin(), b.end());
  }
  void PutBytes(std::span<const std::byte> b) {
    buf_.insert(buf_.end(), b.begin(), b.end());
  }
  void PutString(std::string_view s) { PutBytes(std::as_bytes(std::span(s))); }
  Bytes Take() { return std::move(buf_); }
  [[nodiscard]] size_t size() const { return buf_.size(); }

 private:
  Bytes buf_;
};

class BlobReader {
 public:
  explicit BlobReader(std::span<const std::byte> b) : b_(b) {}

  template <typename T>
  bool Get(T &v) {
    if (b_.size() < sizeof(T)) return false;
    std::memcpy(&v, b_.data(), sizeof(T));
    b_ = b_.subspan(sizeof(T));
    return true;
  }
  std::span<const std::byte> Rest() {
    auto r = b_;
    b_ = {};
    return r;
  }
  std::span<const std::byte> Take(size_t n) {
    auto r = b_.first(n);
    b_ = b_.subspan(n);
    return r;
  }
  [[nodiscard]] size_t remaining() const { return b_.size(); }

 private:
  std::span<const std::byte> b_;
};

std::string ToString(std::span<const std::byte> b) {
  return std::string(reinterpret_cast<const char *>(b.data()), b.size());
}

std::string Escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      default: out += c;
    }
  }
  return out;
}

std::string Unescape(std::string_view s) {
  std::string out;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out += s[i];
      continue;
    }
    char n = s[++i];
    out += n == 't' ? '\t' : n == 'n' ? '\n' : n;
  }
  return out;
}

std::string HexBytes(std::span<const std::byte> b) {
  if (b.empty()) return "-";
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  for (std::byte x : b) {
    out += kDigits[static_cast<uint8_t>(x) >> 4];
    out += kDigits[static_cast<uint8_t>(x) & 0xF];
  }
  return out;
}

template <typename T>
bool ParseNum(std::string_view s, T &out) {
  int base = 10;
  if (s.starts_with("0x")) {
    s.remove_prefix(2);
    base = 16;
  }
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out, base);
  return ec == std::errc() && p == s.data() + s.size() && !s.empty();
}

bool ParseHexBytes(std::string_view s, Bytes &out) {
  out.clear();
  if (s == "-") return true;
  if (s.size() % 2) return false;
  for (size_t i = 0; i < s.size(); i += 2) {
    uint8_t v;
    auto [p, ec] = std::from_chars(s.data() + i, s.data() + i + 2, v, 16);
    if (ec != std::errc() || p != s.data() + i + 2) return false;
    out.push_back(static_cast<std::byte>(v));
  }
  return true;
}

std::vector<std::string_view> SplitTabs(std::string_view line) {
  std::vector<std::string_view> out;
  size_t pos = 0;
  while (true) {
    size_t tab = line.find('\t', pos);
    out.push_back(line.substr(pos, tab - pos));
    if (tab == std::string_view::npos) break;
    pos = tab + 1;
  }
  return out;
}

}  // namespace

Status<void> CheckMeta(const ProcessMeta &meta) {
  std::set<uint32_t> tids;
  for (const ThreadRecord &t : meta.threads)
    if (!tids.insert(t.tid).second)
      return MakeError(Errc::kInvariantViolation,
                       "duplicate tid " + std::to_string(t.tid));
  std::set<int32_t> fds;
  for (const FdRecord &f : meta.fds)
    if (f.fd_num < 0 || !fds.insert(f.fd_num).second)
      return MakeError(Errc::kInvariantViolation,
                       "bad or duplicate fd " + std::to_string(f.fd_num));
  for (const SigHandler &s : meta.sighandlers)
    if (s.signo < 1 || s.signo > 64)
      return MakeError(Errc::kInvariantViolation,
                       "signo " + std::to_string(s.signo) + " out of range");
  return {};
}

Status<Bytes> EncodeMeta(const ProcessMeta &meta) {
  if (Status<void> ok = CheckMeta(meta); !ok) return MakeError(ok);

  BlobWriter body;
  uint32_t count = 0;
  auto record = [&](MetaTag tag, BlobWriter payload) {
    body.Put(static_cast<uint8_t>(tag));
    body.Put(static_cast<uint32_t>(payload.size()));
    body.PutBytes(payload.Take());
    ++count;
  };

  if (!meta.cwd.empty()) {
    BlobWriter p;
    p.PutString(meta.cwd);
    record(MetaTag::kCwd, std::move(p));
  }
  for (const std::string &e : meta.env) {
    BlobWriter p;
    p.PutString(e);
    record(MetaTag::kEnv, std::move(p));
  }
  for (const ThreadRecord &t : meta.threads) {
    BlobWriter p;
    p.Put(t.tid);
    p.Put(t.sp);
    p.PutBytes(t.regs);
    record(MetaTag::kThread, std::move(p));
  }
  for (const FdRecord &f : meta.fds) {
    BlobWriter p;
    p.Put(f.fd_num);
    p.Put(f.offset);
    p.Put(f.flags);
    p.Put(static_cast<uint8_t>(f.lazy));
    p.PutString(f.path);
    record(MetaTag::kFd, std::move(p));
  }
  for (const SigHandler &s : meta.sighandlers) {
    BlobWriter p;
    p.Put(s.signo);
    p.Put(s.handler);
    p.Put(s.mask);
    p.Put(s.flags);
    record(MetaTag::kSigHandler, std::move(p));
  }
  for (const TimerRecord &t : meta.timers) {
    BlobWriter p;
    p.Put(t.id);
    p.Put(t.interval_ns);
    p.Put(t.remaining_ns);
    record(MetaTag::kTimer, std::move(p));
  }

  BlobWriter out;
  out.Put(count);
  out.PutBytes(body.Take());
  return out.Take();
}

Status<ProcessMeta> DecodeMeta(std::span<const std::byte> blob) {
  BlobReader r(blob);
  uint32_t count;
  if (!r.Get(count)) return MakeError(Errc::kTruncatedRecord, "record count");

  ProcessMeta meta;
  bool have_cwd = false;
  for (uint32_t i = 0; i < count; ++i) {
    const std::string idx = "record " + std::to_string(i);
    uint8_t tag;
    uint32_t len;
    if (!r.Get(tag) || !r.Get(len) || r.remaining() < len)
      return MakeError(Errc::kTruncatedRecord, idx);
    BlobReader p(r.Take(len));
    auto truncated = [&] { return MakeError(Errc::kTruncatedRecord, idx); };
    auto oversized = [&] {
      return MakeError(Errc::kInvariantViolation, idx + ": trailing payload bytes");
    };

    switch (static_cast<MetaTag>(tag)) {
      case MetaTag::kCwd:
        if (have_cwd) return MakeError(Errc::kInvariantViolation, idx + ": second cwd");
        have_cwd = true;
        meta.cwd = ToString(p.Rest());
        break;
      case MetaTag::kEnv:
        meta.env.push_back(ToString(p.Rest()));
        break;
      case MetaTag::kThread: {
        ThreadRecord t;
        if (!p.Get(t.tid) || !p.Get(t.sp)) return truncated();
        auto regs = p.Rest();
        t.regs.assign(regs.begin(), regs.end());
        meta.threads.push_back(std::move(t));
        break;
      }
      case MetaTag::kFd: {
        FdRecord f;
        uint8_t lazy;
        if (!p.Get(f.fd_num) || !p.Get(f.offset) || !p.Get(f.flags) ||
            !p.Get(lazy))
          return truncated();
        if (lazy > 1) return MakeError(Errc::kInvariantViolation, idx + ": lazy flag");
        f.lazy = lazy;
        f.path = ToString(p.Rest());
        meta.fds.push_back(std::move(f));
        break;
      }
      case MetaTag::kSigHandler: {
        SigHandler s;
        if (!p.Get(s.signo) || !p.Get(s.handler) || !p.Get(s.mask) ||
            !p.Get(s.flags))
          return truncated();
        if (p.remaining()) return oversized();
        meta.sighandlers.push_back(s);
        break;
      }
      case MetaTag::kTimer: {
        TimerRecord t;
        if (!p.Get(t.id) || !p.Get(t.interval_ns) || !p.Get(t.remaining_ns))
          return truncated();
        if (p.remaining()) return oversized();
        meta.timers.push_back(t);
        break;
      }
      default:
        return MakeError(Errc::kUnknownTag, idx + ": tag " + std::to_string(tag));
    }
  }
  if (r.remaining())
    return MakeError(Errc::kInvariantViolation, "trailing bytes after records");
  if (Status<void> ok = CheckMeta(meta); !ok) return MakeError(ok);
  return meta;
}

std::string DumpMetaTsv(const ProcessMeta &meta) {
  std::ostringstream os;
  if (!meta.cwd.empty()) os << "cwd\t" << Escape(meta.cwd) << '\n';
  for (const std::string &e : meta.env) os << "env\t" << Escape(e) << '\n';
  for (const ThreadRecord &t : meta.threads)
    os << "thread\t" << t.tid << '\t' << FormatHex(t.sp) << '\t'
       << HexBytes(t.regs) << '\n';
  for (const FdRecord &f : meta.fds)
    os << "fd\t" << f.fd_num << '\t' << Escape(f.path) << '\t' << f.offset
       << '\t' << FormatHex(f.flags) << '\t' << (f.lazy ? 1 : 0) << '\n';
  for (const SigHandler &s : meta.sighandlers)
    os << "sig\t" << unsigned{s.signo} << '\t' << FormatHex(s.handler) << '\t'
       << FormatHex(s.mask) << '\t' << FormatHex(s.flags) << '\n';
  for (const TimerRecord &t : meta.timers)
    os << "timer\t" << t.id << '\t' << t.interval_ns << '\t' << t.remaining_ns
       << '\n';
  return os.str();
}

Status<ProcessMeta> ParseMetaTsv(std::string_view text) {
  ProcessMeta meta;
  size_t line_no = 0;
  while (!text.empty()) {
    size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;

    auto bad = [&] {
      return MakeError(Errc::kParseError, "meta.tsv line " + std::to_string(line_no));
    };
    std::vector<std::string_view> f = SplitTabs(line);
    const std::string_view kind = f[0];
    if (kind == "cwd" && f.size() == 2) {
      meta.cwd = Unescape(f[1]);
    } else if (kind == "env" && f.size() == 2) {
      meta.env.push_back(Unescape(f[1]));
    } else if (kind == "thread" && f.size() == 4) {
      ThreadRecord t;
      if (!ParseNum(f[1], t.tid) || !ParseNum(f[2], t.sp) ||
          !ParseHexBytes(f[3], t.regs))
        return bad();
      meta.threads.push_back(std::move(t));
    } else if (kind == "fd" && f.size() == 6) {
      FdRecord r;
      int lazy;
      if (!ParseNum(f[1], r.fd_num) || !ParseNum(f[3], r.offset) ||
          !ParseNum(f[4], r.flags) || !ParseNum(f[5], lazy) || lazy < 0 || lazy > 1)
        return bad();
      r.path = Unescape(f[2]);
      r.lazy = lazy;
      meta.fds.push_back(std::move(r));
    } else if (kind == "sig" && f.size() == 5) {
      SigHandler s;
      unsigned signo;
      if (!ParseNum(f[1], signo) || signo > 255 || !ParseNum(f[2], s.handler) ||
          !ParseNum(f[3], s.mask) || !ParseNum(f[4], s.flags))
        return bad();
      s.signo = static_cast<uint8_t>(signo);
      meta.sighandlers.push_back(s);
    } else if (kind == "timer" && f.size() == 4) {
      TimerRecord t;
      if (!ParseNum(f[1], t.id) || !ParseNum(f[2], t.interval_ns) ||
          !ParseNum(f[3], t.remaining_ns))
        return bad();
      meta.timers.push_back(t);
    } else {
      return bad();
    }
  }
  if (Status<void> ok = CheckMeta(meta); !ok) return MakeError(ok);
  return meta;
}

LazyFdTable::LazyFdTable(const ProcessMeta &meta) {
  for (const FdRecord &f : meta.fds) fds_[f.fd_num] = Entry{f.path, !f.lazy};
}

bool LazyFdTable::Contains(int32_t fd) const { return fds_.contains(fd); }

bool LazyFdTable::NeedsResolution(int32_t fd) const {
  auto it = fds_.find(fd);
  return it != fds_.end() && !it->second.resolved;
}

Status<FdResolution> LazyFdTable::Resolve(int32_t fd) {
  auto it = fds_.find(fd);
  if (it == fds_.end()) return MakeError(Errc::kNoSuchFd, std::to_string(fd));
  if (it->second.resolved)
    return MakeError(Errc::kAlreadyResolved, std::to_string(fd));
  it->second.resolved = true;
  ++events_;
  return FdResolution{fd, it->second.path};
}

uint64_t ReplayCostEstimate(const ProcessMeta &meta, uint64_t n_vma_mappings,
                            const ReplayCoefficients &coef) {
  return coef.per_fd * meta.fds.size() + coef.per_vma * n_vma_mappings +
         coef.per_thread * meta.threads.size() +
         coef.per_sighandler * meta.sighandlers.size() +
         coef.per_timer * meta.timers.size();
}

}  // namespace jif
