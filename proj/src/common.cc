#include "jif/common.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace jif {

std::string_view ErrcName(Errc code) {
  switch (code) {
    case Errc::kBadMagic: return "BadMagic";
    case Errc::kBadChecksum: return "BadChecksum";
    case Errc::kTruncatedFile: return "TruncatedFile";
    case Errc::kTableInvariantViolation: return "TableInvariantViolation";
    case Errc::kInvariantViolation: return "InvariantViolation";
    case Errc::kTraceOutOfRange: return "TraceOutOfRange";
    case Errc::kUnsortedInput: return "UnsortedInput";
    case Errc::kOverlappingIntervals: return "OverlappingIntervals";
    case Errc::kUnmapped: return "Unmapped";
    case Errc::kMissingBackingFile: return "MissingBackingFile";
    case Errc::kRangeOutsideVma: return "RangeOutsideVma";
    case Errc::kStackPointerOutsideVma: return "StackPointerOutsideVma";
    case Errc::kTruncatedRecord: return "TruncatedRecord";
    case Errc::kUnknownTag: return "UnknownTag";
    case Errc::kNoSuchFd: return "NoSuchFd";
    case Errc::kAlreadyResolved: return "AlreadyResolved";
    case Errc::kBadTraceRecord: return "BadTraceRecord";
    case Errc::kSimCrash: return "SimCrash";
    case Errc::kEmptyInput: return "EmptyInput";
    case Errc::kBadConfig: return "BadConfig";
    case Errc::kIoError: return "IoError";
    case Errc::kParseError: return "ParseError";
  }
  return "Unknown";
}

std::string Error::ToString() const {
  std::string s(ErrcName(code_));
  if (!detail_.empty()) {
    s += ": ";
    s += detail_;
  }
  return s;
}

std::ostream &operator<<(std::ostream &os, const Error &err) {
  return os << err.ToString();
}

std::string FormatHex(uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "0x%llx", static_cast<unsigned long long>(v));
  return buf;
}

bool IsAllZero(std::span<const std::byte> bytes) {
  return std::all_of(bytes.begin(), bytes.end(),
                     [](std::byte b) { return b == std::byte{0}; });
}

Status<Bytes> ReadFile(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return MakeError(Errc::kIoError, "cannot open `" + path + "`");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string s = ss.str();
  Bytes out(s.size());
  std::transform(s.begin(), s.end(), out.begin(),
                 [](char c) { return static_cast<std::byte>(c); });
  return out;
}

Status<void> WriteFile(const std::string &path,
                       std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return MakeError(Errc::kIoError, "cannot create `" + path + "`");
  out.write(reinterpret_cast<const char *>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) return MakeError(Errc::kIoError, "short write to `" + path + "`");
  return {};
}

}  // namespace jif
