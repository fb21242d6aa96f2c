#include "jif/trace.h"

#include <charconv>
#include <cstring>
#include <sstream>
#include <unordered_set>

namespace jif {

namespace {

bool IsSpace(char c) { return c == ' ' || c == '\t'; }

Status<AccessOp> ParseOp(uint8_t c, size_t index) {
  if (c == 'R') return AccessOp::kRead;
  if (c == 'W') return AccessOp::kWrite;
  return MakeError(Errc::kBadTraceRecord,
                   "record " + std::to_string(index) + ": bad op byte");
}

Status<AccessTrace> DecodeBinary(std::span<const std::byte> bytes) {
  if (bytes.size() % kTraceRecordSize != 0)
    return MakeError(Errc::kBadTraceRecord, "size is not a multiple of 9");
  AccessTrace trace(bytes.size() / kTraceRecordSize);
  for (size_t i = 0; i < trace.size(); ++i) {
    const std::byte *rec = bytes.data() + i * kTraceRecordSize;
    Status<AccessOp> op = ParseOp(static_cast<uint8_t>(rec[0]), i);
    if (!op) return MakeError(op);
    uint64_t addr;
    std::memcpy(&addr, rec + 1, sizeof(addr));
    if (!IsPageAligned(addr))
      return MakeError(Errc::kBadTraceRecord,
                       "record " + std::to_string(i) + ": unaligned address");
    trace[i] = {*op, addr};
  }
  return trace;
}

Status<AccessTrace> DecodeText(std::string_view text) {
  AccessTrace trace;
  size_t line_no = 0;
  while (!text.empty()) {
    size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (size_t hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    while (!line.empty() && (IsSpace(line.back()) || line.back() == '\r'))
      line.remove_suffix(1);
    while (!line.empty() && IsSpace(line.front())) line.remove_prefix(1);
    if (line.empty()) continue;

    auto bad = [&](const char *why) {
      return MakeError(Errc::kBadTraceRecord,
                       "line " + std::to_string(line_no) + ": " + why);
    };
    if (line.size() < 3 || !IsSpace(line[1])) return bad("expected `<R|W> <addr>`");
    Status<AccessOp> op = ParseOp(static_cast<uint8_t>(line[0]), line_no);
    if (!op) return bad("bad op");
    std::string_view num = line.substr(2);
    while (!num.empty() && IsSpace(num.front())) num.remove_prefix(1);
    if (num.starts_with("0x") || num.starts_with("0X")) num.remove_prefix(2);
    uint64_t addr = 0;
    auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), addr, 16);
    if (ec != std::errc() || p != num.data() + num.size() || num.empty())
      return bad("bad address");
    if (!IsPageAligned(addr)) return bad("unaligned address");
    trace.push_back({*op, addr});
  }
  return trace;
}

}  // namespace

Status<AccessTrace> DecodeTrace(std::span<const std::byte> bytes) {
  if (bytes.empty()) return AccessTrace{};
  const char first = static_cast<char>(bytes[0]);
  const bool text = bytes.size() < 2 || first == '#' || IsSpace(first) ||
                    first == '\n' || IsSpace(static_cast<char>(bytes[1]));
  if (text)
    return DecodeText(
        std::string_view(reinterpret_cast<const char *>(bytes.data()), bytes.size()));
  return DecodeBinary(bytes);
}

Status<AccessTrace> LoadTrace(const std::string &path) {
  Status<Bytes> bytes = ReadFile(path);
  if (!bytes) return MakeError(bytes);
  return DecodeTrace(*bytes);
}

Bytes EncodeTraceBinary(const AccessTrace &trace) {
  Bytes out(trace.size() * kTraceRecordSize);
  for (size_t i = 0; i < trace.size(); ++i) {
    std::byte *rec = out.data() + i * kTraceRecordSize;
    rec[0] = static_cast<std::byte>(trace[i].op);
    std::memcpy(rec + 1, &trace[i].addr, sizeof(uint64_t));
  }
  return out;
}

std::string EncodeTraceText(const AccessTrace &trace) {
  std::ostringstream os;
  for (const PageAccess &a : trace)
    os << static_cast<char>(a.op) << ' ' << FormatHex(a.addr) << '\n';
  return os.str();
}

std::vector<uint64_t> FirstTouchPages(const AccessTrace &trace) {
  std::vector<uint64_t> out;
  std::unordered_set<uint64_t> seen;
  for (const PageAccess &a : trace)
    if (seen.insert(a.addr).second) out.push_back(a.addr);
  return out;
}

AccessTrace FirstTouchSequence(const AccessTrace &trace) {
  AccessTrace out;
  std::unordered_set<uint64_t> seen;
  for (const PageAccess &a : trace)
    if (seen.insert(a.addr).second) out.push_back(a);
  return out;
}

}  // namespace jif
