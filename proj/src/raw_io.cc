// Raw snapshot interchange directory and write-set files.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "jif/builder.h"

namespace jif {

namespace {

namespace fs = std::filesystem;

bool ParseHex(std::string_view s, uint64_t &out) {
  if (s.starts_with("0x") || s.starts_with("0X")) s.remove_prefix(2);
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out, 16);
  return ec == std::errc() && p == s.data() + s.size();
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

// Non-empty, non-comment lines as (line number, text).
std::vector<std::pair<size_t, std::string>> DataLines(const std::string &text) {
  std::vector<std::pair<size_t, std::string>> out;
  std::istringstream in(text);
  std::string line;
  size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    out.emplace_back(n, line);
  }
  return out;
}

Status<std::string> ReadText(const std::string &path) {
  Status<Bytes> b = ReadFile(path);
  if (!b) return MakeError(b);
  return std::string(reinterpret_cast<const char *>(b->data()), b->size());
}

Error ParseErr(const std::string &file, size_t line, const char *why) {
  return MakeError(Errc::kParseError, file + ":" + std::to_string(line) + ": " + why);
}

std::string ProtLetters(uint8_t prot) {
  std::string s = "---";
  if (prot & kProtRead) s[0] = 'r';
  if (prot & kProtWrite) s[1] = 'w';
  if (prot & kProtExec) s[2] = 'x';
  return s;
}

bool ParseProt(std::string_view s, uint8_t &prot) {
  prot = 0;
  for (char c : s) {
    if (c == 'r') prot |= kProtRead;
    else if (c == 'w') prot |= kProtWrite;
    else if (c == 'x') prot |= kProtExec;
    else if (c != '-') return false;
  }
  return true;
}

Status<void> WriteText(const std::string &path, const std::string &text) {
  return WriteFile(path, std::as_bytes(std::span(text.data(), text.size())));
}

}  // namespace

Status<RawSnapshot> LoadRawSnapshot(const std::string &dir) {
  RawSnapshot raw;
  const std::string vmas_path = dir + "/vmas.tsv";
  Status<std::string> vmas = ReadText(vmas_path);
  if (!vmas) return MakeError(vmas);
  for (const auto &[n, line] : DataLines(*vmas)) {
    std::vector<std::string_view> f = SplitTabs(line);
    RawVma v;
    if (f.size() != 5 || !ParseHex(f[0], v.vbegin) || !ParseHex(f[1], v.vend) ||
        !ParseProt(f[2], v.prot) || !ParseHex(f[4], v.file_offset))
      return ParseErr(vmas_path, n, "expected vbegin vend prot path offset");
    if (f[3] != "-") v.path = std::string(f[3]);
    raw.vmas.push_back(std::move(v));
  }

  Status<Bytes> mem = ReadFile(dir + "/mem.bin");
  if (!mem) return MakeError(mem);
  raw.memory = std::move(*mem);

  if (fs::exists(dir + "/stacks.tsv")) {
    const std::string path = dir + "/stacks.tsv";
    Status<std::string> text = ReadText(path);
    if (!text) return MakeError(text);
    for (const auto &[n, line] : DataLines(*text)) {
      std::vector<std::string_view> f = SplitTabs(line);
      uint64_t idx = 0;
      ThreadStack s;
      auto [p, ec] = std::from_chars(f[0].data(), f[0].data() + f[0].size(), idx);
      if (f.size() != 2 || ec != std::errc() || p != f[0].data() + f[0].size() ||
          !ParseHex(f[1], s.sp))
        return ParseErr(path, n, "expected vma_index sp");
      s.vma = idx;
      raw.stacks.push_back(s);
    }
  }

  if (fs::exists(dir + "/lazyfree.tsv")) {
    const std::string path = dir + "/lazyfree.tsv";
    Status<std::string> text = ReadText(path);
    if (!text) return MakeError(text);
    for (const auto &[n, line] : DataLines(*text)) {
      std::vector<std::string_view> f = SplitTabs(line);
      PageRange r;
      if (f.size() != 2 || !ParseHex(f[0], r.begin) || !ParseHex(f[1], r.end))
        return ParseErr(path, n, "expected begin end");
      raw.lazy_free.push_back(r);
    }
  }

  if (Status<void> s = CheckRawSnapshot(raw); !s) return MakeError(s);
  return raw;
}

Status<void> SaveRawSnapshot(const RawSnapshot &raw, const std::string &dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) return MakeError(Errc::kIoError, dir + ": " + ec.message());

  std::ostringstream vmas;
  for (const RawVma &v : raw.vmas)
    vmas << FormatHex(v.vbegin) << '\t' << FormatHex(v.vend) << '\t'
         << ProtLetters(v.prot) << '\t' << (v.path ? *v.path : "-") << '\t'
         << FormatHex(v.file_offset) << '\n';
  if (Status<void> s = WriteText(dir + "/vmas.tsv", vmas.str()); !s) return s;
  if (Status<void> s = WriteFile(dir + "/mem.bin", raw.memory); !s) return s;

  std::ostringstream stacks;
  for (const ThreadStack &s : raw.stacks)
    stacks << s.vma << '\t' << FormatHex(s.sp) << '\n';
  if (Status<void> s = WriteText(dir + "/stacks.tsv", stacks.str()); !s) return s;

  std::ostringstream lazy;
  for (const PageRange &r : raw.lazy_free)
    lazy << FormatHex(r.begin) << '\t' << FormatHex(r.end) << '\n';
  return WriteText(dir + "/lazyfree.tsv", lazy.str());
}

Status<WriteSet> LoadWriteSet(const std::string &path) {
  Status<std::string> text = ReadText(path);
  if (!text) return MakeError(text);
  WriteSet ws;
  ws.runs_observed = 1;
  for (const auto &[n, line] : DataLines(*text)) {
    std::string_view s = line;
    if (s.starts_with("runs=")) {
      uint64_t runs = 0;
      auto [p, ec] = std::from_chars(s.data() + 5, s.data() + s.size(), runs);
      if (ec != std::errc() || p != s.data() + s.size())
        return ParseErr(path, n, "bad runs count");
      ws.runs_observed = static_cast<uint32_t>(runs);
      continue;
    }
    uint64_t addr = 0;
    if (!ParseHex(s, addr) || !IsPageAligned(addr))
      return ParseErr(path, n, "expected a page-aligned hex address");
    ws.pages.insert(addr);
  }
  return ws;
}

}  // namespace jif
