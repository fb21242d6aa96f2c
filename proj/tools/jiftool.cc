// jiftool - build, inspect, verify and simulate JIF snapshots.
//
// Exit codes: 0 success, 1 validation findings, 2 errors (including usage).

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "jif/builder.h"
#include "jif/format.h"
#include "jif/meta.h"
#include "jif/overlay.h"
#include "jif/sim.h"

namespace {

using namespace jif;

constexpr int kExitOk = 0;
constexpr int kExitFindings = 1;
constexpr int kExitError = 2;

int Fail(const Error &err) {
  std::cerr << "jiftool: " << err << '\n';
  return kExitError;
}

Status<JifImage> LoadImage(const std::string &path) {
  Status<Bytes> bytes = ReadFile(path);
  if (!bytes) return MakeError(bytes);
  return ParseJif(*bytes);
}

Status<void> SaveImage(const JifImage &img, const std::string &path) {
  Status<Bytes> bytes = WriteJif(img);
  if (!bytes) return MakeError(bytes);
  return WriteFile(path, *bytes);
}

std::string ProtString(uint8_t prot) {
  std::string s = "---";
  if (prot & kProtRead) s[0] = 'r';
  if (prot & kProtWrite) s[1] = 'w';
  if (prot & kProtExec) s[2] = 'x';
  return s;
}

const char *KindName(SegmentKind k) {
  switch (k) {
    case SegmentKind::kPrivate:
      return "private";
    case SegmentKind::kShared:
      return "shared";
    case SegmentKind::kZero:
      return "zero";
  }
  return "?";
}

int Inspect(const std::string &path) {
  Status<JifImage> img = LoadImage(path);
  if (!img) return Fail(img.error());
  const JifHeader &h = img->header;
  std::cout << "version=" << h.version << " flags=" << h.flags << " vmas=" << h.n_vmas
            << " itree_nodes=" << h.n_itree_nodes << " ord_segments=" << h.n_ord_segments
            << " strings_size=" << h.strings_size << " metadata_size=" << h.metadata_size
            << " data_offset=" << FormatHex(h.data_offset)
            << " data_size=" << img->data.size() << " checksum=" << FormatHex(h.table_checksum)
            << '\n';
  for (size_t i = 0; i < img->vmas.size(); ++i) {
    const VmaDescriptor &v = img->vmas[i];
    std::cout << "vma " << i << ' ' << FormatHex(v.vbegin) << '-' << FormatHex(v.vend) << ' '
              << ProtString(v.prot) << ' '
              << (v.IsAnonymous() ? std::string("[anon]") : std::string(img->PathOf(v)))
              << " off=" << FormatHex(v.ref_file_offset) << " nodes=" << v.itree_count
              << " vflags=" << int{v.vflags} << '\n';
    for (const Interval &iv : InOrder(img->TreeOf(v))) {
      std::cout << "  " << FormatHex(iv.start) << '-' << FormatHex(iv.end) << ' ';
      if (iv.IsPrivate())
        std::cout << "private data=" << FormatHex(iv.data_offset)
                  << (iv.eager_writable ? " eager" : "");
      else
        std::cout << "zero";
      std::cout << '\n';
    }
  }
  for (const OrdSegment &s : img->ord)
    std::cout << "ord " << FormatHex(s.vaddr) << ' ' << s.n_pages << ' ' << KindName(s.kind)
              << '\n';
  return kExitOk;
}

int StatsCmd(const std::string &path, const std::string &trace_path) {
  Status<JifImage> img = LoadImage(path);
  if (!img) return Fail(img.error());
  AccessTrace trace;
  if (!trace_path.empty()) {
    Status<AccessTrace> t = LoadTrace(trace_path);
    if (!t) return Fail(t.error());
    trace = std::move(*t);
  }
  Status<StatsRecord> rec = Stats(*img, trace_path.empty() ? nullptr : &trace);
  if (!rec) return Fail(rec.error());
  std::cout << rec->ToLine() << '\n';
  return kExitOk;
}

int ValidateCmd(const std::string &path) {
  Status<Bytes> bytes = ReadFile(path);
  if (!bytes) return Fail(bytes.error());
  Status<JifImage> img = DecodeJif(*bytes, /*verify_checksum=*/false);
  if (!img) return Fail(img.error());
  std::vector<Finding> findings = Validate(*img);
  if (img->header.table_checksum != ComputeTableChecksum(*img))
    findings.push_back({"bad-checksum", "table checksum does not match"});
  for (const Finding &f : findings) std::cout << f.code << ": " << f.detail << '\n';
  return findings.empty() ? kExitOk : kExitFindings;
}

struct BuildArgs {
  std::string raw;
  std::string out;
  std::string trace;
  std::string writeset;
  uint64_t redzone = kDefaultRedzone;
  bool serial = false;
};

int BuildCmd(const BuildArgs &a) {
  Status<RawSnapshot> raw = LoadRawSnapshot(a.raw);
  if (!raw) return Fail(raw.error());
  WriteSet ws;
  if (!a.writeset.empty()) {
    Status<WriteSet> w = LoadWriteSet(a.writeset);
    if (!w) return Fail(w.error());
    ws = std::move(*w);
  }
  AccessTrace trace;
  if (!a.trace.empty()) {
    Status<AccessTrace> t = LoadTrace(a.trace);
    if (!t) return Fail(t.error());
    trace = std::move(*t);
  }
  ProcessMeta meta;
  if (std::filesystem::exists(a.raw + "/meta.tsv")) {
    Status<Bytes> text = ReadFile(a.raw + "/meta.tsv");
    if (!text) return Fail(text.error());
    Status<ProcessMeta> m = ParseMetaTsv(
        std::string_view(reinterpret_cast<const char *>(text->data()), text->size()));
    if (!m) return Fail(m.error());
    meta = std::move(*m);
  }
  DirectoryBackingStore backing(a.raw + "/backing");
  BuildOptions opts;
  opts.redzone = a.redzone;
  opts.exec = a.serial ? Exec::kSerial : Exec::kParallel;
  Status<JifImage> img =
      BuildJif(*raw, backing, ws, a.trace.empty() ? nullptr : &trace, meta, opts);
  if (!img) return Fail(img.error());
  if (Status<void> s = SaveImage(*img, a.out); !s) return Fail(s.error());
  return kExitOk;
}

int ReorderCmd(const std::string &path, const std::string &trace_path,
               const std::string &out) {
  Status<JifImage> img = LoadImage(path);
  if (!img) return Fail(img.error());
  Status<AccessTrace> trace = LoadTrace(trace_path);
  if (!trace) return Fail(trace.error());
  Status<JifImage> reordered = ReorderByTrace(*img, *trace);
  if (!reordered) return Fail(reordered.error());
  if (Status<void> s = SaveImage(*reordered, out); !s) return Fail(s.error());
  return kExitOk;
}

int MaterializeCmd(const std::string &path, const std::string &vma_addr,
                   const std::string &backing_dir) {
  Status<JifImage> img = LoadImage(path);
  if (!img) return Fail(img.error());
  uint64_t addr = 0;
  try {
    addr = std::stoull(vma_addr, nullptr, 0);
  } catch (const std::exception &) {
    return Fail(MakeError(Errc::kParseError, "bad address " + vma_addr));
  }
  std::optional<size_t> vi = img->FindVma(addr);
  if (!vi) return Fail(MakeError(Errc::kUnmapped, FormatHex(addr)));
  DirectoryBackingStore backing(backing_dir);
  Status<Bytes> bytes = MaterializeVma(*img, img->vmas[*vi], backing);
  if (!bytes) return Fail(bytes.error());
  std::fwrite(bytes->data(), 1, bytes->size(), stdout);
  return std::fflush(stdout) == 0 ? kExitOk : kExitError;
}

Status<SimConfig> ConfigOrDefault(const std::string &path) {
  if (path.empty()) return SimConfig{};
  return LoadSimConfig(path);
}

int SimulateCmd(const std::string &path, const std::string &trace_path,
                const std::string &strategy, const std::string &config) {
  Status<JifImage> img = LoadImage(path);
  if (!img) return Fail(img.error());
  Status<AccessTrace> trace = LoadTrace(trace_path);
  if (!trace) return Fail(trace.error());
  Status<SimConfig> cfg = ConfigOrDefault(config);
  if (!cfg) return Fail(cfg.error());
  Status<Strategy> strat = ParseStrategy(strategy, cfg->toggles);
  if (!strat) return Fail(strat.error());
  Status<RestoreReport> rep = RunRestore(*img, *trace, *strat, cfg->cost);
  if (!rep) return Fail(rep.error());
  std::cout << rep->MachineLine() << '\n';
  return kExitOk;
}

int CompareCmd(const std::string &path, const std::string &trace_path,
               const std::string &config) {
  Status<JifImage> img = LoadImage(path);
  if (!img) return Fail(img.error());
  Status<AccessTrace> trace = LoadTrace(trace_path);
  if (!trace) return Fail(trace.error());
  Status<SimConfig> cfg = ConfigOrDefault(config);
  if (!cfg) return Fail(cfg.error());
  std::vector<Strategy> strategies = DefaultStrategies();
  strategies.back().toggles = cfg->toggles;
  Status<Comparison> cmp = CompareStrategies(*img, *trace, cfg->cost, strategies);
  if (!cmp) return Fail(cmp.error());
  std::cout << cmp->Format();
  return kExitOk;
}

int MetaDumpCmd(const std::string &path) {
  Status<JifImage> img = LoadImage(path);
  if (!img) return Fail(img.error());
  if (img->metadata.empty()) return kExitOk;
  Status<ProcessMeta> meta = DecodeMeta(img->metadata);
  if (!meta) return Fail(meta.error());
  std::cout << DumpMetaTsv(*meta);
  return kExitOk;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"jiftool: build, inspect, verify and simulate JIF snapshots"};
  app.require_subcommand(1);

  std::string jif, trace, out, config, strategy = "spice", vma, backing;

  auto *inspect = app.add_subcommand("inspect", "Print the header and tables");
  inspect->add_option("jif", jif)->required();

  auto *stats = app.add_subcommand("stats", "Print the working-set statistics record");
  stats->add_option("jif", jif)->required();
  stats->add_option("--trace", trace, "Access trace for the working-set columns");

  auto *validate = app.add_subcommand("validate", "Report invariant violations");
  validate->add_option("jif", jif)->required();

  BuildArgs b;
  auto *build = app.add_subcommand("build", "Build an image from a raw snapshot directory");
  build->add_option("--raw", b.raw)->required();
  build->add_option("--out", b.out)->required();
  build->add_option("--trace", b.trace);
  build->add_option("--writeset", b.writeset);
  build->add_option("--redzone", b.redzone);
  build->add_flag("--serial", b.serial, "Use the serial page kernels");

  auto *reorder = app.add_subcommand("reorder", "Relayout data in trace order");
  reorder->add_option("jif", jif)->required();
  reorder->add_option("--trace", trace)->required();
  reorder->add_option("--out", out)->required();

  auto *materialize = app.add_subcommand("materialize", "Write one VMA's contents to stdout");
  materialize->add_option("jif", jif)->required();
  materialize->add_option("--vma", vma, "Any address inside the VMA")->required();
  materialize->add_option("--backing", backing, "Root of the backing files")->required();

  auto *simulate = app.add_subcommand("simulate", "Simulate one restore strategy");
  simulate->add_option("jif", jif)->required();
  simulate->add_option("--trace", trace)->required();
  simulate->add_option("--strategy", strategy)
      ->check(CLI::IsMember({"demand", "sync", "async", "spice"}));
  simulate->add_option("--config", config);

  auto *compare = app.add_subcommand("compare", "Simulate every strategy and the ideal");
  compare->add_option("jif", jif)->required();
  compare->add_option("--trace", trace)->required();
  compare->add_option("--config", config);

  auto *meta_dump = app.add_subcommand("meta-dump", "Print the process metadata");
  meta_dump->add_option("jif", jif)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  if (*inspect) return Inspect(jif);
  if (*stats) return StatsCmd(jif, trace);
  if (*validate) return ValidateCmd(jif);
  if (*build) return BuildCmd(b);
  if (*reorder) return ReorderCmd(jif, trace, out);
  if (*materialize) return MaterializeCmd(jif, vma, backing);
  if (*simulate) return SimulateCmd(jif, trace, strategy, config);
  if (*compare) return CompareCmd(jif, trace, config);
  if (*meta_dump) return MetaDumpCmd(jif);
  return kExitError;
}
