#include "jif/format.h"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <sstream>

#include "tree_walk.h"

namespace jif {

namespace {

template <typename T>
std::span<const std::byte> AsBytes(const std::vector<T> &v) {
  return std::as_bytes(std::span(v));
}

uint32_t Crc32Update(uint32_t crc, std::span<const std::byte> bytes) {
  // zlib takes uInt lengths; feed large blobs in chunks.
  constexpr size_t kChunk = 1u << 30;
  while (!bytes.empty()) {
    size_t n = std::min(bytes.size(), kChunk);
    crc = static_cast<uint32_t>(
        crc32(crc, reinterpret_cast<const Bytef *>(bytes.data()),
              static_cast<uInt>(n)));
    bytes = bytes.subspan(n);
  }
  return crc;
}

template <typename T>
void AppendTable(Bytes &out, const std::vector<T> &table) {
  auto b = AsBytes(table);
  out.insert(out.end(), b.begin(), b.end());
}

// Copies `count` packed records of T starting at `offset`.
template <typename T>
std::vector<T> ReadTable(std::span<const std::byte> bytes, uint64_t offset,
                         uint64_t count) {
  std::vector<T> table(count);
  if (count)
    std::memcpy(table.data(), bytes.data() + offset, count * sizeof(T));
  return table;
}

class FindingSink {
 public:
  void Add(std::string code, std::string detail) {
    findings_.push_back({std::move(code), std::move(detail)});
  }
  std::vector<Finding> Take() { return std::move(findings_); }

 private:
  std::vector<Finding> findings_;
};

std::string VmaLabel(size_t i) { return "vma " + std::to_string(i); }

void ValidateTree(const JifImage &img, size_t vi, FindingSink &sink,
                  std::vector<std::pair<uint64_t, uint64_t>> &extents) {
  const VmaDescriptor &vma = img.vmas[vi];
  std::span<const TreeNode> tree = img.TreeOf(vma);

  size_t used = 0;
  bool seen_unused = false, shape_ok = true, eager = false;
  uint64_t prev_end = 0;
  bool have_prev = false;
  detail::WalkSlots(tree, [&](const IntervalSlot &s) {
    if (!s.IsUsed()) {
      seen_unused = true;
      if (s.off != 0) sink.Add("itree-slot", VmaLabel(vi) + ": unused slot with offset");
      return;
    }
    if (seen_unused) shape_ok = false;
    ++used;
    std::string where = VmaLabel(vi) + " interval [" + FormatHex(s.start) +
                        ", " + FormatHex(s.end) + ")";
    if (s.start >= s.end) sink.Add("interval-empty", where);
    if (!IsPageAligned(s.start) || !IsPageAligned(s.end))
      sink.Add("interval-misaligned", where);
    if (s.start < vma.vbegin || s.end > vma.vend)
      sink.Add("interval-outside-vma", where);
    if (have_prev && s.start < prev_end) sink.Add("interval-order", where);
    have_prev = true;
    prev_end = std::max(prev_end, s.end);

    if (s.IsZero() || s.start >= s.end) return;
    eager |= s.EagerWritable();
    uint64_t off = s.DataOffset();
    uint64_t len = s.end - s.start;
    if ((s.off >> 1) > (~uint64_t{0} >> kPageShift) || off > img.data.size() ||
        len > img.data.size() - off) {
      sink.Add("data-oob", where + " offset " + FormatHex(off));
      return;
    }
    extents.emplace_back(off, off + len);
  });

  if (!shape_ok || tree.size() != (used + kNodeFanout - 1) / kNodeFanout)
    sink.Add("itree-shape", VmaLabel(vi) + ": " + std::to_string(tree.size()) +
                                " nodes for " + std::to_string(used) +
                                " intervals");
  bool flagged = vma.vflags & kVmaEagerWritablePresent;
  if (flagged != eager)
    sink.Add("vma-flags-mismatch", VmaLabel(vi) + ": EAGER_WRITABLE_PRESENT");
}

}  // namespace

std::span<const TreeNode> JifImage::TreeOf(const VmaDescriptor &vma) const {
  std::span<const TreeNode> all(nodes);
  if (uint64_t{vma.itree_first} + vma.itree_count > all.size()) return {};
  return all.subspan(vma.itree_first, vma.itree_count);
}

std::string_view JifImage::PathOf(const VmaDescriptor &vma) const {
  if (vma.IsAnonymous() || vma.ref_path >= strings.size()) return {};
  const char *p = strings.data() + vma.ref_path;
  size_t max = strings.size() - vma.ref_path;
  return std::string_view(p, strnlen(p, max));
}

std::optional<size_t> JifImage::FindVma(uint64_t addr) const {
  auto it = std::upper_bound(
      vmas.begin(), vmas.end(), addr,
      [](uint64_t a, const VmaDescriptor &v) { return a < v.vbegin; });
  if (it == vmas.begin()) return std::nullopt;
  --it;
  if (!it->Contains(addr)) return std::nullopt;
  return static_cast<size_t>(it - vmas.begin());
}

uint64_t TablesEnd(const JifImage &img) {
  return sizeof(JifHeader) + img.vmas.size() * sizeof(VmaDescriptor) +
         img.nodes.size() * sizeof(TreeNode) +
         img.ord.size() * sizeof(OrdSegment) + img.strings.size() +
         img.metadata.size();
}

uint32_t ComputeTableChecksum(const JifImage &img) {
  uint32_t crc = static_cast<uint32_t>(crc32(0, Z_NULL, 0));
  crc = Crc32Update(crc, AsBytes(img.vmas));
  crc = Crc32Update(crc, AsBytes(img.nodes));
  crc = Crc32Update(crc, AsBytes(img.ord));
  crc = Crc32Update(crc, AsBytes(img.strings));
  crc = Crc32Update(crc, img.metadata);
  return crc;
}

void SealHeader(JifImage &img) {
  JifHeader &h = img.header;
  h.magic = kJifMagic;
  h.n_vmas = static_cast<uint32_t>(img.vmas.size());
  h.n_itree_nodes = static_cast<uint32_t>(img.nodes.size());
  h.n_ord_segments = static_cast<uint32_t>(img.ord.size());
  h.strings_size = static_cast<uint32_t>(img.strings.size());
  h.metadata_size = img.metadata.size();
  h.data_offset = PageCeil(TablesEnd(img));
  h.table_checksum = ComputeTableChecksum(img);
}

std::vector<Finding> Validate(const JifImage &img) {
  FindingSink sink;
  const JifHeader &h = img.header;

  if (h.magic != kJifMagic) sink.Add("bad-magic", "header");
  if (h.version != kJifVersion)
    sink.Add("bad-version", "version " + std::to_string(h.version));
  if (h.reserved != 0) sink.Add("reserved-nonzero", "header");
  if (h.n_vmas != img.vmas.size() || h.n_itree_nodes != img.nodes.size() ||
      h.n_ord_segments != img.ord.size() ||
      h.strings_size != img.strings.size() ||
      h.metadata_size != img.metadata.size())
    sink.Add("header-count", "table sizes disagree with header");
  if (!IsPageAligned(h.data_offset))
    sink.Add("data-offset-misaligned", FormatHex(h.data_offset));
  else if (h.data_offset < TablesEnd(img))
    sink.Add("data-offset-overlap", FormatHex(h.data_offset));
  if (img.data.size() % kPageSize != 0)
    sink.Add("data-size", std::to_string(img.data.size()) + " bytes");
  if (!img.strings.empty() && img.strings.back() != '\0')
    sink.Add("strings-unterminated", "string table");

  std::vector<std::pair<uint64_t, uint64_t>> extents;
  for (size_t i = 0; i < img.vmas.size(); ++i) {
    const VmaDescriptor &v = img.vmas[i];
    if (v.vbegin >= v.vend) sink.Add("vma-empty", VmaLabel(i));
    if (!IsPageAligned(v.vbegin) || !IsPageAligned(v.vend))
      sink.Add("vma-misaligned", VmaLabel(i));
    if (v.prot & ~(kProtRead | kProtWrite | kProtExec))
      sink.Add("vma-prot", VmaLabel(i));
    if (v.vflags & ~kVmaEagerWritablePresent) sink.Add("vma-flags", VmaLabel(i));
    if (v.reserved != 0) sink.Add("reserved-nonzero", VmaLabel(i));
    if (v.IsAnonymous()) {
      if (v.ref_file_offset != 0) sink.Add("anon-offset", VmaLabel(i));
    } else {
      if (v.ref_path >= img.strings.size() ||
          (v.ref_path > 0 && img.strings[v.ref_path - 1] != '\0'))
        sink.Add("bad-path-ref", VmaLabel(i));
      if (!IsPageAligned(v.ref_file_offset))
        sink.Add("vma-offset-misaligned", VmaLabel(i));
    }
    if (i > 0) {
      const VmaDescriptor &p = img.vmas[i - 1];
      if (v.vbegin < p.vbegin)
        sink.Add("vma-order", VmaLabel(i - 1) + ", " + VmaLabel(i));
      else if (v.vbegin < p.vend)
        sink.Add("vma-overlap", VmaLabel(i - 1) + ", " + VmaLabel(i));
    }
    if (uint64_t{v.itree_first} + v.itree_count > img.nodes.size()) {
      sink.Add("itree-range", VmaLabel(i));
      continue;
    }
    ValidateTree(img, i, sink, extents);
  }

  std::sort(extents.begin(), extents.end());
  for (size_t i = 1; i < extents.size(); ++i)
    if (extents[i].first < extents[i - 1].second)
      sink.Add("data-overlap", "data offset " + FormatHex(extents[i].first));

  for (size_t i = 0; i < img.ord.size(); ++i) {
    const OrdSegment &s = img.ord[i];
    std::string where = "ord " + std::to_string(i);
    if (static_cast<uint8_t>(s.kind) > static_cast<uint8_t>(SegmentKind::kZero))
      sink.Add("ord-kind", where);
    if (s.reserved != std::array<uint8_t, 3>{}) sink.Add("reserved-nonzero", where);
    std::optional<size_t> vi = img.FindVma(s.vaddr);
    if (s.n_pages == 0 || !IsPageAligned(s.vaddr) || !vi ||
        img.vmas[*vi].vend - s.vaddr < uint64_t{s.n_pages} * kPageSize)
      sink.Add("ord-outside-vma", where);
  }
  return sink.Take();
}

Status<JifImage> DecodeJif(std::span<const std::byte> bytes,
                           bool verify_checksum) {
  if (bytes.size() < sizeof(JifHeader))
    return MakeError(Errc::kTruncatedFile, "shorter than the header");

  JifImage img;
  std::memcpy(&img.header, bytes.data(), sizeof(JifHeader));
  const JifHeader &h = img.header;
  if (h.magic != kJifMagic) return MakeError(Errc::kBadMagic);

  const uint64_t size = bytes.size();
  const uint64_t vma_off = sizeof(JifHeader);
  const uint64_t node_off = vma_off + uint64_t{h.n_vmas} * sizeof(VmaDescriptor);
  const uint64_t ord_off = node_off + uint64_t{h.n_itree_nodes} * sizeof(TreeNode);
  const uint64_t str_off = ord_off + uint64_t{h.n_ord_segments} * sizeof(OrdSegment);
  const uint64_t meta_off = str_off + h.strings_size;
  if (meta_off > size || h.metadata_size > size - meta_off)
    return MakeError(Errc::kTruncatedFile, "tables extend past end of file");
  const uint64_t tables_end = meta_off + h.metadata_size;

  if (h.data_offset > size)
    return MakeError(Errc::kTruncatedFile, "data section past end of file");
  if (!IsPageAligned(h.data_offset) || h.data_offset < tables_end)
    return MakeError(Errc::kTableInvariantViolation,
                     "data-offset " + FormatHex(h.data_offset));
  if ((size - h.data_offset) % kPageSize != 0)
    return MakeError(Errc::kTruncatedFile, "partial page in data section");

  img.vmas = ReadTable<VmaDescriptor>(bytes, vma_off, h.n_vmas);
  img.nodes = ReadTable<TreeNode>(bytes, node_off, h.n_itree_nodes);
  img.ord = ReadTable<OrdSegment>(bytes, ord_off, h.n_ord_segments);
  img.strings = ReadTable<char>(bytes, str_off, h.strings_size);
  img.metadata = ReadTable<std::byte>(bytes, meta_off, h.metadata_size);
  auto data = bytes.subspan(h.data_offset);
  img.data.assign(data.begin(), data.end());

  if (verify_checksum && ComputeTableChecksum(img) != h.table_checksum)
    return MakeError(Errc::kBadChecksum);
  return img;
}

Status<JifImage> ParseJif(std::span<const std::byte> bytes) {
  Status<JifImage> img = DecodeJif(bytes, true);
  if (!img) return img;
  std::vector<Finding> findings = Validate(*img);
  if (!findings.empty())
    return MakeError(Errc::kTableInvariantViolation,
                     findings.front().code + " (" + findings.front().detail + ")");
  return img;
}

Status<Bytes> WriteJif(const JifImage &img) {
  JifImage sealed = img;
  SealHeader(sealed);
  std::vector<Finding> findings = Validate(sealed);
  if (!findings.empty())
    return MakeError(Errc::kInvariantViolation,
                     findings.front().code + " (" + findings.front().detail + ")");

  Bytes out;
  out.reserve(sealed.header.data_offset + sealed.data.size());
  auto hdr = std::as_bytes(std::span(&sealed.header, 1));
  out.insert(out.end(), hdr.begin(), hdr.end());
  AppendTable(out, sealed.vmas);
  AppendTable(out, sealed.nodes);
  AppendTable(out, sealed.ord);
  AppendTable(out, sealed.strings);
  AppendTable(out, sealed.metadata);
  out.resize(sealed.header.data_offset, std::byte{0});
  AppendTable(out, sealed.data);
  return out;
}

}  // namespace jif
