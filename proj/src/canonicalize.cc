#include <algorithm>
#include <cstring>
#include <map>
#include <numeric>

#include "jif/format.h"
#include "jif/overlay.h"

namespace jif {

namespace {

bool Mergeable(const Interval &a, const Interval &b) {
  if (a.end != b.start || a.kind != b.kind) return false;
  if (!a.IsPrivate()) return true;
  return a.eager_writable == b.eager_writable &&
         a.data_offset + (a.end - a.start) == b.data_offset;
}

// Header fields that SealHeader() recomputes are not judged here.
bool IsDerivedHeaderFinding(const Finding &f) {
  return f.code == "header-count" || f.code == "data-offset-misaligned" ||
         f.code == "data-offset-overlap";
}

}  // namespace

Status<JifImage> Canonicalize(const JifImage &input) {
  // Descriptors carry their own tree ranges, so sorting first is safe and
  // lets the validator judge the sorted table.
  JifImage img = input;
  std::stable_sort(img.vmas.begin(), img.vmas.end(),
                   [](const VmaDescriptor &a, const VmaDescriptor &b) {
                     return a.vbegin < b.vbegin;
                   });
  for (const Finding &f : Validate(img)) {
    if (IsDerivedHeaderFinding(f)) continue;
    return MakeError(Errc::kInvariantViolation, f.code + " (" + f.detail + ")");
  }

  std::vector<size_t> order(img.vmas.size());
  std::iota(order.begin(), order.end(), 0);

  JifImage out;
  out.header = img.header;
  out.ord = img.ord;
  out.metadata = img.metadata;

  // Deduplicated string table in order of first reference.
  std::map<std::string, uint32_t, std::less<>> path_offsets;
  std::vector<std::vector<Interval>> per_vma(order.size());
  for (size_t k = 0; k < order.size(); ++k) {
    VmaDescriptor v = img.vmas[order[k]];
    if (!v.IsAnonymous()) {
      std::string_view path = img.PathOf(v);
      auto it = path_offsets.find(path);
      if (it == path_offsets.end()) {
        uint32_t off = static_cast<uint32_t>(out.strings.size());
        out.strings.insert(out.strings.end(), path.begin(), path.end());
        out.strings.push_back('\0');
        it = path_offsets.emplace(std::string(path), off).first;
      }
      v.ref_path = it->second;
    }
    per_vma[k] = InOrder(img.TreeOf(img.vmas[order[k]]));
    out.vmas.push_back(v);
  }

  // Compact the data section, keeping the existing relative page order.
  std::vector<Interval *> privates;
  for (auto &ivs : per_vma)
    for (Interval &iv : ivs)
      if (iv.IsPrivate()) privates.push_back(&iv);
  std::sort(privates.begin(), privates.end(),
            [](const Interval *a, const Interval *b) {
              return a->data_offset < b->data_offset;
            });
  uint64_t cursor = 0;
  for (const Interval *iv : privates) cursor += iv->end - iv->start;
  out.data.resize(cursor);
  cursor = 0;
  for (Interval *iv : privates) {
    const uint64_t len = iv->end - iv->start;
    std::memcpy(out.data.data() + cursor, img.data.data() + iv->data_offset, len);
    iv->data_offset = cursor;
    cursor += len;
  }

  for (size_t k = 0; k < per_vma.size(); ++k) {
    std::vector<Interval> merged;
    for (const Interval &iv : per_vma[k]) {
      if (!merged.empty() && Mergeable(merged.back(), iv))
        merged.back().end = iv.end;
      else
        merged.push_back(iv);
    }
    Status<OverlayTree> tree = BuildITree(merged);
    if (!tree) return MakeError(tree);

    VmaDescriptor &v = out.vmas[k];
    v.itree_first = static_cast<uint32_t>(out.nodes.size());
    v.itree_count = static_cast<uint32_t>(tree->size());
    v.vflags = std::any_of(merged.begin(), merged.end(),
                           [](const Interval &iv) { return iv.eager_writable; })
                   ? kVmaEagerWritablePresent
                   : 0;
    out.nodes.insert(out.nodes.end(), tree->begin(), tree->end());
  }

  SealHeader(out);
  return out;
}

}  // namespace jif
