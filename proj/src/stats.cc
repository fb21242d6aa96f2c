#include <set>
#include <sstream>

#include "jif/format.h"
#include "jif/overlay.h"

namespace jif {

namespace {

void AppendCounts(std::ostringstream &os, const StatsCounts &c,
                  std::string_view prefix) {
  os << prefix << "vmas=" << c.vmas << ' ' << prefix << "intervals="
     << c.intervals << ' ' << prefix << "private=" << c.private_pages << ' '
     << prefix << "shared=" << c.shared_pages << ' ' << prefix
     << "zero=" << c.zero_pages << ' ' << prefix << "ws_bytes=" << c.ws_bytes;
}

}  // namespace

std::string StatsRecord::ToLine() const {
  std::ostringstream os;
  AppendCounts(os, total, "");
  if (working_set) {
    os << ' ';
    AppendCounts(os, *working_set, "ws.");
  }
  return os.str();
}

Status<StatsRecord> Stats(const JifImage &img, const AccessTrace *ws) {
  StatsRecord rec;
  StatsCounts &t = rec.total;
  t.vmas = img.vmas.size();
  for (const VmaDescriptor &v : img.vmas) {
    uint64_t covered = 0;
    for (const Interval &iv : InOrder(img.TreeOf(v))) {
      covered += iv.Pages();
      if (iv.IsPrivate()) {
        ++t.intervals;
        t.private_pages += iv.Pages();
      } else {
        t.zero_pages += iv.Pages();
      }
    }
    const uint64_t gap = v.Pages() - covered;
    (v.IsAnonymous() ? t.zero_pages : t.shared_pages) += gap;
  }
  t.ws_bytes = (t.private_pages + t.shared_pages + t.zero_pages) * kPageSize;

  if (ws == nullptr) return rec;

  StatsCounts w;
  std::set<size_t> vmas;
  std::set<std::pair<size_t, uint64_t>> intervals;
  for (uint64_t page : FirstTouchPages(*ws)) {
    std::optional<size_t> vi = img.FindVma(page);
    if (!vi) return MakeError(Errc::kTraceOutOfRange, FormatHex(page));
    vmas.insert(*vi);
    const VmaDescriptor &v = img.vmas[*vi];
    std::optional<Interval> iv = QueryInterval(img.TreeOf(v), page);
    if (iv && iv->IsPrivate()) {
      ++w.private_pages;
      intervals.emplace(*vi, iv->start);
    } else if (iv || v.IsAnonymous()) {
      ++w.zero_pages;
    } else {
      ++w.shared_pages;
    }
  }
  w.vmas = vmas.size();
  w.intervals = intervals.size();
  w.ws_bytes = (w.private_pages + w.shared_pages + w.zero_pages) * kPageSize;
  rec.working_set = w;
  return rec;
}

}  // namespace jif
