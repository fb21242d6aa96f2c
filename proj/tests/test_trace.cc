#include <gtest/gtest.h>

#include <cstring>

#include "gen.h"
#include "jif/trace.h"

namespace jif {
namespace {

Bytes Text(const std::string &s) {
  Bytes b(s.size());
  std::memcpy(b.data(), s.data(), s.size());
  return b;
}

TEST(Trace, EmptyFile) { EXPECT_TRUE(DecodeTrace({})->empty()); }

TEST(Trace, TextAndBinaryAgree) {
  AccessTrace t = {{AccessOp::kRead, 0x7f0000001000}, {AccessOp::kWrite, 0x2000}};
  EXPECT_EQ(*DecodeTrace(Text("R 0x7f0000001000\nW 0x2000\n")), t);
  EXPECT_EQ(*DecodeTrace(EncodeTraceBinary(t)), t);
  EXPECT_EQ(*DecodeTrace(Text(EncodeTraceText(t))), t);
  EXPECT_EQ(*DecodeTrace(Text("# comment\n\nR 7f0000001000  # tail\nW 0x2000")), t);
}

TEST(Trace, RandomRoundTrip) {
  testing::Rng rng(1);
  AccessTrace t;
  for (int i = 0; i < 10000; ++i)
    t.push_back({rng() % 2 ? AccessOp::kRead : AccessOp::kWrite, (rng() >> 20) << 12});
  EXPECT_EQ(*DecodeTrace(EncodeTraceBinary(t)), t);
  EXPECT_EQ(*DecodeTrace(Text(EncodeTraceText(t))), t);
}

TEST(Trace, BadRecords) {
  EXPECT_EQ(DecodeTrace(Text("X 0x1000\n")).error().code(), Errc::kBadTraceRecord);
  EXPECT_EQ(DecodeTrace(Text("R 0x1001\n")).error().code(), Errc::kBadTraceRecord);
  EXPECT_EQ(DecodeTrace(Text("R zz\n")).error().code(), Errc::kBadTraceRecord);
  Bytes bin = EncodeTraceBinary({{AccessOp::kRead, 0x1000}});
  bin.pop_back();
  EXPECT_EQ(DecodeTrace(bin).error().code(), Errc::kBadTraceRecord);
  bin = EncodeTraceBinary({{AccessOp::kRead, 0x1000}});
  bin[0] = std::byte{'Q'};
  EXPECT_EQ(DecodeTrace(bin).error().code(), Errc::kBadTraceRecord);
}

TEST(Trace, FirstTouch) {
  AccessTrace t = {{AccessOp::kRead, 0x3000},
                   {AccessOp::kWrite, 0x1000},
                   {AccessOp::kWrite, 0x3000},
                   {AccessOp::kRead, 0x2000}};
  EXPECT_EQ(FirstTouchPages(t), (std::vector<uint64_t>{0x3000, 0x1000, 0x2000}));
  EXPECT_EQ(FirstTouchSequence(t)[0].op, AccessOp::kRead);
}

}  // namespace
}  // namespace jif
