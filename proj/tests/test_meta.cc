#include <gtest/gtest.h>

#include <cstring>

#include "gen.h"
#include "jif/meta.h"

namespace jif {
namespace {

using testing::Rng;

TEST(Meta, EmptyRoundTrip) {
  Bytes blob = *EncodeMeta({});
  EXPECT_EQ(blob.size(), 4u);
  EXPECT_EQ(*DecodeMeta(blob), ProcessMeta{});
}

TEST(Meta, RandomRoundTrip) {
  Rng rng(1);
  for (int i = 0; i < 300; ++i) {
    ProcessMeta m = testing::RandomMeta(rng);
    Status<Bytes> blob = EncodeMeta(m);
    ASSERT_TRUE(blob) << blob.error();
    Status<ProcessMeta> back = DecodeMeta(*blob);
    ASSERT_TRUE(back) << back.error();
    EXPECT_EQ(*back, m);
    EXPECT_EQ(*EncodeMeta(*back), *blob);
  }
}

TEST(Meta, TsvRoundTrip) {
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    ProcessMeta m = testing::RandomMeta(rng);
    Status<ProcessMeta> back = ParseMetaTsv(DumpMetaTsv(m));
    ASSERT_TRUE(back) << back.error();
    EXPECT_EQ(*back, m);
  }
}

TEST(Meta, TruncatedRecordIndex) {
  ProcessMeta m;
  m.cwd = "/srv";
  m.fds.push_back({3, "/tmp/log", 0, 0, true});
  Bytes blob = *EncodeMeta(m);
  blob.resize(blob.size() - 2);
  Status<ProcessMeta> r = DecodeMeta(blob);
  ASSERT_FALSE(r);
  EXPECT_EQ(r.error().code(), Errc::kTruncatedRecord);
  EXPECT_NE(r.error().detail().find('1'), std::string::npos);
}

TEST(Meta, UnknownTag) {
  ProcessMeta m;
  m.cwd = "/";
  Bytes blob = *EncodeMeta(m);
  blob[4] = std::byte{99};
  EXPECT_EQ(DecodeMeta(blob).error().code(), Errc::kUnknownTag);
}

TEST(Meta, InvalidContents) {
  ProcessMeta dup;
  dup.fds = {{1, "a", 0, 0, false}, {1, "b", 0, 0, false}};
  EXPECT_FALSE(EncodeMeta(dup));
  ProcessMeta sig;
  sig.sighandlers = {{0, 0, 0, 0}};
  EXPECT_FALSE(EncodeMeta(sig));
  ProcessMeta tids;
  tids.threads = {{7, {}, 0}, {7, {}, 0}};
  EXPECT_FALSE(EncodeMeta(tids));
}

TEST(Meta, TrailingBytesRejected) {
  Bytes blob = *EncodeMeta({});
  blob.push_back(std::byte{0});
  EXPECT_FALSE(DecodeMeta(blob));
}

TEST(Meta, ReplayCost) {
  ProcessMeta m;
  for (int i = 0; i < 10; ++i) m.fds.push_back({i, "/f", 0, 0, false});
  EXPECT_EQ(ReplayCostEstimate(m, 0), 40u);
  EXPECT_EQ(BatchedRestoreCost(), 1u);
}

TEST(LazyFds, EventsEqualUsedLazyFds) {
  ProcessMeta m;
  m.fds = {{0, "/dev/null", 0, 0, false}, {3, "/a", 0, 0, true}, {4, "/b", 0, 0, true},
           {5, "/c", 0, 0, true}};
  LazyFdTable t(m);
  EXPECT_FALSE(t.NeedsResolution(0));
  EXPECT_TRUE(t.NeedsResolution(3));
  Status<FdResolution> r = t.Resolve(3);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->path, "/a");
  EXPECT_EQ(t.Resolve(3).error().code(), Errc::kAlreadyResolved);
  EXPECT_EQ(t.Resolve(9).error().code(), Errc::kNoSuchFd);
  EXPECT_EQ(t.Resolve(0).error().code(), Errc::kAlreadyResolved);
  ASSERT_TRUE(t.Resolve(5));
  EXPECT_EQ(t.events(), 2u);
}

}  // namespace
}  // namespace jif
