#include "gfsa/rng.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

#include "gtest/gtest.h"

namespace {

// Reference outputs frozen from the canonical xoshiro256++/splitmix64 C
// sources (Blackman & Vigna), compiled and run separately. Golden files
// depend on this stream, so these vectors must never change.
TEST(RngTest, MatchesReferenceStreamSeed42) {
  gfsa::Rng rng(42);
  const std::uint64_t want[] = {
      0xd0764d4f4476689fULL, 0x519e4174576f3791ULL, 0xfbe07cfb0c24ed8cULL,
      0xb37d9f600cd835b8ULL, 0xcb231c3874846a73ULL, 0x968d9f004e50de7dULL,
  };
  for (std::uint64_t w : want) EXPECT_EQ(rng.next_u64(), w);
}

TEST(RngTest, MatchesReferenceStreamSeed0) {
  gfsa::Rng rng(0);
  const std::uint64_t want[] = {
      0x53175d61490b23dfULL, 0x61da6f3dc380d507ULL, 0x5c0fdf91ec9a7bfcULL,
      0x02eebf8c3bbe5e1aULL, 0x7eca04ebaf4a5eeaULL, 0x0543c37757f08d9aULL,
  };
  for (std::uint64_t w : want) EXPECT_EQ(rng.next_u64(), w);
}

TEST(RngTest, UniformMatchesReferenceBits) {
  gfsa::Rng a(42);
  EXPECT_EQ(a.uniform(), 0.81430514512290986);
  EXPECT_EQ(a.uniform(), 0.31882104006166112);
  EXPECT_EQ(a.uniform(), 0.98389416817748876);
  gfsa::Rng b(0);
  EXPECT_EQ(b.uniform(), 0.32457526803140668);
  EXPECT_EQ(b.uniform(), 0.38223929651167343);
  EXPECT_EQ(b.uniform(), 0.35961720764735527);
}

TEST(RngTest, SameSeedSameStream) {
  gfsa::Rng a(1234), b(1234);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(RngTest, UniformStaysInHalfOpenUnitInterval) {
  gfsa::Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(RngTest, UniformRangeRespectsBounds) {
  gfsa::Rng rng(6);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform(-3.0, 2.0);
    EXPECT_GE(u, -3.0);
    EXPECT_LT(u, 2.0);
  }
}

TEST(RngTest, NextBelowStaysInRange) {
  gfsa::Rng rng(7);
  std::vector<int> seen(10, 0);
  for (int i = 0; i < 5000; ++i) {
    const std::uint64_t v = rng.next_below(10);
    ASSERT_LT(v, 10u);
    ++seen[static_cast<std::size_t>(v)];
  }
  for (int c : seen) EXPECT_GT(c, 300);  // roughly uniform, wide margin
}

TEST(RngTest, NormalMomentsAreSane) {
  gfsa::Rng rng(8);
  const int n = 20000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  EXPECT_NEAR(mean, 0.0, 0.05);
  EXPECT_NEAR(var, 1.0, 0.05);
}

TEST(RngTest, NormalSpareIsDeterministic) {
  gfsa::Rng a(9), b(9);
  for (int i = 0; i < 8; ++i) EXPECT_EQ(a.normal(), b.normal());
}

TEST(RngTest, DeriveGivesDistinctDeterministicStreams) {
  const std::uint64_t s0 = gfsa::Rng::derive(42, 0);
  const std::uint64_t s1 = gfsa::Rng::derive(42, 1);
  EXPECT_NE(s0, s1);
  EXPECT_EQ(s0, gfsa::Rng::derive(42, 0));
  gfsa::Rng a(s0), b(s1);
  EXPECT_NE(a.next_u64(), b.next_u64());
}

}  // namespace
