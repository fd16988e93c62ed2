#include <gtest/gtest.h>

#include <algorithm>
#include <cstdint>
#include <vector>

#include "marginal_evo/seed.hpp"

using namespace marginal_evo;

TEST(DeriveSeed, Deterministic) {
  EXPECT_EQ(derive_seed(42, 0, 0, 0), derive_seed(42, 0, 0, 0));
  static_assert(derive_seed(42, 1, 2, 3) == derive_seed(42, 1, 2, 3));
}

TEST(DeriveSeed, ReplicaChangesSeed) { EXPECT_NE(derive_seed(42, 0, 0, 0), derive_seed(42, 0, 0, 1)); }

TEST(DeriveSeed, CoordinatesAreNotInterchangeable) {
  EXPECT_NE(derive_seed(1, 1, 0, 0), derive_seed(1, 0, 1, 0));
  EXPECT_NE(derive_seed(1, 0, 1, 0), derive_seed(1, 0, 0, 1));
  EXPECT_NE(derive_seed(0, 1, 0, 0), derive_seed(1, 0, 0, 0));
}

TEST(DeriveSeed, ReferenceGridHasNoCollisions) {
  for (std::uint64_t master : {0ULL, 1ULL, 7ULL}) {
    std::vector<std::uint64_t> seeds;
    seeds.reserve(48 * 100 * 4);
    for (std::uint64_t k = 0; k < 100; ++k) {
      for (std::uint64_t i = 0; i < 48; ++i) {
        for (std::uint64_t r = 0; r < 4; ++r) seeds.push_back(derive_seed(master, k, i, r));
      }
    }
    std::sort(seeds.begin(), seeds.end());
    EXPECT_EQ(std::adjacent_find(seeds.begin(), seeds.end()), seeds.end());
  }
}

TEST(DeriveSeed, StreamsAndSubSeedsAreDistinct) {
  const std::uint64_t base = derive_seed(3, 5, 7, 1);
  std::vector<std::uint64_t> all{base};
  for (std::uint64_t s = 0; s <= 9; ++s) {
    all.push_back(derive_seed(3, 5, 7, 1, static_cast<Stream>(s)));
    all.push_back(sub_seed(base, static_cast<Stream>(s)));
  }
  std::sort(all.begin(), all.end());
  // derive_seed(..., Evaluate) is `base` itself, every other value is unique
  EXPECT_EQ(std::unique(all.begin(), all.end()) - all.begin(), static_cast<long>(all.size()) - 1);
}
