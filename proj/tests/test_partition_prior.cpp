#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "mapsep/partition_prior.hpp"

using namespace mapsep;

TEST_CASE("CRP eppf on the known small cases") {
  CrpPrior crp(1.0);
  CHECK(crp.log_eppf(std::vector<int>{1}) == 0.0);
  CHECK(crp.log_eppf(std::vector<int>{3}) == Catch::Approx(std::log(1.0 / 3.0)).epsilon(1e-14));
  CHECK(crp.log_eppf(std::vector<int>{1, 1, 1}) ==
        Catch::Approx(std::log(1.0 / 6.0)).epsilon(1e-14));
}

TEST_CASE("CRP rejects bad arguments") {
  CHECK_THROWS_AS(CrpPrior(0.0), usage_error);
  CHECK_THROWS_AS(CrpPrior(-1.5), usage_error);
  CrpPrior crp(1.0);
  CHECK_THROWS_AS(crp.log_eppf(std::vector<int>{}), usage_error);
  CHECK_THROWS_AS(crp.log_eppf(std::vector<int>{2, 0}), usage_error);
}

TEST_CASE("eppf depends on the size multiset only, bitwise") {
  CrpPrior crp(0.7);
  std::vector<int> sizes{4, 1, 2, 2, 7, 1};
  const double reference = crp.log_eppf(sizes);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::shuffle(sizes.begin(), sizes.end(), rng);
    CHECK(crp.log_eppf(sizes) == reference);
  }
}

TEST_CASE("eppf total mass is one") {
  for (double alpha : {0.5, 1.0, 2.0}) {
    CrpPrior crp(alpha);
    for (int n : {1, 3, 8})
      CHECK(eppf_total_mass(crp, n) == Catch::Approx(1.0).margin(1e-10));
  }
  UniformPartitionPrior uniform;
  CHECK(eppf_total_mass(uniform, 6) == Catch::Approx(1.0).margin(1e-10));
  CHECK_THROWS_AS(eppf_total_mass(uniform, 13), usage_error);
}

TEST_CASE("eppf equals the sequential seating probability") {
  // Customer i joins a block of current size s with probability s/(alpha+i-1)
  // and opens a new block with probability alpha/(alpha+i-1).
  for (double alpha : {0.5, 1.0, 2.0}) {
    CrpPrior crp(alpha);
    for (int n = 2; n <= 6; ++n) {
      for_each_partition(n, [&](const std::vector<int>& rgs) {
        double prob = 1.0;
        std::vector<int> counts(static_cast<std::size_t>(n), 0);
        for (int i = 0; i < n; ++i) {
          const int block = rgs[static_cast<std::size_t>(i)];
          if (counts[static_cast<std::size_t>(block)] == 0)
            prob *= alpha / (alpha + i);
          else
            prob *= counts[static_cast<std::size_t>(block)] / (alpha + i);
          ++counts[static_cast<std::size_t>(block)];
        }
        std::vector<int> sizes;
        for (int c : counts)
          if (c > 0) sizes.push_back(c);
        CHECK(std::exp(crp.log_eppf(sizes)) == Catch::Approx(prob).epsilon(1e-12));
      });
    }
  }
}

TEST_CASE("uniform prior is constant at -ln Bell(n)") {
  UniformPartitionPrior uniform;
  CHECK(uniform.log_eppf(std::vector<int>{2, 3}) ==
        Catch::Approx(-std::log(52.0)).epsilon(1e-13));
  CHECK(uniform.log_eppf(std::vector<int>{5}) == uniform.log_eppf(std::vector<int>{1, 1, 1, 1, 1}));
}
