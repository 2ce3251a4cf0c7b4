#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "zilm/random.hpp"

using namespace zilm;

TEST_SUITE("random") {

TEST_CASE("same seed and stream give the same sequence") {
  RandomSource a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds and substreams diverge") {
  RandomSource a(1), b(2);
  int same = 0;
  for (int i = 0; i < 100; ++i) same += a.next_u32() == b.next_u32();
  CHECK(same < 3);

  const RandomSource root(7);
  RandomSource s1 = root.substream(1), s2 = root.substream(2), s1b = root.substream(1);
  CHECK(s1.next_u64() != s2.next_u64());
  s1 = root.substream(1);
  for (int i = 0; i < 50; ++i) CHECK(s1.next_u64() == s1b.next_u64());
}

namespace {

// Reference pcg32_srandom_r / pcg32_random_r, written out independently.
struct RefPcg32 {
  std::uint64_t state = 0, inc = 0;
  RefPcg32(std::uint64_t initstate, std::uint64_t initseq) {
    inc = (initseq << 1u) | 1u;
    step();
    state += initstate;
    step();
  }
  std::uint32_t step() {
    const std::uint64_t old = state;
    state = old * 6364136223846793005ULL + inc;
    const std::uint32_t xs = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    const std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
    return (xs >> rot) | (xs << ((-rot) & 31u));
  }
};

}  // namespace

TEST_CASE("reference pcg32 reproduces the published demo vector") {
  RefPcg32 ref(42u, 54u);
  const std::uint32_t expected[] = {0xa15c02b7, 0x7b47f409, 0xba1d3330, 0x83d2f293,
                                    0xbfa4784b, 0xcbed606e};
  for (std::uint32_t e : expected) CHECK(ref.step() == e);
}

TEST_CASE("RandomSource is pcg32 seeded through mix64") {
  for (std::uint64_t seed : {0ULL, 1ULL, 123456789ULL}) {
    for (std::uint64_t stream : {0ULL, 3ULL}) {
      RandomSource r(seed, stream);
      RefPcg32 ref(mix64(seed), mix64(stream));
      for (int i = 0; i < 100; ++i) CHECK(r.next_u32() == ref.step());
    }
  }
}

TEST_CASE("uniform stays in [0, 1) with the right moments") {
  RandomSource r(3);
  constexpr int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    sq += u * u;
  }
  const double mean = sum / n;
  CHECK(mean == doctest::Approx(0.5).epsilon(0.01));
  CHECK(sq / n - mean * mean == doctest::Approx(1.0 / 12.0).epsilon(0.01));
}

TEST_CASE("index is unbiased and in range") {
  RandomSource r(5);
  std::vector<int> counts(7, 0);
  constexpr int n = 70000;
  for (int i = 0; i < n; ++i) {
    const auto k = r.index(7);
    REQUIRE(k < 7);
    ++counts[k];
  }
  // 5 standard errors of a binomial(70000, 1/7) count
  for (int c : counts) CHECK(std::abs(c - 10000) < 5 * std::sqrt(70000.0 / 7 * 6 / 7));
}

TEST_CASE("normal deviates have mean 0 and sd 1") {
  RandomSource r(11);
  constexpr int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::sqrt(sq / n) == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("mix64 spreads consecutive keys") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t k = 0; k < 1000; ++k) seen.insert(mix64(k));
  CHECK(seen.size() == 1000);
}

}
