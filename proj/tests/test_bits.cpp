#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "pmsim/bits.hpp"
#include "pmsim/channel.hpp"
#include "oracle.hpp"

using namespace pmsim;

namespace {
BitVec from_string(const std::string& s) {
  BitVec v(static_cast<int>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) v.set_bit(static_cast<int>(i), s[i] == '1');
  return v;
}
}  // namespace

TEST_CASE("binomial table matches known values") {
  Binomial binom(30);
  CHECK(binom(0, 0) == 1);
  CHECK(binom(4, 2) == 6);
  CHECK(binom(30, 15) == 155117520);
  CHECK(binom(5, 7) == 0);
  // row sums are powers of two
  BigCount sum = 0;
  for (int k = 0; k <= 20; ++k) sum += binom(20, k);
  CHECK(sum == BigCount(1) << 20);
}

TEST_CASE("rank follows the lexicographic enumeration of weight-2 strings") {
  Binomial binom(4);
  const char* order[] = {"0011", "0101", "0110", "1001", "1010", "1100"};
  for (int r = 0; r < 6; ++r) {
    CHECK(rank_pattern(from_string(order[r]), binom) == BigCount(r));
    CHECK(unrank_pattern(4, 2, BigCount(r), binom).to_string() == order[r]);
  }
}

TEST_CASE("rank of the all-zeros pattern is 0") {
  Binomial binom(9);
  CHECK(rank_pattern(BitVec(9), binom) == 0);
  CHECK(unrank_pattern(9, 0, 0, binom) == BitVec(9));
}

TEST_CASE("unrank rejects out-of-range ranks") {
  Binomial binom(6);
  CHECK_THROWS_AS(unrank_pattern(6, 2, binom(6, 2), binom), std::out_of_range);
}

TEST_CASE("unrank inverts rank for every pattern up to K = 12") {
  const int K = 12;
  Binomial binom(K);
  for (std::uint32_t m = 0; m < (1u << K); ++m) {
    const BitVec e = pmsim::testing::bitvec_of(m, K);
    const BitVec back = unrank_pattern(K, e.weight(), rank_pattern(e, binom), binom);
    REQUIRE(back == e);
  }
}

TEST_CASE("ranks are dense within each weight class") {
  const int K = 10;
  Binomial binom(K);
  std::vector<int> seen(static_cast<std::size_t>(K) + 1, 0);
  for (std::uint32_t m = 0; m < (1u << K); ++m) {
    const BitVec e = pmsim::testing::bitvec_of(m, K);
    const BigCount r = rank_pattern(e, binom);
    REQUIRE(r < binom(K, e.weight()));
    ++seen[static_cast<std::size_t>(e.weight())];
  }
  for (int w = 0; w <= K; ++w)
    CHECK(BigCount(seen[static_cast<std::size_t>(w)]) == binom(K, w));
}

TEST_CASE("bitvec slice and splice round-trip") {
  Rng rng(99, 0);
  const BitVec v = pmsim::testing::random_message(37, rng);
  BitVec rebuilt(37);
  rebuilt.splice(0, v.slice(0, 20));
  rebuilt.splice(20, v.slice(20, 17));
  CHECK(rebuilt == v);
  CHECK(v.slice(5, 11).size() == 11);
}
