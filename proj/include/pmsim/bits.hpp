#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace pmsim {

// Exact counter for message-set sizes and rank ranges. Fixed 256-bit width
// keeps group arithmetic allocation-free; 2^K and all binomial(K, w) fit for
// K <= kMaxMessageBits.
using BigCount = boost::multiprecision::uint256_t;

inline constexpr int kMaxMessageBits = 255;

inline double to_double(const BigCount& v) { return v.convert_to<double>(); }

// Fixed-capacity bit vector for messages and error patterns. Bit 0 is the
// first message bit (most significant position in the lexicographic order
// used by rank_pattern/unrank_pattern).
class BitVec {
 public:
  BitVec() : size_(0), words_{} {}
  explicit BitVec(int size);

  int size() const { return size_; }
  bool bit(int i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
  void set_bit(int i, bool v) {
    const std::uint64_t m = std::uint64_t{1} << (i & 63);
    if (v)
      words_[i >> 6] |= m;
    else
      words_[i >> 6] &= ~m;
  }

  int weight() const {
    int w = 0;
    for (auto word : words_) w += std::popcount(word);
    return w;
  }

  BitVec operator^(const BitVec& other) const;
  bool operator==(const BitVec& other) const = default;

  // Slice of [offset, offset + len) as a new vector of length len.
  BitVec slice(int offset, int len) const;
  // Writes src into positions [offset, offset + src.size()).
  void splice(int offset, const BitVec& src);

  std::string to_string() const;  // e.g. "0110"

 private:
  int size_;
  std::array<std::uint64_t, 4> words_;
};

// Pascal-triangle table of exact binomial coefficients up to max_n. Immutable
// after construction; safe to share across threads.
class Binomial {
 public:
  explicit Binomial(int max_n);

  const BigCount& operator()(int n, int k) const {
    if (k < 0 || k > n) return zero_;
    return rows_[n][k];
  }
  int max_n() const { return static_cast<int>(rows_.size()) - 1; }

 private:
  std::vector<std::vector<BigCount>> rows_;
  BigCount zero_ = 0;
};

// Index of pattern e within the lexicographic enumeration (as binary strings,
// most significant bit first) of all length-K vectors of the same weight.
// Combinatorial number system, O(K).
BigCount rank_pattern(const BitVec& e, const Binomial& binom);

// Inverse of rank_pattern. Throws std::out_of_range if r >= binomial(K, weight).
BitVec unrank_pattern(int K, int weight, const BigCount& r, const Binomial& binom);

}  // namespace pmsim
