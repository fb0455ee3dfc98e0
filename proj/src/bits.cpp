#include "pmsim/bits.hpp"

#include <stdexcept>

namespace pmsim {

BitVec::BitVec(int size) : size_(size), words_{} {
  if (size < 0 || size > kMaxMessageBits)
    throw std::invalid_argument("BitVec size out of range [0, " +
                                std::to_string(kMaxMessageBits) + "]");
}

BitVec BitVec::operator^(const BitVec& other) const {
  if (size_ != other.size_) throw std::invalid_argument("BitVec size mismatch in xor");
  BitVec out(size_);
  for (std::size_t w = 0; w < words_.size(); ++w) out.words_[w] = words_[w] ^ other.words_[w];
  return out;
}

BitVec BitVec::slice(int offset, int len) const {
  BitVec out(len);
  for (int i = 0; i < len; ++i) out.set_bit(i, bit(offset + i));
  return out;
}

void BitVec::splice(int offset, const BitVec& src) {
  for (int i = 0; i < src.size(); ++i) set_bit(offset + i, src.bit(i));
}

std::string BitVec::to_string() const {
  std::string s(static_cast<std::size_t>(size_), '0');
  for (int i = 0; i < size_; ++i)
    if (bit(i)) s[static_cast<std::size_t>(i)] = '1';
  return s;
}

Binomial::Binomial(int max_n) {
  if (max_n < 0 || max_n > kMaxMessageBits)
    throw std::invalid_argument("Binomial max_n out of range [0, " +
                                std::to_string(kMaxMessageBits) + "]");
  rows_.resize(static_cast<std::size_t>(max_n) + 1);
  for (int n = 0; n <= max_n; ++n) {
    auto& row = rows_[static_cast<std::size_t>(n)];
    row.resize(static_cast<std::size_t>(n) + 1);
    row[0] = 1;
    row[static_cast<std::size_t>(n)] = 1;
    for (int k = 1; k < n; ++k)
      row[static_cast<std::size_t>(k)] =
          rows_[static_cast<std::size_t>(n) - 1][static_cast<std::size_t>(k) - 1] +
          rows_[static_cast<std::size_t>(n) - 1][static_cast<std::size_t>(k)];
  }
}

BigCount rank_pattern(const BitVec& e, const Binomial& binom) {
  const int K = e.size();
  BigCount r = 0;
  int remaining = e.weight();
  for (int j = 0; j < K && remaining > 0; ++j) {
    if (e.bit(j)) {
      r += binom(K - 1 - j, remaining);
      --remaining;
    }
  }
  return r;
}

BitVec unrank_pattern(int K, int weight, const BigCount& r, const Binomial& binom) {
  if (weight < 0 || weight > K) throw std::out_of_range("unrank_pattern: weight out of range");
  if (r >= binom(K, weight)) throw std::out_of_range("unrank_pattern: rank out of range");
  BitVec e(K);
  BigCount rest = r;
  int remaining = weight;
  for (int j = 0; j < K && remaining > 0; ++j) {
    const BigCount& skip = binom(K - 1 - j, remaining);
    if (rest >= skip) {
      e.set_bit(j, true);
      rest -= skip;
      --remaining;
    }
  }
  return e;
}

}  // namespace pmsim
