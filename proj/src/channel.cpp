#include "pmsim/channel.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pmsim {

ChannelParams make_channel(double p) {
  if (!(p > 0.0 && p < 0.5))
    throw std::invalid_argument("crossover probability must lie in (0, 1/2), got " +
                                std::to_string(p));
  ChannelParams params;
  params.p = p;
  params.q = 1.0 - p;
  params.capacity = capacity(p);
  return params;
}

double capacity(double p) {
  if (!(p >= 0.0 && p <= 0.5))
    throw std::invalid_argument("capacity: p must lie in [0, 1/2], got " + std::to_string(p));
  const double q = 1.0 - p;
  const double hp = p > 0.0 ? p * std::log2(p) : 0.0;
  const double hq = q > 0.0 ? q * std::log2(q) : 0.0;
  return 1.0 + hp + hq;
}

double crossover_for_capacity(double C) {
  if (!(C > 0.0 && C < 1.0))
    throw std::invalid_argument("crossover_for_capacity: C must lie in (0, 1), got " +
                                std::to_string(C));
  // capacity is strictly decreasing on [0, 1/2].
  double lo = 0.0, hi = 0.5;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (capacity(mid) > C)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

int bits_available(double t, int K, double lambda) {
  if (t < 0.0) throw std::invalid_argument("bits_available: t must be >= 0");
  const double n = std::floor(t * lambda);
  if (n >= static_cast<double>(K)) return K;
  return static_cast<int>(n);
}

int bits_usable_at_slot(long long slot, int K, double lambda, double mu) {
  // Strict comparison i * mu < slot * lambda, with a local fixup so exact
  // rational coincidences (bit arriving at the slot instant) are excluded.
  const double rhs = static_cast<double>(slot) * lambda;
  long long i = static_cast<long long>(std::floor(rhs / mu));
  while (i > 0 && !(static_cast<double>(i) * mu < rhs)) --i;
  while (static_cast<double>(i + 1) * mu < rhs) ++i;
  if (i < 0) i = 0;
  if (i > K) i = K;
  return static_cast<int>(i);
}

ArrivalSchedule make_schedule(double lambda, double mu) {
  if (!(lambda > 0.0) || !(mu > 0.0))
    throw std::invalid_argument("arrival schedule requires lambda > 0 and mu > 0");
  return ArrivalSchedule{lambda, mu};
}

namespace {
std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}
}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t state = a;
  std::uint64_t x = splitmix64(state);
  state = x ^ b;
  return splitmix64(state);
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream) : engine_(mix_seed(seed, stream)) {}

int bsc_transmit(int x, const ChannelParams& params, Rng& rng) {
  const bool flip = rng.next_unit() < params.p;
  return flip ? (x ^ 1) : x;
}

}  // namespace pmsim
