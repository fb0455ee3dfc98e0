#pragma once

#include <cstdint>
#include <random>

namespace pmsim {

// BSC(p) with its derived quantities. p is the canonical parameter; the
// capacity is 1 - H(p).
struct ChannelParams {
  double p = 0.0;         // crossover probability, in (0, 1/2)
  double q = 1.0;         // 1 - p
  double capacity = 1.0;  // bits per channel use
};

// Validates 0 < p < 1/2 and fills in q and capacity.
ChannelParams make_channel(double p);

// 1 + p log2 p + q log2 q with 0 log 0 = 0. Accepts the closed range
// [0, 1/2]; throws std::invalid_argument outside it.
double capacity(double p);

// Unique p in (0, 1/2) with capacity(p) = C, by bisection to |p| tolerance
// 1e-12. Throws std::invalid_argument unless 0 < C < 1.
double crossover_for_capacity(double C);

// Message bits available at time t (seconds): min(K, floor(t * lambda)).
// Bit i (1-indexed) becomes available exactly at time i / lambda.
int bits_available(double t, int K, double lambda);

// Bits whose arrival instant i/lambda lies strictly before the instant
// slot/mu of channel slot `slot`, capped at K. This is the causality rule for
// what a symbol scheduled in that slot may encode.
int bits_usable_at_slot(long long slot, int K, double lambda, double mu);

// Message-arrival / channel-symbol clocks. gamma = lambda / mu.
struct ArrivalSchedule {
  double lambda = 1.0;  // bits per second
  double mu = 1.0;      // symbols per second
  double gamma() const { return lambda / mu; }
};

ArrivalSchedule make_schedule(double lambda, double mu);

// Deterministic random source. A thin wrapper over mt19937_64 with an
// explicitly specified seeding mix and double conversion so that streams are
// reproducible for a given (seed, stream) pair independent of library
// internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1), 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 scramble used to derive independent per-trial seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

// Sends x over the BSC: returns x with probability q, 1-x with probability p.
// Consumes exactly one draw from rng.
int bsc_transmit(int x, const ChannelParams& params, Rng& rng);

}  // namespace pmsim
