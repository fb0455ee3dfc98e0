#pragma once

#include <array>

#include "pmsim/channel.hpp"

namespace pmsim {

// Distribution of the multiplicative posterior update applied to the true
// message in one posterior-matching step, as a function of P0 = P(S_0).
struct WeightDistribution {
  struct Case {
    double value = 0.0;
    double probability = 0.0;
  };
  std::array<Case, 4> cases;
};

// The four (value, probability) cases; probabilities sum to 1.
// Throws std::invalid_argument unless 0 <= P0 <= 1.
WeightDistribution weight_distribution(double P0, const ChannelParams& params);

// Expected multiplicative update E[w]. Equals 1 at P0 in {0, 1} and peaks at
// P0 = 1/2 with value 2(p^2 + q^2).
double expected_weight(double P0, const ChannelParams& params);

// First and second derivatives of expected_weight in P0 (closed forms).
// d1 vanishes at P0 = 1/2; d2 is negative on [0, 1] for p in (0, 1/2).
double expected_weight_d1(double P0, const ChannelParams& params);
double expected_weight_d2(double P0, const ChannelParams& params);

// Lower bound on the expected decoding time of a systematically causal
// encoder: max(K/lambda, K/mu) + (K/C - K)/mu.
double sce_bound(int K, double lambda, double mu, double C);

// Lower bound on the decoding time of a traditional (wait-for-everything)
// encoder: K/lambda + K/(C mu).
double traditional_bound(int K, double lambda, double mu, double C);

// Per-bit error target 1 - (1 - epsilon)^(1/K); meeting it on every bit
// bounds the word error rate by epsilon under independent bit decisions.
double repetition_bit_target(double epsilon, int K);

}  // namespace pmsim
