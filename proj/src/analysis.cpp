#include "pmsim/analysis.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pmsim {

namespace {
void check_p0(double P0) {
  if (!(P0 >= 0.0 && P0 <= 1.0))
    throw std::invalid_argument("P0 must lie in [0, 1], got " + std::to_string(P0));
}
}  // namespace

WeightDistribution weight_distribution(double P0, const ChannelParams& params) {
  check_p0(P0);
  const double p = params.p, q = params.q;
  const double d0 = P0 * q + (1.0 - P0) * p;  // P(y = 0)
  const double d1 = P0 * p + (1.0 - P0) * q;  // P(y = 1)
  WeightDistribution w;
  w.cases[0] = {q / d0, P0 * q};
  w.cases[1] = {p / d1, P0 * p};
  w.cases[2] = {p / d0, (1.0 - P0) * p};
  w.cases[3] = {q / d1, (1.0 - P0) * q};
  return w;
}

double expected_weight(double P0, const ChannelParams& params) {
  check_p0(P0);
  const double p = params.p, q = params.q;
  const double d0 = P0 * q + (1.0 - P0) * p;
  const double d1 = P0 * p + (1.0 - P0) * q;
  return q * (P0 * q) / d0 + p * (P0 * p) / d1 + p * ((1.0 - P0) * p) / d0 +
         q * ((1.0 - P0) * q) / d1;
}

double expected_weight_d1(double P0, const ChannelParams& params) {
  check_p0(P0);
  const double p = params.p, q = params.q;
  // P0(q - p) + p and -(P0(q - p) - q), written so both evaluate to the
  // bit-identical sum (q + p)/2 at P0 = 1/2, making the derivative exactly 0
  // there.
  const double a = P0 * q + (1.0 - P0) * p;
  const double b = P0 * p + (1.0 - P0) * q;
  const double num = p * q * (q - p);
  return num / (a * a) - num / (b * b);
}

double expected_weight_d2(double P0, const ChannelParams& params) {
  check_p0(P0);
  const double p = params.p, q = params.q;
  const double a = P0 * q + (1.0 - P0) * p;   // P0(q - p) + p
  const double b = P0 * p + (1.0 - P0) * q;   // q - P0(q - p)
  const double num = 2.0 * p * q * (q - p) * (q - p);
  return -num / (a * a * a) - num / (b * b * b);
}

double sce_bound(int K, double lambda, double mu, double C) {
  if (K < 1 || !(lambda > 0.0) || !(mu > 0.0) || !(C > 0.0 && C < 1.0))
    throw std::invalid_argument("sce_bound: need K >= 1, lambda > 0, mu > 0, 0 < C < 1");
  const double k = static_cast<double>(K);
  return std::max(k / lambda, k / mu) + (k / C - k) / mu;
}

double traditional_bound(int K, double lambda, double mu, double C) {
  if (K < 1 || !(lambda > 0.0) || !(mu > 0.0) || !(C > 0.0 && C < 1.0))
    throw std::invalid_argument("traditional_bound: need K >= 1, lambda > 0, mu > 0, 0 < C < 1");
  const double k = static_cast<double>(K);
  return k / lambda + k / (C * mu);
}

double repetition_bit_target(double epsilon, int K) {
  if (!(epsilon > 0.0 && epsilon < 1.0) || K < 1)
    throw std::invalid_argument("repetition_bit_target: need 0 < epsilon < 1 and K >= 1");
  return 1.0 - std::pow(1.0 - epsilon, 1.0 / static_cast<double>(K));
}

}  // namespace pmsim
