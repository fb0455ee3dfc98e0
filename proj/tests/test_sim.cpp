#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>

#include "pmsim/analysis.hpp"
#include "pmsim/sim.hpp"
#include "oracle.hpp"

using namespace pmsim;

namespace {

SimConfig base_config(Scheme scheme, int K, double p, double gamma, double epsilon,
                      long long trials, std::uint64_t seed) {
  SimConfig config;
  config.scheme = scheme;
  config.K = K;
  config.N = 4;
  config.params = make_channel(p);
  config.mu = 1.0;
  config.lambda = gamma;
  config.epsilon = epsilon;
  config.trials = trials;
  config.seed = seed;
  return config;
}

}  // namespace

TEST_CASE("run_trial is deterministic in (seed, trial_index)") {
  for (Scheme scheme : {Scheme::Spm, Scheme::Sce, Scheme::Sbc, Scheme::Repetition}) {
    const auto config = base_config(scheme, 16, 0.1, 0.8, 1e-3, 1, 42);
    const Binomial binom(config.K);
    const auto a = run_trial(config, 3, binom);
    const auto b = run_trial(config, 3, binom);
    CHECK(a.tau == b.tau);
    CHECK(a.t_d == b.t_d);
    CHECK(a.decoded == b.decoded);
    const auto c = run_trial(config, 4, binom);
    CHECK((a.tau != c.tau || !(a.decoded == c.decoded)));  // different stream
  }
}

TEST_CASE("per-trial floors: t_d >= tau/mu always, >= K/lambda for causal schemes") {
  for (Scheme scheme : {Scheme::Sce, Scheme::Sbc, Scheme::Repetition}) {
    const auto config = base_config(scheme, 20, 0.08, 0.7, 1e-2, 1, 9);
    const Binomial binom(config.K);
    for (long long t = 0; t < 25; ++t) {
      const auto r = run_trial(config, t, binom);
      CHECK(r.t_d >= static_cast<double>(r.tau) / config.mu);
      CHECK(r.t_d >= static_cast<double>(config.K) / config.lambda);
    }
  }
  // non-causal baseline: t_d equals tau/mu
  const auto config = base_config(Scheme::Spm, 20, 0.08, 0.7, 1e-2, 1, 9);
  const Binomial binom(config.K);
  const auto r = run_trial(config, 0, binom);
  CHECK(r.t_d == doctest::Approx(static_cast<double>(r.tau) / config.mu));
}

TEST_CASE("SCE mean decoding time respects the analytic lower bound") {
  const int K = 60;
  const double gamma = 0.6, eps = 1e-2;
  auto config = base_config(Scheme::Sce, K, 0.05, gamma, eps, 400, 77);
  const auto row = run_cell(config);
  const double bound = sce_bound(K, config.lambda, config.mu, config.params.capacity);
  CHECK(row.mean_td >= bound - 3.0 * row.stderr_td);
  CHECK(row.fer <= eps + 3.0 * std::sqrt(eps * (1 - eps) / 400.0));
}

TEST_CASE("SCE and SBC coincide in phase 1 at gamma = 1 (indistinguishable T_d)") {
  const int K = 24;
  auto sce = base_config(Scheme::Sce, K, 0.1, 1.0, 1e-3, 300, 5);
  auto sbc = base_config(Scheme::Sbc, K, 0.1, 1.0, 1e-3, 300, 5);
  const auto rs = run_cell(sce);
  const auto rb = run_cell(sbc);
  const double pooled = std::sqrt(rs.stderr_td * rs.stderr_td + rb.stderr_td * rb.stderr_td);
  CHECK(std::fabs(rs.mean_td - rb.mean_td) <= 3.0 * pooled);
}

TEST_CASE("repetition sends each bit once when the channel is near-noiseless") {
  const auto config = base_config(Scheme::Repetition, 30, 1e-9, 0.5, 1e-2, 1, 2);
  const Binomial binom(config.K);
  const auto r = run_trial(config, 0, binom);
  CHECK(r.tau == 30);
  CHECK(r.success);
}

TEST_CASE("repetition FER stays within the binomial budget (K = 60)") {
  const double eps = 1e-2;
  auto config = base_config(Scheme::Repetition, 60, 0.05, 0.8, eps, 600, 11);
  const auto row = run_cell(config);
  CHECK(row.fer <= eps + 3.0 * std::sqrt(eps * (1 - eps) / 600.0));
}

TEST_CASE("lockstep audit holds for every scheme") {
  for (Scheme scheme : {Scheme::Spm, Scheme::Sce, Scheme::Sbc, Scheme::Repetition}) {
    const auto config = base_config(scheme, 16, 0.12, 0.75, 1e-2, 1, 21);
    const Binomial binom(config.K);
    for (std::uint64_t t = 0; t < 25; ++t) {
      Rng theta_rng(config.seed, t);
      const BitVec theta = pmsim::testing::random_message(config.K, theta_rng);
      Rng rng(1000 + t, 3);
      CHECK(lockstep_audit(config, theta, rng, binom));
    }
  }
}

TEST_CASE("a corrupted feedback symbol breaks lockstep (negative control)") {
  for (Scheme scheme : {Scheme::Spm, Scheme::Sbc, Scheme::Repetition}) {
    const auto config = base_config(scheme, 16, 0.12, 0.75, 1e-2, 1, 22);
    const Binomial binom(config.K);
    Rng theta_rng(config.seed, 0);
    const BitVec theta = pmsim::testing::random_message(config.K, theta_rng);
    Rng rng(7, 3);
    CHECK(!lockstep_audit(config, theta, rng, binom, /*flip_feedback_at=*/4));
  }
}

TEST_CASE("auditing does not change the trial outcome") {
  const auto config = base_config(Scheme::Sbc, 20, 0.1, 0.7, 1e-3, 1, 33);
  const Binomial binom(config.K);
  Rng theta_rng(config.seed, 0);
  const BitVec theta = pmsim::testing::random_message(config.K, theta_rng);

  Rng rng_plain(55, 1);
  const auto plain = run_sbc_trial(config, theta, rng_plain, binom);

  Rng rng_audit(55, 1);
  TrialResult audited;
  CHECK(lockstep_audit(config, theta, rng_audit, binom, -1, &audited));
  CHECK(plain.tau == audited.tau);
  CHECK(plain.t_d == audited.t_d);
  CHECK(plain.decoded == audited.decoded);
}

TEST_CASE("run_cell is byte-stable across parallelism levels") {
  auto config = base_config(Scheme::Sbc, 24, 0.1, 0.8, 1e-3, 64, 17);
  config.threads = 1;
  const auto serial = run_cell(config);
  config.threads = 4;
  const auto parallel = run_cell(config);
  CHECK(serial.mean_rate_ektau == parallel.mean_rate_ektau);
  CHECK(serial.mean_td == parallel.mean_td);
  CHECK(serial.stderr_td == parallel.stderr_td);
  CHECK(serial.fer == parallel.fer);
  CHECK(serial.mean_tau == parallel.mean_tau);
}

TEST_CASE("sweep emits capacity-major rows with scheme-tagged cells") {
  auto config = base_config(Scheme::Sce, 16, 0.1, 1.0, 1e-2, 8, 3);
  const auto rows = sweep(config, {0.5, 1.0}, {0.4, 0.7});
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].C == doctest::Approx(0.4).epsilon(1e-9));
  CHECK(rows[1].C == doctest::Approx(0.4).epsilon(1e-9));
  CHECK(rows[2].C == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(rows[0].gamma == doctest::Approx(0.5));
  CHECK(rows[1].gamma == doctest::Approx(1.0));
  for (const auto& row : rows) {
    CHECK(row.scheme == Scheme::Sce);
    CHECK(row.mean_rate_ektau <= 1.0);
    CHECK(row.mean_rate_ektau > 0.0);
    CHECK(row.mean_td >= static_cast<double>(row.K) / row.lambda);
  }
}

TEST_CASE("config validation rejects bad fields") {
  auto config = base_config(Scheme::Sbc, 16, 0.1, 0.8, 1e-3, 1, 1);
  config.N = 3;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config.N = 32;  // > K
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = base_config(Scheme::Spm, 16, 0.1, 0.8, 1e-3, 0, 1);
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = base_config(Scheme::Spm, 16, 0.1, 0.8, 2.0, 5, 1);
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
}
