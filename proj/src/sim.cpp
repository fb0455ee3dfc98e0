#include "pmsim/sim.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "pmsim/analysis.hpp"

namespace pmsim {

const char* scheme_name(Scheme scheme) {
  switch (scheme) {
    case Scheme::Spm: return "spm";
    case Scheme::Sce: return "sce";
    case Scheme::Sbc: return "sbc";
    case Scheme::Repetition: return "repetition";
  }
  return "?";
}

std::optional<Scheme> scheme_from_name(const std::string& name) {
  if (name == "spm") return Scheme::Spm;
  if (name == "sce") return Scheme::Sce;
  if (name == "sbc") return Scheme::Sbc;
  if (name == "repetition") return Scheme::Repetition;
  return std::nullopt;
}

void SimConfig::validate() const {
  if (K < 1 || K > kMaxMessageBits)
    throw std::invalid_argument("K must lie in [1, " + std::to_string(kMaxMessageBits) + "]");
  if (!(params.p > 0.0 && params.p < 0.5))
    throw std::invalid_argument("crossover probability must lie in (0, 1/2)");
  if (!(lambda > 0.0) || !(mu > 0.0))
    throw std::invalid_argument("lambda and mu must be positive");
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::invalid_argument("epsilon must lie in (0, 1)");
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (scheme == Scheme::Sbc) {
    if (N < 2 || N > K || (N & (N - 1)) != 0)
      throw std::invalid_argument("SBC requires N to be a power of 2 in [2, K]");
  }
}

RepetitionEndpoint::RepetitionEndpoint(int K, ChannelParams params, ArrivalSchedule schedule,
                                       double epsilon)
    : K_(K),
      params_(params),
      schedule_(schedule),
      bit_target_(repetition_bit_target(epsilon, K)),
      p_one_(static_cast<std::size_t>(K), 0.5),
      settled_(static_cast<std::size_t>(K), false) {
  if (K < 1 || K > kMaxMessageBits)
    throw std::invalid_argument("message length must lie in [1, " +
                                std::to_string(kMaxMessageBits) + "]");
}

void RepetitionEndpoint::set_message(const BitVec& theta) {
  if (theta.size() != K_) throw std::invalid_argument("message length mismatch");
  theta_ = theta;
}

RepetitionEndpoint::Action RepetitionEndpoint::plan(long long slot) const {
  Action a;
  const int usable = bits_usable_at_slot(slot, K_, schedule_.lambda, schedule_.mu);
  for (int step = 0; step < K_; ++step) {
    const int i = (cursor_ + step) % K_;
    if (i < usable && !settled_[static_cast<std::size_t>(i)]) {
      a.type = Action::Type::SendBit;
      a.bit = i;
      return a;
    }
  }
  return a;
}

int RepetitionEndpoint::encode(const Action& action) const {
  if (!theta_) throw std::logic_error("encode called on an endpoint without the message");
  return theta_->bit(action.bit);
}

void RepetitionEndpoint::apply(const Action& action, int y) {
  const std::size_t i = static_cast<std::size_t>(action.bit);
  const double l1 = y ? params_.q : params_.p;
  const double l0 = y ? params_.p : params_.q;
  const double p1 = p_one_[i];
  const double denom = p1 * l1 + (1.0 - p1) * l0;
  p_one_[i] = p1 * l1 / denom;
  if (!settled_[i] && std::max(p_one_[i], 1.0 - p_one_[i]) >= 1.0 - bit_target_) {
    settled_[i] = true;
    ++settled_count_;
  }
  cursor_ = (action.bit + 1) % K_;
}

BitVec RepetitionEndpoint::decoded_message() const {
  BitVec out(K_);
  for (int i = 0; i < K_; ++i) out.set_bit(i, p_one_[static_cast<std::size_t>(i)] >= 0.5);
  return out;
}

void RepetitionEndpoint::serialize_state(std::string& out) const {
  out.append(reinterpret_cast<const char*>(&cursor_), sizeof cursor_);
  out.append(reinterpret_cast<const char*>(p_one_.data()), p_one_.size() * sizeof(double));
  for (bool s : settled_) out += s ? '1' : '0';
}

namespace {

BitVec random_message(int K, Rng& rng) {
  BitVec theta(K);
  std::uint64_t word = 0;
  for (int i = 0; i < K; ++i) {
    if ((i & 63) == 0) word = rng.next_u64();
    theta.set_bit(i, (word >> (i & 63)) & 1u);
  }
  return theta;
}

template <class Endpoint>
bool states_equal(const Endpoint& a, const Endpoint& b) {
  std::string sa, sb;
  a.serialize_state(sa);
  b.serialize_state(sb);
  return sa == sb;
}

template <class Action>
bool actions_equal(const Action& a, const Action& b) {
  if (a.type != b.type) return false;
  bool eq = true;
  if constexpr (requires { a.bit; }) eq = eq && a.bit == b.bit;
  if constexpr (requires { a.block; }) eq = eq && a.block == b.block;
  return eq;
}

constexpr long long kSlotCap = 10'000'000;

// Shared slot loop. TX carries the message; an optional RX mirrors the
// protocol from feedback alone. lockstep_ok, when given, accumulates
// state-equality checks after every slot; flip_at corrupts the transmitter's
// view of one feedback symbol (indexed among transmitted symbols).
template <class Endpoint>
TrialResult drive(Endpoint& tx, Endpoint* rx, const ChannelParams& params, double mu, Rng& rng,
                  long long flip_at = -1, bool* lockstep_ok = nullptr) {
  using AT = typename Endpoint::Action::Type;
  long long sent = 0;
  long long last_slot = 0;
  for (long long slot = 1; !tx.decoded(); ++slot) {
    if (slot > kSlotCap) throw std::runtime_error("simulation exceeded the slot cap");
    auto action = tx.plan(slot);
    if constexpr (requires { tx.do_combine(); }) {
      if (action.type == AT::Combine) {
        tx.do_combine();
        if (rx) {
          rx->do_combine();
          if (lockstep_ok) *lockstep_ok = *lockstep_ok && states_equal(tx, *rx);
        }
        if (tx.decoded()) break;
        action = tx.plan(slot);
      }
    }
    if (action.type == AT::Idle) continue;
    tx.prepare(action);
    if (rx) {
      // The receiver re-derives the schedule from common knowledge; it must
      // agree with the transmitter's choice.
      if (lockstep_ok) *lockstep_ok = *lockstep_ok && actions_equal(rx->plan(slot), action);
      rx->prepare(action);
    }
    const int x = tx.encode(action);
    const int y = bsc_transmit(x, params, rng);
    const int y_tx = (sent == flip_at) ? (y ^ 1) : y;
    tx.apply(action, y_tx);
    if (rx) {
      rx->apply(action, y);
      if (lockstep_ok) *lockstep_ok = *lockstep_ok && states_equal(tx, *rx);
    }
    ++sent;
    last_slot = slot;
  }
  TrialResult result;
  result.tau = sent;
  result.t_d = static_cast<double>(last_slot) / mu;
  result.decoded = tx.decoded_message();
  return result;
}

}  // namespace

TrialResult run_spm_trial(const SimConfig& config, const BitVec& theta, Rng& rng,
                          const Binomial& binom) {
  SystematicPmEndpoint tx(SystematicPmEndpoint::Mode::NonCausal, config.K, config.params,
                          config.schedule(), config.epsilon, binom);
  tx.set_message(theta);
  TrialResult result = drive(tx, static_cast<SystematicPmEndpoint*>(nullptr), config.params,
                             config.mu, rng);
  result.success = result.decoded == theta;
  return result;
}

TrialResult run_sce(const SimConfig& config, const BitVec& theta, Rng& rng,
                    const Binomial& binom) {
  SystematicPmEndpoint tx(SystematicPmEndpoint::Mode::Causal, config.K, config.params,
                          config.schedule(), config.epsilon, binom);
  tx.set_message(theta);
  TrialResult result = drive(tx, static_cast<SystematicPmEndpoint*>(nullptr), config.params,
                             config.mu, rng);
  result.success = result.decoded == theta;
  return result;
}

TrialResult run_sbc_trial(const SimConfig& config, const BitVec& theta, Rng& rng,
                          const Binomial& binom, int* max_partition_chain) {
  SbcConfig sbc{config.K, config.N, config.params, config.schedule(), config.epsilon};
  SbcEndpoint tx(sbc, binom);
  tx.set_message(theta);
  TrialResult result = drive(tx, static_cast<SbcEndpoint*>(nullptr), config.params, config.mu, rng);
  result.success = result.decoded == theta;
  if (max_partition_chain) *max_partition_chain = tx.max_partition_chain();
  return result;
}

TrialResult run_repetition(const SimConfig& config, const BitVec& theta, Rng& rng) {
  RepetitionEndpoint tx(config.K, config.params, config.schedule(), config.epsilon);
  tx.set_message(theta);
  TrialResult result = drive(tx, static_cast<RepetitionEndpoint*>(nullptr), config.params,
                             config.mu, rng);
  result.success = result.decoded == theta;
  return result;
}

TrialResult run_trial(const SimConfig& config, long long trial_index, const Binomial& binom) {
  Rng rng(config.seed, static_cast<std::uint64_t>(trial_index));
  const BitVec theta = random_message(config.K, rng);
  switch (config.scheme) {
    case Scheme::Spm: return run_spm_trial(config, theta, rng, binom);
    case Scheme::Sce: return run_sce(config, theta, rng, binom);
    case Scheme::Sbc: return run_sbc_trial(config, theta, rng, binom);
    case Scheme::Repetition: return run_repetition(config, theta, rng);
  }
  throw std::logic_error("unknown scheme");
}

TrialResult run_trial(const SimConfig& config, long long trial_index) {
  const Binomial binom(config.K);
  return run_trial(config, trial_index, binom);
}

namespace {

int resolve_threads(const SimConfig& config) {
  int n = config.threads;
  if (n <= 0) {
    if (const char* env = std::getenv("PMSIM_THREADS")) n = std::atoi(env);
  }
  if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (static_cast<long long>(n) > config.trials) n = static_cast<int>(config.trials);
  return n;
}

}  // namespace

SweepRow run_cell(const SimConfig& config) {
  config.validate();
  const Binomial binom(config.K);
  const long long n = config.trials;
  std::vector<TrialResult> results(static_cast<std::size_t>(n));

  const int nthreads = resolve_threads(config);
  if (nthreads <= 1) {
    for (long long i = 0; i < n; ++i)
      results[static_cast<std::size_t>(i)] = run_trial(config, i, binom);
  } else {
    std::atomic<long long> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
      try {
        for (long long i = next.fetch_add(1); i < n; i = next.fetch_add(1))
          results[static_cast<std::size_t>(i)] = run_trial(config, i, binom);
      } catch (...) {
        std::scoped_lock lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
  }

  // Deterministic fold in trial-index order.
  SweepRow row;
  row.scheme = config.scheme;
  row.K = config.K;
  row.N = config.N;
  row.p = config.params.p;
  row.C = config.params.capacity;
  row.lambda = config.lambda;
  row.mu = config.mu;
  row.gamma = config.gamma();
  row.epsilon = config.epsilon;
  row.trials = n;

  double sum_rate = 0.0, sum_tau = 0.0, sum_td = 0.0;
  long long wrong = 0;
  for (const auto& r : results) {
    sum_rate += static_cast<double>(config.K) / static_cast<double>(r.tau);
    sum_tau += static_cast<double>(r.tau);
    sum_td += r.t_d;
    if (!r.success) ++wrong;
  }
  const double dn = static_cast<double>(n);
  row.mean_rate_ektau = sum_rate / dn;
  row.mean_tau = sum_tau / dn;
  row.rate_ketau = static_cast<double>(config.K) / row.mean_tau;
  row.mean_td = sum_td / dn;
  if (n >= 2) {
    double ss = 0.0;
    for (const auto& r : results) {
      const double d = r.t_d - row.mean_td;
      ss += d * d;
    }
    row.stderr_td = std::sqrt(ss / (dn - 1.0) / dn);
  }
  row.fer = static_cast<double>(wrong) / dn;
  return row;
}

std::vector<SweepRow> sweep(const SimConfig& base, const std::vector<double>& gammas,
                            const std::vector<double>& capacities) {
  if (gammas.empty() || capacities.empty())
    throw std::invalid_argument("sweep requires non-empty gamma and capacity lists");
  std::vector<SweepRow> rows;
  rows.reserve(gammas.size() * capacities.size());
  std::uint64_t cell = 0;
  for (const double C : capacities) {
    const ChannelParams params = make_channel(crossover_for_capacity(C));
    for (const double gamma : gammas) {
      SimConfig config = base;
      config.params = params;
      config.lambda = gamma * base.mu;
      config.seed = mix_seed(base.seed, cell++);
      rows.push_back(run_cell(config));
    }
  }
  return rows;
}

bool lockstep_audit(const SimConfig& config, const BitVec& theta, Rng& rng,
                    const Binomial& binom, long long flip_feedback_at, TrialResult* result) {
  config.validate();
  bool ok = true;
  TrialResult r;
  switch (config.scheme) {
    case Scheme::Spm:
    case Scheme::Sce: {
      const auto mode = config.scheme == Scheme::Spm ? SystematicPmEndpoint::Mode::NonCausal
                                                     : SystematicPmEndpoint::Mode::Causal;
      SystematicPmEndpoint tx(mode, config.K, config.params, config.schedule(), config.epsilon,
                              binom);
      SystematicPmEndpoint rx(mode, config.K, config.params, config.schedule(), config.epsilon,
                              binom);
      tx.set_message(theta);
      r = drive(tx, &rx, config.params, config.mu, rng, flip_feedback_at, &ok);
      break;
    }
    case Scheme::Sbc: {
      SbcConfig sbc{config.K, config.N, config.params, config.schedule(), config.epsilon};
      SbcEndpoint tx(sbc, binom);
      SbcEndpoint rx(sbc, binom);
      tx.set_message(theta);
      r = drive(tx, &rx, config.params, config.mu, rng, flip_feedback_at, &ok);
      break;
    }
    case Scheme::Repetition: {
      RepetitionEndpoint tx(config.K, config.params, config.schedule(), config.epsilon);
      RepetitionEndpoint rx(config.K, config.params, config.schedule(), config.epsilon);
      tx.set_message(theta);
      r = drive(tx, &rx, config.params, config.mu, rng, flip_feedback_at, &ok);
      break;
    }
  }
  r.success = r.decoded == theta;
  if (result) *result = r;
  return ok;
}

}  // namespace pmsim
