#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pmsim/bits.hpp"
#include "pmsim/channel.hpp"
#include "pmsim/sbc.hpp"
#include "pmsim/spm.hpp"

namespace pmsim {

enum class Scheme { Spm, Sce, Sbc, Repetition };

const char* scheme_name(Scheme scheme);
std::optional<Scheme> scheme_from_name(const std::string& name);

struct SimConfig {
  int K = 240;
  int N = 8;  // sub-block count; used by the SBC scheme only
  ChannelParams params;
  double lambda = 1.0;
  double mu = 1.0;
  double epsilon = 1e-3;
  long long trials = 1;
  std::uint64_t seed = 1;
  Scheme scheme = Scheme::Spm;
  int threads = 0;  // 0: PMSIM_THREADS env var, else hardware concurrency

  double gamma() const { return lambda / mu; }
  ArrivalSchedule schedule() const { return ArrivalSchedule{lambda, mu}; }
  void validate() const;  // throws std::invalid_argument on a bad field
};

struct TrialResult {
  long long tau = 0;   // transmitted symbols (idle slots excluded)
  double t_d = 0.0;    // decoding time in seconds
  bool success = false;
  BitVec decoded;
};

// Per-bit repetition endpoint: each slot resends one arrived, unsettled bit
// (round-robin); a bit settles when its Bayes posterior reaches
// 1 - repetition_bit_target(epsilon, K). Decodes when every bit is settled.
class RepetitionEndpoint {
 public:
  struct Action {
    enum class Type { Idle, SendBit } type = Type::Idle;
    int bit = -1;
  };

  RepetitionEndpoint(int K, ChannelParams params, ArrivalSchedule schedule, double epsilon);

  void set_message(const BitVec& theta);

  Action plan(long long slot) const;
  void prepare(const Action&) {}
  int encode(const Action& action) const;
  void apply(const Action& action, int y);

  bool decoded() const { return settled_count_ == K_; }
  BitVec decoded_message() const;

  void serialize_state(std::string& out) const;

 private:
  int K_;
  ChannelParams params_;
  ArrivalSchedule schedule_;
  double bit_target_;

  std::optional<BitVec> theta_;
  std::vector<double> p_one_;  // posterior that the bit equals 1
  std::vector<bool> settled_;
  int settled_count_ = 0;
  int cursor_ = 0;  // round-robin position
};

// Uniform theta drawn from a deterministic per-trial stream, then the
// configured scheme end to end.
TrialResult run_trial(const SimConfig& config, long long trial_index, const Binomial& binom);
TrialResult run_trial(const SimConfig& config, long long trial_index);

// Single-scheme runners on a caller-supplied message and rng.
TrialResult run_sce(const SimConfig& config, const BitVec& theta, Rng& rng,
                    const Binomial& binom);
TrialResult run_repetition(const SimConfig& config, const BitVec& theta, Rng& rng);
TrialResult run_spm_trial(const SimConfig& config, const BitVec& theta, Rng& rng,
                          const Binomial& binom);
TrialResult run_sbc_trial(const SimConfig& config, const BitVec& theta, Rng& rng,
                          const Binomial& binom, int* max_partition_chain = nullptr);

// Aggregated statistics for one (scheme, channel, gamma) cell.
struct SweepRow {
  Scheme scheme = Scheme::Spm;
  int K = 0;
  int N = 0;
  double p = 0.0;
  double C = 0.0;
  double lambda = 0.0;
  double mu = 0.0;
  double gamma = 0.0;
  double epsilon = 0.0;
  long long trials = 0;
  double mean_rate_ektau = 0.0;  // E[K / tau]
  double rate_ketau = 0.0;       // K / E[tau]
  double mean_td = 0.0;
  double stderr_td = 0.0;
  double fer = 0.0;
  double mean_tau = 0.0;
};

// Runs all trials of one configuration (in parallel when allowed) and folds
// them in trial-index order, so the row is deterministic at any parallelism.
SweepRow run_cell(const SimConfig& config);

// Cross product over capacity and gamma lists, capacity-major. Each cell gets
// an independent seed stream derived from (seed, cell index).
std::vector<SweepRow> sweep(const SimConfig& base, const std::vector<double>& gammas,
                            const std::vector<double>& capacities);

// Runs transmitter and receiver as separately-held state instances that share
// only transmitted symbols and feedback; true iff the decoder states are
// bit-identical after every slot. flip_feedback_at >= 0 corrupts the
// transmitter's view of that feedback symbol (0-indexed) as a negative
// control. The trial outcome, when wanted, lands in *result.
bool lockstep_audit(const SimConfig& config, const BitVec& theta, Rng& rng,
                    const Binomial& binom, long long flip_feedback_at = -1,
                    TrialResult* result = nullptr);

}  // namespace pmsim
