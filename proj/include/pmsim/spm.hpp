#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pmsim/bits.hpp"
#include "pmsim/channel.hpp"

namespace pmsim {

// A Hamming-weight equivalence-class slice: all messages at distance `weight`
// from the received systematic word whose error-pattern ranks fall in
// [lo, hi), sharing the per-message posterior rho.
struct Group {
  int weight = 0;
  BigCount lo = 0;
  BigCount hi = 0;
  double rho = 0.0;
  double count_d = 0.0;  // cached double(hi - lo)

  Group() = default;
  Group(int w, BigCount lo_, BigCount hi_, double rho_)
      : weight(w), lo(std::move(lo_)), hi(std::move(hi_)), rho(rho_) {
    count_d = to_double(hi - lo);
  }

  BigCount count() const { return hi - lo; }
  double mass() const { return rho * count_d; }
};

// The decoder state: groups sorted by descending rho (ties: ascending weight,
// then ascending lo), unit total mass.
struct GroupList {
  std::vector<Group> groups;
  long long time = 0;  // channel-symbol counter, starts at K after the systematic phase

  double total_mass() const;
  double max_rho() const { return groups.empty() ? 0.0 : groups.front().rho; }
  BigCount total_count() const;
};

// Balanced bipartition of a GroupList. The source list is stored with the
// boundary-group split already applied, so S0 is the prefix [0, s0_end) and
// S1 the suffix.
struct Partition {
  GroupList source;
  std::size_t s0_end = 0;
  double p0 = 0.0;

  std::span<const Group> s0() const { return {source.groups.data(), s0_end}; }
  std::span<const Group> s1() const {
    return {source.groups.data() + s0_end, source.groups.size() - s0_end};
  }
};

// Ordering used everywhere a group list must be sorted or merged.
bool group_before(const Group& a, const Group& b);

// K+1 groups over error patterns relative to the received systematic word:
// group i has count binomial(K, i) and rho = q^(K-i) p^i. Total mass is
// (q + p)^K = 1.
GroupList init_groups(int K, const ChannelParams& params, const Binomial& binom);

// Greedy balanced partition: descending-rho prefix into S0 while its mass
// stays below 1/2, then the boundary group is split at message granularity
// (member count rounded to bring p0 nearest 1/2, ties down). Guarantees
// |p0 - 1/2| <= max_rho / 2. Throws std::invalid_argument on an empty list.
Partition make_partition(GroupList list);

// Rounding helper shared with the forest splitter: nearest integer in
// [0, count] to x, ties toward zero.
BigCount clamp_round_count(double x, const BigCount& count);

// Which set of the partition covers the error pattern of `theta` relative to
// `received`. Returns 0 or 1; throws std::logic_error if neither set covers
// it (an internal invariant violation).
int locate(const BitVec& theta, const BitVec& received, const Partition& partition,
           const Binomial& binom);

// Set-membership of a (weight, rank) pair under the partition, used by the
// sub-block machinery which tracks ranks directly.
int locate_rank(int weight, const BigCount& rank, const Partition& partition);

// Bayes update for observation y: members of S_y scale by q/D and the rest by
// p/D with D = P(S_y) q + (1 - P(S_y)) p, then the sets are merged back into
// one sorted list, equal-rho abutting siblings are coalesced, and the mass is
// renormalized to 1. Increments the symbol counter.
GroupList apply_update(Partition partition, int y, const ChannelParams& params);

// If the maximum per-message posterior has reached 1 - epsilon, the decoded
// message (argmax; ties by lowest weight then lowest rank), else nothing.
std::optional<BitVec> decode_status(const GroupList& list, double epsilon,
                                    const BitVec& received, const Binomial& binom);

// One endpoint of a systematic posterior-matching link. Covers both the
// non-causal encoder (every slot carries a symbol) and the systematically
// causal variant (systematic bits leave as they arrive; posterior matching
// only after the whole message is in). The transmitter holds the message;
// the receiver runs the identical state machine without it.
class SystematicPmEndpoint {
 public:
  enum class Mode { NonCausal, Causal };

  struct Action {
    enum class Type { Idle, SendSystematic, SendPm } type = Type::Idle;
    int bit = -1;
  };

  SystematicPmEndpoint(Mode mode, int K, ChannelParams params, ArrivalSchedule schedule,
                       double epsilon, const Binomial& binom);

  void set_message(const BitVec& theta);

  Action plan(long long slot) const;
  void prepare(const Action& action);
  int encode(const Action& action) const;
  void apply(const Action& action, int y);

  bool decoded() const { return decoded_.has_value(); }
  const BitVec& decoded_message() const { return *decoded_; }

  const GroupList& list() const { return list_; }
  const Partition& pending_partition() const { return *pending_; }
  const BitVec& received() const { return received_; }

  // Decoder-visible state only (no transmitter-side extras), for lockstep
  // comparison between endpoints.
  void serialize_state(std::string& out) const;

 private:
  Mode mode_;
  int K_;
  ChannelParams params_;
  ArrivalSchedule schedule_;
  double epsilon_;
  const Binomial& binom_;

  std::optional<BitVec> theta_;
  BitVec received_;
  int systematic_sent_ = 0;
  GroupList list_;
  std::optional<Partition> pending_;
  std::optional<BitVec> decoded_;
};

struct SpmRunResult {
  long long tau = 0;        // symbols transmitted (idle slots excluded)
  long long last_slot = 0;  // channel slot of the final symbol
  BitVec decoded;
  BitVec received;               // systematic word at the receiver
  std::vector<int> transcript;   // received symbols y_1..y_tau
};

// Algorithm run end to end in non-causal mode: K systematic symbols, then
// partition/transmit/update until the posterior threshold fires.
SpmRunResult run_spm(int K, const ChannelParams& params, double epsilon, const BitVec& theta,
                     Rng& rng, const Binomial& binom);

}  // namespace pmsim
