#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pmsim/bits.hpp"
#include "pmsim/channel.hpp"
#include "pmsim/spm.hpp"

namespace pmsim {

// Sub-block lengths: ceil(K/N) for the first K mod N blocks, floor(K/N) for
// the rest. N must be a power of two and N <= K.
std::vector<int> segment(int K, int N);

struct TreeNode;
using NodePtr = std::shared_ptr<const TreeNode>;

// A reference to a tree node together with the lazy multiplier that scales
// every posterior below it. Nodes are immutable once built; all mutation
// happens in slots (top level) or by creating new nodes (splits).
struct Slot {
  double mult = 1.0;
  std::uint64_t id = 0;  // stable identity, used only at the top level
  NodePtr node;

  double mass() const;
  double max_rho() const;
  double min_rho() const;
  const BigCount& count() const;
};

// Product-set node over two adjacent spans of sub-blocks. A node represents
// every concatenation of a sequence from its left branch with one from its
// right branch; the per-message posterior is the product of the two segment
// posteriors times the accumulated multipliers.
struct TreeNode {
  int level = 1;    // 1 = leaf pair (two sub-blocks); tops sit at log2(N)
  int span_lo = 0;  // sub-block index range [span_lo, span_hi)
  int span_hi = 0;
  BigCount count = 0;
  double rel_mass = 0.0;  // sum of member posteriors, relative to this node's frame
  double rel_max = 0.0;   // largest member posterior in the same frame
  double rel_min = 0.0;   // smallest member posterior in the same frame

  // level >= 2: ordered sets of lower-level nodes.
  std::vector<Slot> left, right;
  // level == 1: leaf group collections over sub-blocks span_lo and span_lo+1.
  std::vector<Group> lgroups, rgroups;
};

NodePtr make_level1_node(int span_lo, std::vector<Group> lgroups, std::vector<Group> rgroups);
NodePtr make_inner_node(int level, int span_lo, int span_hi, std::vector<Slot> left,
                        std::vector<Slot> right);

// The full-message decoder state: top-level nodes, mutually exclusive and
// collectively exhaustive (counts sum to 2^K, masses to 1), sorted by
// descending mass for partitioning.
struct ForestList {
  std::vector<Slot> tops;
  std::uint64_t next_id = 1;
  long long time = 0;

  double total_mass() const;
  double max_rho() const;
  BigCount total_count() const;
};

// Cross nodes over the balanced bipartitions of two adjacent sub-block lists:
// S0 x S0, S0 x S1, S1 x S0, S1 x S1 (zero-count products are dropped).
// span_lo is the index of block `a`.
std::vector<Slot> build_level1(const GroupList& a, const GroupList& b, int span_lo);

// Combines two quads of level-(l-1) nodes covering adjacent spans into four
// level-l nodes. Each quad is paired for mass balance (sorted descending,
// {1st,4th} vs {2nd,3rd}); the outputs are the four cross products.
std::vector<Slot> combine_level(std::vector<Slot> a, std::vector<Slot> b);

// Bottom-up combination of all sub-block lists into the four-tree forest.
ForestList combine_all(const std::vector<GroupList>& blocks);

// Result of splitting a slot at a target mass. When the target rounds to one
// end at leaf-member granularity the cut degenerates: no new nodes are made
// and take_all says which side receives the whole slot.
struct SlotSplit {
  bool split = false;
  bool take_all = false;
  Slot first, second;
  int chain = 0;  // number of nodes split along the descent
};

// Splits `s` into two slots partitioning its message set. Splits between
// child elements where a whole-child cut reaches the target, and descends
// into the boundary child (at most one per level) otherwise, terminating at
// leaf-group member granularity: the first part's mass lands within half of
// one movable atom (a leaf-group member crossed with the uncut branches along
// the descent) of `target`.
SlotSplit split_slot(const Slot& s, double target);

// Balanced bipartition of the forest: greedy descending by mass, boundary
// slot split at leaf-member granularity. S0 is the prefix [0, s0_end).
struct ForestPartition {
  ForestList source;
  std::size_t s0_end = 0;
  double p0 = 0.0;
  int boundary_splits = 0;        // split-chain length of the boundary descent
  std::uint64_t split_old_id = 0;  // id of the top that was split (0 if none)
};

ForestPartition forest_partition(ForestList forest);

// Bayes update mirroring the group-list rule: members of S_y scale by q/D,
// the rest by p/D, lazily via the top multipliers; then merge and
// renormalize.
ForestList forest_update(ForestPartition partition, int y, const ChannelParams& params);

// Membership test against the transmitter's per-block error (weight, rank)
// pairs, indexed by sub-block.
bool node_contains(const TreeNode& node,
                   const std::vector<std::pair<int, BigCount>>& block_ranks);

// Argmax message of the forest: descends the maximum-posterior path and
// reconstructs the bits from the received word.
BitVec forest_decode(const ForestList& forest, const BitVec& received,
                     const std::vector<int>& offsets, const std::vector<int>& lengths,
                     const Binomial& binom);

// Exhaustive enumeration of (error pattern, posterior) pairs for every
// message in the slot's product set; patterns are full-K vectors. Intended
// for verification at small K (guarded to K <= 24 via the total count).
void enumerate_slot(const Slot& s, const std::vector<int>& offsets,
                    const std::vector<int>& lengths, const Binomial& binom,
                    std::vector<std::pair<BitVec, double>>& out);

struct SbcConfig {
  int K = 0;
  int N = 0;
  ChannelParams params;
  ArrivalSchedule schedule;
  double epsilon = 1e-3;
};

// One endpoint of the four-phase causal encoder: systematic bits as they
// arrive, per-block posterior matching in spare slots, a zero-symbol combine
// once every block is through phase 1, then posterior matching over the
// forest. The receiver runs the same state machine without the message.
class SbcEndpoint {
 public:
  struct Action {
    enum class Type { Idle, SendSystematic, SendBlockPm, Combine, SendForestPm };
    Type type = Type::Idle;
    int bit = -1;
    int block = -1;
  };

  SbcEndpoint(const SbcConfig& config, const Binomial& binom);

  void set_message(const BitVec& theta);

  Action plan(long long slot) const;
  void do_combine();
  void prepare(const Action& action);
  int encode(const Action& action) const;
  void apply(const Action& action, int y);

  bool decoded() const { return decoded_.has_value(); }
  const BitVec& decoded_message() const { return *decoded_; }

  bool combined() const { return combined_; }
  const ForestList& forest() const { return forest_; }
  const std::vector<std::optional<GroupList>>& block_lists() const { return lists_; }
  const std::vector<int>& lengths() const { return lengths_; }
  const std::vector<int>& offsets() const { return offsets_; }
  const BitVec& received() const { return received_; }
  const ForestPartition& pending_forest_partition() const { return *pending_forest_; }
  const Partition& pending_block_partition() const { return *pending_block_; }
  int pending_block() const { return pending_block_index_; }
  int max_partition_chain() const { return max_partition_chain_; }

  void serialize_state(std::string& out) const;

 private:
  bool block_complete(int b) const;
  void check_decode();

  SbcConfig cfg_;
  const Binomial& binom_;
  std::vector<int> lengths_, offsets_;

  BitVec received_;
  int systematic_sent_ = 0;
  std::vector<std::optional<GroupList>> lists_;
  bool combined_ = false;
  ForestList forest_;
  std::optional<BitVec> decoded_;

  std::optional<Partition> pending_block_;
  int pending_block_index_ = -1;
  std::optional<ForestPartition> pending_forest_;
  int max_partition_chain_ = 0;

  // Transmitter-side extras (never part of the decoder state).
  std::optional<BitVec> theta_;
  std::vector<std::pair<int, BigCount>> block_ranks_;
  std::uint64_t locator_ = 0;
};

struct SbcRunResult {
  long long tau = 0;        // transmitted symbols; idle slots excluded
  long long last_slot = 0;  // slot index of the final symbol
  BitVec decoded;
  int max_partition_chain = 0;
};

SbcRunResult run_sbc_spm(const SbcConfig& config, const BitVec& theta, Rng& rng,
                         const Binomial& binom);

}  // namespace pmsim
