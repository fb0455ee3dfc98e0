#include "pmsim/sbc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pmsim {

namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

double group_list_mass(const std::vector<Group>& v) {
  double s = 0.0;
  for (const auto& g : v) s += g.mass();
  return s;
}
BigCount group_list_count(const std::vector<Group>& v) {
  BigCount s = 0;
  for (const auto& g : v) s += g.count();
  return s;
}
double group_list_max(const std::vector<Group>& v) {
  double m = 0.0;
  for (const auto& g : v) m = std::max(m, g.rho);
  return m;
}
double group_list_min(const std::vector<Group>& v) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& g : v) m = std::min(m, g.rho);
  return m;
}

double slot_list_mass(const std::vector<Slot>& v) {
  double s = 0.0;
  for (const auto& x : v) s += x.mass();
  return s;
}
BigCount slot_list_count(const std::vector<Slot>& v) {
  BigCount s = 0;
  for (const auto& x : v) s += x.count();
  return s;
}
double slot_list_max(const std::vector<Slot>& v) {
  double m = 0.0;
  for (const auto& x : v) m = std::max(m, x.max_rho());
  return m;
}
double slot_list_min(const std::vector<Slot>& v) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& x : v) m = std::min(m, x.min_rho());
  return m;
}

bool slot_mass_before(const Slot& a, const Slot& b) { return a.mass() > b.mass(); }

}  // namespace

double Slot::mass() const { return mult * node->rel_mass; }
double Slot::max_rho() const { return mult * node->rel_max; }
double Slot::min_rho() const { return mult * node->rel_min; }
const BigCount& Slot::count() const { return node->count; }

std::vector<int> segment(int K, int N) {
  if (!is_power_of_two(N)) throw std::invalid_argument("segment: N must be a power of 2");
  if (N > K) throw std::invalid_argument("segment: N must not exceed K");
  std::vector<int> lengths(static_cast<std::size_t>(N), K / N);
  for (int i = 0; i < K % N; ++i) ++lengths[static_cast<std::size_t>(i)];
  return lengths;
}

NodePtr make_level1_node(int span_lo, std::vector<Group> lgroups, std::vector<Group> rgroups) {
  auto n = std::make_shared<TreeNode>();
  n->level = 1;
  n->span_lo = span_lo;
  n->span_hi = span_lo + 2;
  n->lgroups = std::move(lgroups);
  n->rgroups = std::move(rgroups);
  n->count = group_list_count(n->lgroups) * group_list_count(n->rgroups);
  if (n->count == 0) {
    n->rel_mass = n->rel_max = n->rel_min = 0.0;
  } else {
    n->rel_mass = group_list_mass(n->lgroups) * group_list_mass(n->rgroups);
    n->rel_max = group_list_max(n->lgroups) * group_list_max(n->rgroups);
    n->rel_min = group_list_min(n->lgroups) * group_list_min(n->rgroups);
  }
  return n;
}

NodePtr make_inner_node(int level, int span_lo, int span_hi, std::vector<Slot> left,
                        std::vector<Slot> right) {
  auto n = std::make_shared<TreeNode>();
  n->level = level;
  n->span_lo = span_lo;
  n->span_hi = span_hi;
  n->left = std::move(left);
  n->right = std::move(right);
  n->count = slot_list_count(n->left) * slot_list_count(n->right);
  if (n->count == 0) {
    n->rel_mass = n->rel_max = n->rel_min = 0.0;
  } else {
    n->rel_mass = slot_list_mass(n->left) * slot_list_mass(n->right);
    n->rel_max = slot_list_max(n->left) * slot_list_max(n->right);
    n->rel_min = slot_list_min(n->left) * slot_list_min(n->right);
  }
  return n;
}

double ForestList::total_mass() const { return slot_list_mass(tops); }
double ForestList::max_rho() const { return tops.empty() ? 0.0 : slot_list_max(tops); }
BigCount ForestList::total_count() const { return slot_list_count(tops); }

std::vector<Slot> build_level1(const GroupList& a, const GroupList& b, int span_lo) {
  const Partition pa = make_partition(a);
  const Partition pb = make_partition(b);
  auto groups_of = [](std::span<const Group> s) {
    return std::vector<Group>(s.begin(), s.end());
  };
  std::vector<Slot> out;
  const std::span<const Group> halves_a[2] = {pa.s0(), pa.s1()};
  const std::span<const Group> halves_b[2] = {pb.s0(), pb.s1()};
  for (int ia = 0; ia < 2; ++ia) {
    for (int ib = 0; ib < 2; ++ib) {
      NodePtr n = make_level1_node(span_lo, groups_of(halves_a[ia]), groups_of(halves_b[ib]));
      if (n->count != 0) out.push_back(Slot{1.0, 0, std::move(n)});
    }
  }
  return out;
}

namespace {

// Balanced pairing of a (usually four-node) quad: sorted by descending mass,
// {1st,4th} vs {2nd,3rd}; degenerate sizes fall back to greedy into the
// lighter pair.
std::pair<std::vector<Slot>, std::vector<Slot>> pair_quad(std::vector<Slot> quad) {
  std::stable_sort(quad.begin(), quad.end(), slot_mass_before);
  std::vector<Slot> p1, p2;
  if (quad.size() == 4) {
    p1 = {quad[0], quad[3]};
    p2 = {quad[1], quad[2]};
  } else {
    double m1 = 0.0, m2 = 0.0;
    for (auto& s : quad) {
      if (m1 <= m2) {
        m1 += s.mass();
        p1.push_back(std::move(s));
      } else {
        m2 += s.mass();
        p2.push_back(std::move(s));
      }
    }
  }
  return {std::move(p1), std::move(p2)};
}

}  // namespace

std::vector<Slot> combine_level(std::vector<Slot> a, std::vector<Slot> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("combine_level: empty node quad");
  const int level = a.front().node->level + 1;
  const int span_lo = a.front().node->span_lo;
  const int span_hi = b.front().node->span_hi;
  auto [pa1, pa2] = pair_quad(std::move(a));
  auto [pb1, pb2] = pair_quad(std::move(b));
  const std::vector<Slot>* pas[2] = {&pa1, &pa2};
  const std::vector<Slot>* pbs[2] = {&pb1, &pb2};
  std::vector<Slot> out;
  for (int ia = 0; ia < 2; ++ia) {
    for (int ib = 0; ib < 2; ++ib) {
      if (pas[ia]->empty() || pbs[ib]->empty()) continue;
      NodePtr n = make_inner_node(level, span_lo, span_hi, *pas[ia], *pbs[ib]);
      if (n->count != 0) out.push_back(Slot{1.0, 0, std::move(n)});
    }
  }
  return out;
}

ForestList combine_all(const std::vector<GroupList>& blocks) {
  const int N = static_cast<int>(blocks.size());
  if (!is_power_of_two(N) || N < 2)
    throw std::invalid_argument("combine_all: block count must be a power of 2, at least 2");
  std::vector<std::vector<Slot>> quads;
  for (int i = 0; i < N; i += 2)
    quads.push_back(build_level1(blocks[static_cast<std::size_t>(i)],
                                 blocks[static_cast<std::size_t>(i) + 1], i));
  while (quads.size() > 1) {
    std::vector<std::vector<Slot>> next;
    for (std::size_t i = 0; i < quads.size(); i += 2)
      next.push_back(combine_level(std::move(quads[i]), std::move(quads[i + 1])));
    quads = std::move(next);
  }
  ForestList forest;
  forest.tops = std::move(quads.front());
  std::stable_sort(forest.tops.begin(), forest.tops.end(), slot_mass_before);
  for (auto& top : forest.tops) top.id = forest.next_id++;
  return forest;
}

namespace {

// Whole-element cut plan for one branch of a node, in that branch's frame.
struct BranchCut {
  std::size_t boundary = 0;
  double prefix = 0.0;
  double residual = 0.0;
  double elem_mass = 0.0;
  double half_min = 0.0;
  double between_err = 0.0;
  bool descend = false;
};

template <class List, class MassFn, class MinFn>
BranchCut plan_cut(const List& list, double target, MassFn mass_of, MinFn min_of) {
  BranchCut c;
  double cum = 0.0;
  std::size_t j = 0;
  double m = 0.0;
  for (; j < list.size(); ++j) {
    m = mass_of(list[j]);
    if (cum + m >= target) break;
    cum += m;
  }
  if (j == list.size()) {
    --j;
    m = mass_of(list[j]);
    cum -= m;
  }
  c.boundary = j;
  c.prefix = cum;
  c.residual = std::clamp(target - cum, 0.0, m);
  c.elem_mass = m;
  c.half_min = 0.5 * min_of(list[j]);
  c.between_err = std::min(c.residual, m - c.residual);
  c.descend = c.residual > c.half_min && (m - c.residual) > c.half_min;
  return c;
}

double cut_potential(const BranchCut& c) {
  return c.descend ? std::min(c.between_err, c.half_min) : c.between_err;
}

SlotSplit degenerate(bool take_all) {
  SlotSplit r;
  r.split = false;
  r.take_all = take_all;
  return r;
}

// Splits a group list at the cut plan: either between groups or inside the
// boundary group at member granularity. Returns the two halves; empty halves
// signal a degenerate cut.
std::pair<std::vector<Group>, std::vector<Group>> cut_group_list(const std::vector<Group>& list,
                                                                 const BranchCut& c) {
  std::vector<Group> first(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(c.boundary));
  std::vector<Group> second;
  const Group& g = list[c.boundary];
  if (!c.descend) {
    if (c.residual >= c.elem_mass - c.residual)
      first.push_back(g);
    else
      second.push_back(g);
  } else {
    const BigCount m = clamp_round_count(c.residual / g.rho, g.count());
    if (m == 0) {
      second.push_back(g);
    } else if (m == g.count()) {
      first.push_back(g);
    } else {
      first.emplace_back(g.weight, g.lo, g.lo + m, g.rho);
      second.emplace_back(g.weight, g.lo + m, g.hi, g.rho);
    }
  }
  second.insert(second.end(), list.begin() + static_cast<std::ptrdiff_t>(c.boundary) + 1,
                list.end());
  return {std::move(first), std::move(second)};
}

SlotSplit split_level1(const Slot& s, double target) {
  const TreeNode& n = *s.node;
  const double la = group_list_mass(n.lgroups);
  const double rb = group_list_mass(n.rgroups);
  const double t_rel = target / s.mult;
  const auto gmass = [](const Group& g) { return g.mass(); };
  const auto gmin = [](const Group& g) { return g.rho; };
  const BranchCut cl = plan_cut(n.lgroups, t_rel / rb, gmass, gmin);
  const BranchCut cr = plan_cut(n.rgroups, t_rel / la, gmass, gmin);
  const bool use_left = cut_potential(cl) * rb <= cut_potential(cr) * la;
  const auto& list = use_left ? n.lgroups : n.rgroups;
  const auto& other = use_left ? n.rgroups : n.lgroups;
  auto [first_half, second_half] = cut_group_list(list, use_left ? cl : cr);
  if (first_half.empty()) return degenerate(false);
  if (second_half.empty()) return degenerate(true);
  SlotSplit r;
  r.split = true;
  r.chain = 1;
  NodePtr n1 = use_left ? make_level1_node(n.span_lo, std::move(first_half), other)
                        : make_level1_node(n.span_lo, other, std::move(first_half));
  NodePtr n2 = use_left ? make_level1_node(n.span_lo, std::move(second_half), other)
                        : make_level1_node(n.span_lo, other, std::move(second_half));
  r.first = Slot{s.mult, 0, std::move(n1)};
  r.second = Slot{s.mult, 0, std::move(n2)};
  return r;
}

// Cuts a slot list per the plan, descending into the boundary slot when the
// plan asks for finer granularity. Returns halves plus the descent chain
// length.
struct SlotListCut {
  std::vector<Slot> first, second;
  int chain = 0;
};

SlotListCut cut_slot_list(const std::vector<Slot>& list, const BranchCut& c) {
  SlotListCut out;
  out.first.assign(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(c.boundary));
  const Slot& boundary = list[c.boundary];
  bool whole_to_first = c.residual >= c.elem_mass - c.residual;
  if (c.descend) {
    SlotSplit child = split_slot(boundary, c.residual);
    if (child.split) {
      out.first.push_back(std::move(child.first));
      out.second.push_back(std::move(child.second));
      out.chain = child.chain;
      out.second.insert(out.second.end(),
                        list.begin() + static_cast<std::ptrdiff_t>(c.boundary) + 1, list.end());
      return out;
    }
    whole_to_first = child.take_all;
  }
  if (whole_to_first)
    out.first.push_back(boundary);
  else
    out.second.push_back(boundary);
  out.second.insert(out.second.end(), list.begin() + static_cast<std::ptrdiff_t>(c.boundary) + 1,
                    list.end());
  return out;
}

SlotSplit split_inner(const Slot& s, double target) {
  const TreeNode& n = *s.node;
  const double la = slot_list_mass(n.left);
  const double rb = slot_list_mass(n.right);
  const double t_rel = target / s.mult;
  const auto smass = [](const Slot& x) { return x.mass(); };
  const auto smin = [](const Slot& x) { return x.min_rho(); };
  const BranchCut cl = plan_cut(n.left, t_rel / rb, smass, smin);
  const BranchCut cr = plan_cut(n.right, t_rel / la, smass, smin);
  const bool use_left = cut_potential(cl) * rb <= cut_potential(cr) * la;
  const auto& list = use_left ? n.left : n.right;
  const auto& other = use_left ? n.right : n.left;
  SlotListCut cut = cut_slot_list(list, use_left ? cl : cr);
  if (cut.first.empty()) return degenerate(false);
  if (cut.second.empty()) return degenerate(true);
  SlotSplit r;
  r.split = true;
  r.chain = 1 + cut.chain;
  NodePtr n1 = use_left
                   ? make_inner_node(n.level, n.span_lo, n.span_hi, std::move(cut.first), other)
                   : make_inner_node(n.level, n.span_lo, n.span_hi, other, std::move(cut.first));
  NodePtr n2 = use_left
                   ? make_inner_node(n.level, n.span_lo, n.span_hi, std::move(cut.second), other)
                   : make_inner_node(n.level, n.span_lo, n.span_hi, other, std::move(cut.second));
  r.first = Slot{s.mult, 0, std::move(n1)};
  r.second = Slot{s.mult, 0, std::move(n2)};
  return r;
}

}  // namespace

SlotSplit split_slot(const Slot& s, double target) {
  if (!(target > 0.0 && target < s.mass()))
    throw std::invalid_argument("split_slot: target must lie strictly inside (0, node mass)");
  return s.node->level == 1 ? split_level1(s, target) : split_inner(s, target);
}

ForestPartition forest_partition(ForestList forest) {
  if (forest.tops.empty()) throw std::invalid_argument("partition of empty forest");
  auto& tops = forest.tops;

  double cum = 0.0;
  std::size_t b = 0;
  while (b < tops.size() && cum + tops[b].mass() < 0.5) {
    cum += tops[b].mass();
    ++b;
  }
  ForestPartition part;
  if (b == tops.size()) {
    part.source = std::move(forest);
    part.s0_end = b;
    part.p0 = cum;
    return part;
  }

  const double target = 0.5 - cum;
  SlotSplit ss = target < tops[b].mass() ? split_slot(tops[b], target) : degenerate(true);
  if (!ss.split) {
    if (ss.take_all) {
      part.s0_end = b + 1;
      part.p0 = cum + tops[b].mass();
    } else {
      part.s0_end = b;
      part.p0 = cum;
    }
  } else {
    ss.first.id = forest.next_id++;
    ss.second.id = forest.next_id++;
    part.split_old_id = tops[b].id;
    part.boundary_splits = ss.chain;
    tops[b] = std::move(ss.first);
    tops.insert(tops.begin() + static_cast<std::ptrdiff_t>(b) + 1, std::move(ss.second));
    part.s0_end = b + 1;
    part.p0 = cum + tops[b].mass();
  }
  part.source = std::move(forest);
  return part;
}

ForestList forest_update(ForestPartition partition, int y, const ChannelParams& params) {
  ForestList forest = std::move(partition.source);
  auto& tops = forest.tops;
  const double p_y = (y == 0) ? partition.p0 : 1.0 - partition.p0;
  const double denom = p_y * params.q + (1.0 - p_y) * params.p;
  const double f0 = ((y == 0) ? params.q : params.p) / denom;
  const double f1 = ((y == 0) ? params.p : params.q) / denom;
  for (std::size_t i = 0; i < partition.s0_end; ++i) tops[i].mult *= f0;
  for (std::size_t i = partition.s0_end; i < tops.size(); ++i) tops[i].mult *= f1;

  std::inplace_merge(tops.begin(), tops.begin() + static_cast<std::ptrdiff_t>(partition.s0_end),
                     tops.end(), slot_mass_before);

  const double total = forest.total_mass();
  if (total > 0.0)
    for (auto& top : tops) top.mult /= total;

  ++forest.time;
  return forest;
}

bool node_contains(const TreeNode& node,
                   const std::vector<std::pair<int, BigCount>>& block_ranks) {
  if (node.level == 1) {
    const auto& [wa, ra] = block_ranks[static_cast<std::size_t>(node.span_lo)];
    const auto& [wb, rb] = block_ranks[static_cast<std::size_t>(node.span_lo) + 1];
    bool in_left = false, in_right = false;
    for (const auto& g : node.lgroups)
      if (g.weight == wa && g.lo <= ra && ra < g.hi) {
        in_left = true;
        break;
      }
    for (const auto& g : node.rgroups)
      if (g.weight == wb && g.lo <= rb && rb < g.hi) {
        in_right = true;
        break;
      }
    return in_left && in_right;
  }
  bool in_left = false, in_right = false;
  for (const auto& s : node.left)
    if (node_contains(*s.node, block_ranks)) {
      in_left = true;
      break;
    }
  for (const auto& s : node.right)
    if (node_contains(*s.node, block_ranks)) {
      in_right = true;
      break;
    }
  return in_left && in_right;
}

namespace {

const Group& best_group(const std::vector<Group>& groups) {
  const Group* best = &groups.front();
  for (const auto& g : groups)
    if (group_before(g, *best)) best = &g;
  return *best;
}

void decode_into(const TreeNode& node, const std::vector<int>& offsets,
                 const std::vector<int>& lengths, const Binomial& binom, BitVec& pattern) {
  if (node.level == 1) {
    const Group& gl = best_group(node.lgroups);
    const Group& gr = best_group(node.rgroups);
    const int ba = node.span_lo, bb = node.span_lo + 1;
    pattern.splice(offsets[static_cast<std::size_t>(ba)],
                   unrank_pattern(lengths[static_cast<std::size_t>(ba)], gl.weight, gl.lo, binom));
    pattern.splice(offsets[static_cast<std::size_t>(bb)],
                   unrank_pattern(lengths[static_cast<std::size_t>(bb)], gr.weight, gr.lo, binom));
    return;
  }
  const Slot* best_left = &node.left.front();
  for (const auto& s : node.left)
    if (s.max_rho() > best_left->max_rho()) best_left = &s;
  const Slot* best_right = &node.right.front();
  for (const auto& s : node.right)
    if (s.max_rho() > best_right->max_rho()) best_right = &s;
  decode_into(*best_left->node, offsets, lengths, binom, pattern);
  decode_into(*best_right->node, offsets, lengths, binom, pattern);
}

}  // namespace

BitVec forest_decode(const ForestList& forest, const BitVec& received,
                     const std::vector<int>& offsets, const std::vector<int>& lengths,
                     const Binomial& binom) {
  if (forest.tops.empty()) throw std::logic_error("forest_decode: empty forest");
  const Slot* best = &forest.tops.front();
  for (const auto& top : forest.tops)
    if (top.max_rho() > best->max_rho()) best = &top;
  BitVec pattern(received.size());
  decode_into(*best->node, offsets, lengths, binom, pattern);
  return pattern ^ received;
}

namespace {

void enumerate_node(const TreeNode& node, double mult, const std::vector<int>& offsets,
                    const std::vector<int>& lengths, const Binomial& binom,
                    std::vector<std::pair<BitVec, double>>& out) {
  const int K = offsets.back() + lengths.back();
  std::vector<std::pair<BitVec, double>> left, right;
  if (node.level == 1) {
    auto expand = [&](const std::vector<Group>& groups, int block,
                      std::vector<std::pair<BitVec, double>>& dst) {
      for (const auto& g : groups) {
        for (BigCount r = g.lo; r < g.hi; ++r) {
          BitVec full(K);
          full.splice(offsets[static_cast<std::size_t>(block)],
                      unrank_pattern(lengths[static_cast<std::size_t>(block)], g.weight, r, binom));
          dst.emplace_back(std::move(full), g.rho);
        }
      }
    };
    expand(node.lgroups, node.span_lo, left);
    expand(node.rgroups, node.span_lo + 1, right);
  } else {
    for (const auto& s : node.left) enumerate_node(*s.node, s.mult, offsets, lengths, binom, left);
    for (const auto& s : node.right)
      enumerate_node(*s.node, s.mult, offsets, lengths, binom, right);
  }
  for (const auto& [lp, lrho] : left)
    for (const auto& [rp, rrho] : right) out.emplace_back(lp ^ rp, mult * lrho * rrho);
}

}  // namespace

void enumerate_slot(const Slot& s, const std::vector<int>& offsets,
                    const std::vector<int>& lengths, const Binomial& binom,
                    std::vector<std::pair<BitVec, double>>& out) {
  if (s.count() > BigCount(1) << 24)
    throw std::invalid_argument("enumerate_slot: product set too large to enumerate");
  enumerate_node(*s.node, s.mult, offsets, lengths, binom, out);
}

SbcEndpoint::SbcEndpoint(const SbcConfig& config, const Binomial& binom)
    : cfg_(config), binom_(binom), received_(config.K) {
  if (cfg_.K < 1 || cfg_.K > kMaxMessageBits)
    throw std::invalid_argument("message length must lie in [1, " +
                                std::to_string(kMaxMessageBits) + "]");
  if (!is_power_of_two(cfg_.N) || cfg_.N < 2 || cfg_.N > cfg_.K)
    throw std::invalid_argument("sub-block count must be a power of 2 in [2, K]");
  if (!(cfg_.epsilon > 0.0 && cfg_.epsilon < 1.0))
    throw std::invalid_argument("epsilon must lie in (0, 1)");
  lengths_ = segment(cfg_.K, cfg_.N);
  offsets_.resize(lengths_.size());
  int off = 0;
  for (std::size_t b = 0; b < lengths_.size(); ++b) {
    offsets_[b] = off;
    off += lengths_[b];
  }
  lists_.resize(lengths_.size());
  block_ranks_.resize(lengths_.size());
}

void SbcEndpoint::set_message(const BitVec& theta) {
  if (theta.size() != cfg_.K) throw std::invalid_argument("message length mismatch");
  theta_ = theta;
}

bool SbcEndpoint::block_complete(int b) const {
  return systematic_sent_ >= offsets_[static_cast<std::size_t>(b)] +
                                 lengths_[static_cast<std::size_t>(b)];
}

SbcEndpoint::Action SbcEndpoint::plan(long long slot) const {
  Action a;
  if (combined_) {
    a.type = Action::Type::SendForestPm;
    return a;
  }
  if (systematic_sent_ == cfg_.K) {
    a.type = Action::Type::Combine;
    return a;
  }
  const int usable =
      bits_usable_at_slot(slot, cfg_.K, cfg_.schedule.lambda, cfg_.schedule.mu);
  if (systematic_sent_ < usable) {
    a.type = Action::Type::SendSystematic;
    a.bit = systematic_sent_;
    return a;
  }
  // Spare slot during arrival: posterior matching on one finished sub-block.
  // Preference order: the smallest max posterior among blocks still below
  // 1/2; once every finished block exceeds 1/2, the smallest max overall.
  int pick = -1;
  double pick_rho = 0.0;
  for (int b = 0; b < cfg_.N; ++b) {
    if (!block_complete(b)) continue;
    const double m = lists_[static_cast<std::size_t>(b)]->max_rho();
    if (m < 0.5 && (pick < 0 || m < pick_rho)) {
      pick = b;
      pick_rho = m;
    }
  }
  if (pick < 0) {
    for (int b = 0; b < cfg_.N; ++b) {
      if (!block_complete(b)) continue;
      const double m = lists_[static_cast<std::size_t>(b)]->max_rho();
      if (pick < 0 || m < pick_rho) {
        pick = b;
        pick_rho = m;
      }
    }
  }
  if (pick >= 0) {
    a.type = Action::Type::SendBlockPm;
    a.block = pick;
  }
  return a;  // idle when no bit is usable and no sub-block is finished yet
}

void SbcEndpoint::do_combine() {
  if (combined_) throw std::logic_error("combine: already combined");
  if (systematic_sent_ != cfg_.K)
    throw std::logic_error("combine: systematic phase still incomplete");
  std::vector<GroupList> blocks;
  blocks.reserve(lists_.size());
  for (const auto& list : lists_) blocks.push_back(*list);
  forest_ = combine_all(blocks);
  combined_ = true;
  if (theta_) {
    locator_ = 0;
    for (const auto& top : forest_.tops)
      if (node_contains(*top.node, block_ranks_)) {
        locator_ = top.id;
        break;
      }
    if (locator_ == 0) throw std::logic_error("combine: message not covered by any top node");
  }
  check_decode();
}

void SbcEndpoint::prepare(const Action& action) {
  switch (action.type) {
    case Action::Type::SendBlockPm: {
      auto& list = lists_[static_cast<std::size_t>(action.block)];
      pending_block_ = make_partition(std::move(*list));
      pending_block_index_ = action.block;
      break;
    }
    case Action::Type::SendForestPm: {
      pending_forest_ = forest_partition(std::move(forest_));
      max_partition_chain_ = std::max(max_partition_chain_, pending_forest_->boundary_splits);
      if (theta_ && pending_forest_->split_old_id != 0 &&
          pending_forest_->split_old_id == locator_) {
        const auto& tops = pending_forest_->source.tops;
        const Slot& first = tops[pending_forest_->s0_end - 1];
        const Slot& second = tops[pending_forest_->s0_end];
        locator_ = node_contains(*first.node, block_ranks_) ? first.id : second.id;
      }
      break;
    }
    default:
      break;
  }
}

int SbcEndpoint::encode(const Action& action) const {
  if (!theta_) throw std::logic_error("encode called on an endpoint without the message");
  switch (action.type) {
    case Action::Type::SendSystematic:
      return theta_->bit(action.bit);
    case Action::Type::SendBlockPm: {
      const auto& [w, r] = block_ranks_[static_cast<std::size_t>(action.block)];
      return locate_rank(w, r, *pending_block_);
    }
    case Action::Type::SendForestPm: {
      const auto& tops = pending_forest_->source.tops;
      for (std::size_t i = 0; i < tops.size(); ++i)
        if (tops[i].id == locator_) return i < pending_forest_->s0_end ? 0 : 1;
      throw std::logic_error("locate: message top node missing from forest partition");
    }
    default:
      throw std::logic_error("encode called on a non-transmitting action");
  }
}

void SbcEndpoint::apply(const Action& action, int y) {
  switch (action.type) {
    case Action::Type::SendSystematic: {
      received_.set_bit(action.bit, y);
      ++systematic_sent_;
      // Initialize the sub-block once its systematic phase finishes.
      for (int b = 0; b < cfg_.N; ++b) {
        const std::size_t bi = static_cast<std::size_t>(b);
        if (block_complete(b) && !lists_[bi]) {
          lists_[bi] = init_groups(lengths_[bi], cfg_.params, binom_);
          if (theta_) {
            const BitVec e = theta_->slice(offsets_[bi], lengths_[bi]) ^
                             received_.slice(offsets_[bi], lengths_[bi]);
            block_ranks_[bi] = {e.weight(), rank_pattern(e, binom_)};
          }
        }
      }
      break;
    }
    case Action::Type::SendBlockPm:
      lists_[static_cast<std::size_t>(pending_block_index_)] =
          apply_update(std::move(*pending_block_), y, cfg_.params);
      pending_block_.reset();
      pending_block_index_ = -1;
      break;
    case Action::Type::SendForestPm:
      forest_ = forest_update(std::move(*pending_forest_), y, cfg_.params);
      pending_forest_.reset();
      check_decode();
      break;
    default:
      throw std::logic_error("apply called on a non-transmitting action");
  }
}

void SbcEndpoint::check_decode() {
  if (!combined_ || decoded_) return;
  if (forest_.max_rho() >= 1.0 - cfg_.epsilon)
    decoded_ = forest_decode(forest_, received_, offsets_, lengths_, binom_);
}

namespace {

void serialize_groups(const std::vector<Group>& groups, std::string& out) {
  for (const auto& g : groups) {
    out.append(reinterpret_cast<const char*>(&g.weight), sizeof g.weight);
    out.append(reinterpret_cast<const char*>(&g.rho), sizeof g.rho);
    out += g.lo.str();
    out += ':';
    out += g.hi.str();
    out += ';';
  }
}

void serialize_node(const TreeNode& node, std::string& out) {
  out.append(reinterpret_cast<const char*>(&node.level), sizeof node.level);
  out.append(reinterpret_cast<const char*>(&node.span_lo), sizeof node.span_lo);
  out.append(reinterpret_cast<const char*>(&node.rel_mass), sizeof node.rel_mass);
  out.append(reinterpret_cast<const char*>(&node.rel_max), sizeof node.rel_max);
  out += node.count.str();
  out += '|';
  if (node.level == 1) {
    serialize_groups(node.lgroups, out);
    out += '/';
    serialize_groups(node.rgroups, out);
  } else {
    for (const auto& s : node.left) {
      out.append(reinterpret_cast<const char*>(&s.mult), sizeof s.mult);
      serialize_node(*s.node, out);
    }
    out += '/';
    for (const auto& s : node.right) {
      out.append(reinterpret_cast<const char*>(&s.mult), sizeof s.mult);
      serialize_node(*s.node, out);
    }
  }
  out += '#';
}

}  // namespace

void SbcEndpoint::serialize_state(std::string& out) const {
  out.append(reinterpret_cast<const char*>(&systematic_sent_), sizeof systematic_sent_);
  out += received_.to_string();
  for (const auto& list : lists_) {
    out += list ? '+' : '-';
    if (list) {
      out.append(reinterpret_cast<const char*>(&list->time), sizeof list->time);
      serialize_groups(list->groups, out);
    }
  }
  out += combined_ ? 'C' : 'c';
  if (combined_) {
    out.append(reinterpret_cast<const char*>(&forest_.time), sizeof forest_.time);
    out.append(reinterpret_cast<const char*>(&forest_.next_id), sizeof forest_.next_id);
    for (const auto& top : forest_.tops) {
      out.append(reinterpret_cast<const char*>(&top.mult), sizeof top.mult);
      out.append(reinterpret_cast<const char*>(&top.id), sizeof top.id);
      serialize_node(*top.node, out);
    }
  }
}

SbcRunResult run_sbc_spm(const SbcConfig& config, const BitVec& theta, Rng& rng,
                         const Binomial& binom) {
  SbcEndpoint tx(config, binom);
  tx.set_message(theta);
  SbcRunResult result;
  constexpr long long kSlotCap = 10'000'000;
  for (long long slot = 1; !tx.decoded(); ++slot) {
    if (slot > kSlotCap) throw std::runtime_error("run_sbc_spm: no decode within the slot cap");
    auto action = tx.plan(slot);
    if (action.type == SbcEndpoint::Action::Type::Combine) {
      tx.do_combine();
      if (tx.decoded()) break;
      action = tx.plan(slot);
    }
    if (action.type == SbcEndpoint::Action::Type::Idle) continue;
    tx.prepare(action);
    const int x = tx.encode(action);
    const int y = bsc_transmit(x, config.params, rng);
    tx.apply(action, y);
    ++result.tau;
    result.last_slot = slot;
  }
  result.decoded = tx.decoded_message();
  result.max_partition_chain = tx.max_partition_chain();
  return result;
}

}  // namespace pmsim
