#include "pmsim/spm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace pmsim {

double GroupList::total_mass() const {
  double sum = 0.0;
  for (const auto& g : groups) sum += g.mass();
  return sum;
}

BigCount GroupList::total_count() const {
  BigCount sum = 0;
  for (const auto& g : groups) sum += g.count();
  return sum;
}

bool group_before(const Group& a, const Group& b) {
  if (a.rho != b.rho) return a.rho > b.rho;
  if (a.weight != b.weight) return a.weight < b.weight;
  return a.lo < b.lo;
}

GroupList init_groups(int K, const ChannelParams& params, const Binomial& binom) {
  if (K < 1) throw std::invalid_argument("init_groups: K must be >= 1");
  GroupList list;
  list.groups.reserve(static_cast<std::size_t>(K) + 1);
  // q^(K-i) p^i is strictly decreasing in i for p < 1/2, so this order is
  // already sorted by descending rho.
  double rho = std::pow(params.q, K);
  const double step = params.p / params.q;
  for (int i = 0; i <= K; ++i) {
    list.groups.emplace_back(i, BigCount(0), binom(K, i), rho);
    rho *= step;
  }
  list.time = K;
  return list;
}

BigCount clamp_round_count(double x, const BigCount& count) {
  if (!(x > 0.0)) return 0;
  const double count_d = to_double(count);
  if (x >= count_d) return count;
  BigCount m;
  if (x < 0x1.0p53) {
    // Nearest integer, ties toward zero.
    const double f = std::floor(x);
    m = BigCount(f + ((x - f > 0.5) ? 1.0 : 0.0));
  } else {
    m = BigCount(x);  // fractional part is already zero at this magnitude
  }
  if (m > count) m = count;
  return m;
}

Partition make_partition(GroupList list) {
  if (list.groups.empty()) throw std::invalid_argument("partition of empty group list");
  auto& groups = list.groups;

  double cum = 0.0;
  std::size_t b = 0;
  while (b < groups.size() && cum + groups[b].mass() < 0.5) {
    cum += groups[b].mass();
    ++b;
  }
  Partition part;
  if (b == groups.size()) {
    // Total mass fell short of 1/2 (possible only through fp drift); take
    // everything into S0.
    part.source = std::move(list);
    part.s0_end = b;
    part.p0 = cum;
    return part;
  }

  Group& boundary = groups[b];
  const BigCount m = clamp_round_count((0.5 - cum) / boundary.rho, boundary.count());
  if (m == 0) {
    part.s0_end = b;
    part.p0 = cum;
  } else if (m == boundary.count()) {
    part.s0_end = b + 1;
    part.p0 = cum + boundary.mass();
  } else {
    const Group right(boundary.weight, boundary.lo + m, boundary.hi, boundary.rho);
    boundary = Group(boundary.weight, boundary.lo, boundary.lo + m, boundary.rho);
    groups.insert(groups.begin() + static_cast<std::ptrdiff_t>(b) + 1, right);
    part.s0_end = b + 1;
    part.p0 = cum + groups[b].mass();
  }
  part.source = std::move(list);
  return part;
}

int locate_rank(int weight, const BigCount& rank, const Partition& partition) {
  const auto& groups = partition.source.groups;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const Group& g = groups[i];
    if (g.weight == weight && g.lo <= rank && rank < g.hi)
      return i < partition.s0_end ? 0 : 1;
  }
  throw std::logic_error("locate: no partition set covers the message rank");
}

int locate(const BitVec& theta, const BitVec& received, const Partition& partition,
           const Binomial& binom) {
  const BitVec e = theta ^ received;
  return locate_rank(e.weight(), rank_pattern(e, binom), partition);
}

GroupList apply_update(Partition partition, int y, const ChannelParams& params) {
  GroupList list = std::move(partition.source);
  auto& groups = list.groups;
  const double p_y = (y == 0) ? partition.p0 : 1.0 - partition.p0;
  const double denom = p_y * params.q + (1.0 - p_y) * params.p;
  const double f0 = ((y == 0) ? params.q : params.p) / denom;
  const double f1 = ((y == 0) ? params.p : params.q) / denom;
  for (std::size_t i = 0; i < partition.s0_end; ++i) groups[i].rho *= f0;
  for (std::size_t i = partition.s0_end; i < groups.size(); ++i) groups[i].rho *= f1;

  // Each side keeps its internal rho order under a common scale factor
  // (rounding is monotone), so the full list is two runs sorted by descending
  // rho. Merging must compare rho alone: scaling can round distinct rhos to
  // equal doubles, which would break a finer comparator's precondition.
  std::inplace_merge(groups.begin(), groups.begin() + static_cast<std::ptrdiff_t>(partition.s0_end),
                     groups.end(), [](const Group& a, const Group& b) { return a.rho > b.rho; });

  // Coalesce split siblings that ended up with equal posteriors again.
  std::size_t out = 0;
  for (std::size_t i = 1; i < groups.size(); ++i) {
    Group& prev = groups[out];
    Group& cur = groups[i];
    const double tol = 1e-12 * std::max(prev.rho, cur.rho);
    const bool same_rho = std::fabs(prev.rho - cur.rho) <= tol;
    if (same_rho && prev.weight == cur.weight && (prev.hi == cur.lo || cur.hi == prev.lo)) {
      const double total = prev.mass() + cur.mass();
      const BigCount lo = std::min(prev.lo, cur.lo);
      const BigCount hi = std::max(prev.hi, cur.hi);
      // Count-weighted mean, clamped so rounding cannot push the merged rho
      // outside the siblings' range and break the list's rho order.
      double rho = total > 0.0 ? total / to_double(hi - lo) : prev.rho;
      rho = std::clamp(rho, std::min(prev.rho, cur.rho), std::max(prev.rho, cur.rho));
      prev = Group(prev.weight, lo, hi, rho);
    } else {
      groups[++out] = std::move(cur);
    }
  }
  groups.resize(out + 1);

  const double total = list.total_mass();
  if (total > 0.0)
    for (auto& g : groups) g.rho /= total;

  ++list.time;
  return list;
}

std::optional<BitVec> decode_status(const GroupList& list, double epsilon,
                                    const BitVec& received, const Binomial& binom) {
  if (list.groups.empty()) return std::nullopt;
  const Group* top = &list.groups.front();
  for (const auto& g : list.groups)
    if (group_before(g, *top)) top = &g;  // argmax; ties by lowest weight, then lowest rank
  if (top->rho < 1.0 - epsilon) return std::nullopt;
  const BitVec pattern = unrank_pattern(received.size(), top->weight, top->lo, binom);
  return pattern ^ received;
}

SystematicPmEndpoint::SystematicPmEndpoint(Mode mode, int K, ChannelParams params,
                                           ArrivalSchedule schedule, double epsilon,
                                           const Binomial& binom)
    : mode_(mode),
      K_(K),
      params_(params),
      schedule_(schedule),
      epsilon_(epsilon),
      binom_(binom),
      received_(K) {
  if (K < 1 || K > kMaxMessageBits)
    throw std::invalid_argument("message length must lie in [1, " +
                                std::to_string(kMaxMessageBits) + "]");
}

void SystematicPmEndpoint::set_message(const BitVec& theta) {
  if (theta.size() != K_) throw std::invalid_argument("message length mismatch");
  theta_ = theta;
}

SystematicPmEndpoint::Action SystematicPmEndpoint::plan(long long slot) const {
  Action a;
  if (systematic_sent_ < K_) {
    const int usable = mode_ == Mode::NonCausal
                           ? K_
                           : bits_usable_at_slot(slot, K_, schedule_.lambda, schedule_.mu);
    if (systematic_sent_ < usable) {
      a.type = Action::Type::SendSystematic;
      a.bit = systematic_sent_;
    }
    return a;  // idle while waiting for the next arrival
  }
  a.type = Action::Type::SendPm;
  return a;
}

void SystematicPmEndpoint::prepare(const Action& action) {
  if (action.type == Action::Type::SendPm) pending_ = make_partition(std::move(list_));
}

int SystematicPmEndpoint::encode(const Action& action) const {
  if (!theta_) throw std::logic_error("encode called on an endpoint without the message");
  switch (action.type) {
    case Action::Type::SendSystematic:
      return theta_->bit(action.bit);
    case Action::Type::SendPm:
      return locate(*theta_, received_, *pending_, binom_);
    default:
      throw std::logic_error("encode called on an idle action");
  }
}

void SystematicPmEndpoint::apply(const Action& action, int y) {
  switch (action.type) {
    case Action::Type::SendSystematic:
      received_.set_bit(action.bit, y);
      ++systematic_sent_;
      if (systematic_sent_ == K_) {
        list_ = init_groups(K_, params_, binom_);
        decoded_ = decode_status(list_, epsilon_, received_, binom_);
      }
      break;
    case Action::Type::SendPm:
      list_ = apply_update(std::move(*pending_), y, params_);
      pending_.reset();
      decoded_ = decode_status(list_, epsilon_, received_, binom_);
      break;
    default:
      throw std::logic_error("apply called on an idle action");
  }
}

void SystematicPmEndpoint::serialize_state(std::string& out) const {
  auto put = [&out](const void* p, std::size_t n) {
    out.append(static_cast<const char*>(p), n);
  };
  put(&systematic_sent_, sizeof systematic_sent_);
  const std::string rx = received_.to_string();
  out += rx;
  put(&list_.time, sizeof list_.time);
  for (const auto& g : list_.groups) {
    put(&g.weight, sizeof g.weight);
    put(&g.rho, sizeof g.rho);
    out += g.lo.str();
    out += ':';
    out += g.hi.str();
    out += ';';
  }
}

SpmRunResult run_spm(int K, const ChannelParams& params, double epsilon, const BitVec& theta,
                     Rng& rng, const Binomial& binom) {
  SystematicPmEndpoint tx(SystematicPmEndpoint::Mode::NonCausal, K, params,
                          ArrivalSchedule{1.0, 1.0}, epsilon, binom);
  tx.set_message(theta);
  SpmRunResult result;
  for (long long slot = 1; !tx.decoded(); ++slot) {
    const auto action = tx.plan(slot);
    tx.prepare(action);
    const int x = tx.encode(action);
    const int y = bsc_transmit(x, params, rng);
    tx.apply(action, y);
    result.transcript.push_back(y);
    result.last_slot = slot;
  }
  result.tau = result.last_slot;
  result.decoded = tx.decoded_message();
  result.received = tx.received();
  return result;
}

}  // namespace pmsim
