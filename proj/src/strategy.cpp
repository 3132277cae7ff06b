#include "undercut/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <limits>
#include <string>

#include "undercut/error.hpp"

namespace undercut {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::kInvalidArgument, what);
}

// a / b with 0 / 0 = 0.
double share(double a, double b) { return b > 0.0 ? a / b : 0.0; }

std::vector<Transaction> bandwidth_txs(const MempoolView& pool, const ChainParams& params) {
  const auto set = bandwidth_set(pool, params);
  return select_by_id(pool.pending, set.tx_ids);
}

}  // namespace

PowerSplit PowerSplit::from(double undercutter, double honest) {
  PowerSplit s{undercutter, honest, 1.0 - undercutter - honest};
  if (std::abs(s.rational) < 1e-15) s.rational = 0.0;
  s.validate();
  return s;
}

void PowerSplit::validate() const {
  require(in_unit(undercutter) && in_unit(honest) && in_unit(rational),
          "power split components must lie in [0, 1]");
  require(undercutter <= 0.5, "undercutter power must not exceed 0.5");
  require(std::abs(undercutter + honest + rational - 1.0) <= 1e-12,
          "power split must sum to 1");
}

std::string_view to_string(Branch branch) {
  switch (branch) {
    case Branch::kStay: return "stay";
    case Branch::kEmptyHead: return "empty-head";
    case Branch::kNegligible: return "negligible";
    case Branch::kSingleSet: return "single-set";
    case Branch::kLimited: return "limited";
    case Branch::kSufficient: return "sufficient";
  }
  return "?";
}

int branch_number(Branch branch, int safe_depth) {
  switch (branch) {
    case Branch::kNegligible: return 1;
    case Branch::kSingleSet: return 2;
    case Branch::kLimited: return safe_depth == 1 ? 2 : 3;
    case Branch::kSufficient: return safe_depth == 1 ? 3 : 4;
    default: return 0;
  }
}

double limited_bound_d1(double bu) { return bu / (1.0 - bu); }

double sufficient_bound_d1(double bu, double bh) {
  const double ratio = bh > 0.0 ? bu / bh : kInf;
  return std::min(bh / (1.0 - bu), ratio);
}

double limited_bound_d2(double bu) {
  const double q = 1.0 - bu;
  return bu * bu / (2.0 * q * q);
}

double shift_threshold_d2_tie(double bu, double bh) {
  if (bu >= 0.5) return kInf;
  return (bh * bh / (1.0 - bu) + bu - bh) / (1.0 - 2.0 * bu);
}

double sufficient_bound_d2(double bu, double bh) {
  return std::min(shift_threshold_d2_tie(bu, bh), bu * (1.0 - bh) / (1.0 + bh - bu));
}

double join_threshold_d1(double bu, double bh) { return bh / (1.0 - bu); }

bool single_set_left(const MempoolView& pool, const ChainParams& params) {
  const auto set = bandwidth_set(pool, params);
  if (set.total_fee <= 0) return false;
  const Fee residual = pool.total_fee() - set.total_fee;
  return static_cast<double>(residual) <=
         params.negligible_fee_threshold * static_cast<double>(set.total_fee);
}

ReturnEstimate expected_returns_d1(const PowerSplit& split, double gamma, double delta) {
  const double bu = split.undercutter;
  require(gamma >= 0.0, "gamma must be non-negative");
  require(bu + delta <= 1.0 + 1e-12 && delta >= 0.0, "undercutter power plus delta must lie in [0, 1]");
  if (bu + delta <= 0.0) {
    throw Error(ErrorCode::kDegenerateRace, "fork has no mining power");
  }
  return {(gamma + bu / (bu + delta)) * bu * (bu + delta), bu * gamma};
}

ReturnEstimate expected_returns_d2(const PowerSplit& split, double gamma) {
  const double bu = split.undercutter;
  require(gamma >= 0.0, "gamma must be non-negative");
  require(bu > 0.0 && bu <= 0.5, "undercutter power must lie in (0, 0.5]");
  return {bu * bu * (2.0 * gamma + bu) / (1.0 - bu * (1.0 - bu)), 2.0 * bu * gamma};
}

Branch classify_d1(const PowerSplit& split, double gamma, double negligible) {
  if (is_negligible(gamma, negligible)) return Branch::kNegligible;
  if (gamma < limited_bound_d1(split.undercutter)) return Branch::kLimited;
  if (gamma < sufficient_bound_d1(split.undercutter, split.honest)) return Branch::kSufficient;
  return Branch::kStay;
}

Branch classify_d2(const PowerSplit& split, double gamma, double negligible, bool single_set) {
  if (is_negligible(gamma, negligible)) return Branch::kNegligible;
  if (single_set) return Branch::kSingleSet;
  if (gamma < limited_bound_d2(split.undercutter)) return Branch::kLimited;
  if (gamma < sufficient_bound_d2(split.undercutter, split.honest)) return Branch::kSufficient;
  return Branch::kStay;
}

Decision undercut_decision_d1(const PowerSplit& split, double gamma, const ChainParams& params,
                              const MempoolView& pool, const HeadBlock& head) {
  Decision d;
  if (head.fee <= 0) {
    d.rationale = Branch::kEmptyHead;
    return d;
  }
  d.rationale = classify_d1(split, gamma, params.negligible_fee_threshold);
  switch (d.rationale) {
    case Branch::kNegligible:
      d.action = Action::kUndercut;
      d.block_template = split_equal_fee(head.txs, 2, params).front();
      break;
    case Branch::kLimited:
    case Branch::kSufficient:
      d.action = Action::kUndercut;
      d.block_template = bandwidth_txs(pool, params);
      break;
    default:
      break;
  }
  return d;
}

Decision undercut_decision_d2(const PowerSplit& split, double gamma, const ChainParams& params,
                              const MempoolView& pool, const HeadBlock& head) {
  Decision d;
  if (head.fee <= 0) {
    d.rationale = Branch::kEmptyHead;
    return d;
  }
  const bool single = !is_negligible(gamma, params.negligible_fee_threshold) &&
                      single_set_left(pool, params);
  d.rationale = classify_d2(split, gamma, params.negligible_fee_threshold, single);
  switch (d.rationale) {
    case Branch::kNegligible:
      d.action = Action::kUndercut;
      d.block_template = split_equal_fee(head.txs, 3, params).front();
      break;
    case Branch::kSingleSet:
      d.action = Action::kUndercut;
      d.block_template = split_equal_fee(bandwidth_txs(pool, params), 2, params).front();
      break;
    case Branch::kLimited:
    case Branch::kSufficient:
      d.action = Action::kUndercut;
      d.block_template = bandwidth_txs(pool, params);
      break;
    default:
      break;
  }
  return d;
}

int rational_join_d1(const PowerSplit& split, double gamma) {
  return gamma < join_threshold_d1(split.undercutter, split.honest) ? 1 : 0;
}

double rational_return_d2_tie(const PowerSplit& split, double gamma, double x) {
  require(in_unit(x), "x must lie in [0, 1]");
  const double bu = split.undercutter;
  const double bh = split.honest;
  const double br = split.rational;
  const double moved = x * br;
  const double p_main = bu * (1.0 - bu - moved) * (1.0 - bu - moved);
  const double p_fork = bu * (bu + moved) * (bu + moved + bh);
  return share(br, bh + br) * p_main + share(br - moved, bh + br - moved) * 2.0 * gamma * p_main +
         share(moved, moved + bu) * gamma * p_fork +
         share(moved, moved + bu + bh) * p_fork;
}

int rational_shift_d2_tie(const PowerSplit& split, double gamma) {
  return rational_return_d2_tie(split, gamma, 1.0) > rational_return_d2_tie(split, gamma, 0.0)
             ? 1
             : 0;
}

double shift_objective(const ForkState& state, int safe_depth, double movable_power,
                       ShiftDirection direction, const ShiftFees& fees, double x) {
  const int lead = state.lead();
  require(safe_depth >= 1 && std::abs(lead) < safe_depth, "lead must satisfy |lead| < D");
  require(in_unit(state.fork_power) && in_unit(movable_power), "powers must lie in [0, 1]");
  require(in_unit(x), "x must lie in [0, 1]");

  const double moved = x * movable_power;
  double fork_after = 0.0;
  double mine_main = 0.0;
  double mine_fork = 0.0;
  if (direction == ShiftDirection::kToFork) {
    require(state.fork_power + movable_power <= 1.0 + 1e-12, "mover exceeds the main chain's power");
    fork_after = state.fork_power + moved;
    mine_main = movable_power - moved;
    mine_fork = moved;
  } else {
    require(state.fork_power - movable_power >= -1e-12, "mover exceeds the fork's power");
    fork_after = state.fork_power - moved;
    mine_main = moved;
    mine_fork = movable_power - moved;
  }
  fork_after = std::clamp(fork_after, 0.0, 1.0);
  const double main_after = 1.0 - fork_after;
  const double p_fork = std::pow(fork_after, safe_depth - lead);
  const double p_main = std::pow(main_after, safe_depth + lead);
  return fees.owned_main * p_main + fees.owned_fork * p_fork +
         fees.claimable_main * share(mine_main, main_after) * p_main +
         fees.claimable_fork * share(mine_fork, fork_after) * p_fork;
}

double rational_shift_general(const ForkState& state, int safe_depth, double movable_power,
                              ShiftDirection direction, const ShiftFees& fees, int grid) {
  require(grid >= 1, "grid must be positive");
  double best_x = 0.0;
  double best = shift_objective(state, safe_depth, movable_power, direction, fees, 0.0);
  for (int i = 1; i <= grid; ++i) {
    const double x = static_cast<double>(i) / grid;
    const double v = shift_objective(state, safe_depth, movable_power, direction, fees, x);
    if (v > best) {
      best = v;
      best_x = x;
    }
  }
  return best_x;
}

double rational_shift_general(const ForkState& state, const PowerSplit& split, int safe_depth,
                              ShiftDirection direction, const ShiftFees& fees, int grid) {
  return rational_shift_general(state, safe_depth, split.rational, direction, fees, grid);
}

std::string to_string(const AvoidanceConfig& config) {
  switch (config.mode) {
    case AvoidanceMode::kOff: return "off";
    case AvoidanceMode::kExperimental: return "experimental";
    case AvoidanceMode::kExact: return "exact";
    case AvoidanceMode::kStrict: {
      std::string out = "strict=";
      char buf[32];
      const auto r = std::to_chars(buf, buf + sizeof buf, config.strict_factor);
      out.append(buf, r.ptr);
      return out;
    }
  }
  return "?";
}

AvoidanceConfig parse_avoidance(std::string_view text) {
  AvoidanceConfig c;
  if (text == "off") return c;
  if (text == "experimental") {
    c.mode = AvoidanceMode::kExperimental;
    return c;
  }
  if (text == "exact") {
    c.mode = AvoidanceMode::kExact;
    return c;
  }
  if (text == "strict") {
    c.mode = AvoidanceMode::kStrict;
    return c;
  }
  constexpr std::string_view prefix = "strict=";
  if (text.substr(0, prefix.size()) == prefix) {
    const auto value = text.substr(prefix.size());
    double factor = 0.0;
    const auto r = std::from_chars(value.data(), value.data() + value.size(), factor);
    if (r.ec == std::errc{} && r.ptr == value.data() + value.size() && factor > 0.0 &&
        factor <= 1.0) {
      c.mode = AvoidanceMode::kStrict;
      c.strict_factor = factor;
      return c;
    }
  }
  throw Error(ErrorCode::kInvalidArgument,
              "avoidance must be off, experimental, exact or strict=<factor in (0, 1]>, got '" +
                  std::string(text) + "'");
}

std::string_view to_string(AvoidanceStep step) {
  switch (step) {
    case AvoidanceStep::kWait: return "wait";
    case AvoidanceStep::kSplitHalf: return "split-half";
    case AvoidanceStep::kPartial: return "partial";
    case AvoidanceStep::kFull: return "full";
  }
  return "?";
}

double avoidance_target_ratio(int safe_depth, double bu, double bh, double negligible) {
  double target = 0.0;
  if (safe_depth == 1) {
    target = std::max(limited_bound_d1(bu), sufficient_bound_d1(bu, bh));
  } else {
    target = std::max(limited_bound_d2(bu), sufficient_bound_d2(bu, bh));
  }
  return std::max(target, negligible);
}

namespace {

// Whether the assumed adversary stays when the chain head carries `head`.
bool adversary_stays(const PowerSplit& split, int safe_depth, const MempoolView& pool,
                     Fee head_fee, const ChainParams& params) {
  if (head_fee <= 0) return true;
  const auto next = bandwidth_set(pool, params);
  const double gamma = gamma_ratio(next.total_fee, head_fee);
  if (classify_d1(split, gamma, params.negligible_fee_threshold) != Branch::kStay) return false;
  if (safe_depth == 1) return true;
  const bool single = !is_negligible(gamma, params.negligible_fee_threshold) &&
                      single_set_left(pool, params);
  return classify_d2(split, gamma, params.negligible_fee_threshold, single) == Branch::kStay;
}

AvoidanceResult make_result(std::vector<Transaction> block, AvoidanceStep step) {
  AvoidanceResult r;
  for (const auto& tx : block) r.claimed_fee += tx.fee;
  r.block = std::move(block);
  r.step = step;
  return r;
}

}  // namespace

AvoidanceResult craft_avoidance_block(const MempoolView& pool, const ChainParams& params,
                                      int safe_depth, Fee head_fee, double bu, double bh,
                                      AvoidanceMode mode, double strict_factor) {
  require(safe_depth == 1 || safe_depth == 2, "avoidance supports depth 1 or 2");
  require(mode != AvoidanceMode::kOff, "avoidance mode is off");
  require(strict_factor > 0.0 && strict_factor <= 1.0, "strict factor must lie in (0, 1]");
  const PowerSplit split = PowerSplit::from(bu, bh);
  const double negligible = params.negligible_fee_threshold;

  const auto set = bandwidth_set(pool, params);
  auto set_txs = greedy_order(select_by_id(pool.pending, set.tx_ids));
  if (is_negligible(gamma_ratio(set.total_fee, head_fee), negligible)) {
    return make_result({}, AvoidanceStep::kWait);
  }

  if (mode == AvoidanceMode::kExact) {
    // Largest greedy prefix of the bandwidth set after which the adversary
    // stays; the empty prefix always qualifies.
    std::vector<TxId> ids;
    ids.reserve(set_txs.size());
    for (const auto& tx : set_txs) ids.push_back(tx.id);
    Fee prefix_fee = set.total_fee;
    for (std::size_t k = set_txs.size(); k > 0; --k) {
      const std::span<const TxId> prefix(ids.data(), k);
      if (adversary_stays(split, safe_depth, without(pool, prefix), prefix_fee, params)) {
        set_txs.resize(k);
        return make_result(std::move(set_txs),
                           k == ids.size() ? AvoidanceStep::kFull : AvoidanceStep::kPartial);
      }
      prefix_fee -= set_txs[k - 1].fee;
    }
    return make_result({}, AvoidanceStep::kPartial);
  }

  if (safe_depth == 2 && single_set_left(pool, params)) {
    return make_result(split_equal_fee(set_txs, 2, params).front(), AvoidanceStep::kSplitHalf);
  }

  const Fee f0 = set.total_fee;
  const Fee f1 = bandwidth_set(without(pool, set.tx_ids), params).total_fee;
  const double target_ratio = avoidance_target_ratio(safe_depth, bu, bh, negligible);
  if (static_cast<double>(f1) >= target_ratio * static_cast<double>(f0)) {
    return make_result(std::move(set_txs), AvoidanceStep::kFull);
  }
  double target = static_cast<double>(f0 + f1) / (1.0 + target_ratio);
  if (mode == AvoidanceMode::kStrict) target *= strict_factor;
  const auto claim = claim_partial(pool, static_cast<Fee>(std::floor(target)), params);
  return make_result(greedy_order(select_by_id(pool.pending, claim.tx_ids)),
                     AvoidanceStep::kPartial);
}

}  // namespace undercut
