#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "undercut/mempool.hpp"

namespace undercut {

/// Mining power split between the undercutter, honest miners and the other
/// rational miners. Analytical code accepts undercutter <= 0.5 (the boundary
/// cases are part of the analysis); simulated populations must stay below it.
struct PowerSplit {
  double undercutter = 0.0;
  double honest = 0.0;
  double rational = 0.0;

  /// Rational power is whatever the other two leave.
  static PowerSplit from(double undercutter, double honest);

  void validate() const;
};

/// Which decision-box branch fired. Kept on every decision for auditing.
enum class Branch {
  kStay,
  kEmptyHead,   // head block carries no fee; nothing to undercut
  kNegligible,  // gamma at or below the negligible bound
  kSingleSet,   // only one non-negligible bandwidth set left (D = 2)
  kLimited,     // gamma below the limited-mempool bound
  kSufficient,  // gamma below the sufficient-mempool bound
};

std::string_view to_string(Branch branch);

/// Branch number as listed in the decision box for that depth; 0 for stay.
int branch_number(Branch branch, int safe_depth);

enum class Action { kStay, kUndercut, kShift };

struct Decision {
  Action action = Action::kStay;
  std::vector<Transaction> block_template;  // undercut only
  int target_chain = -1;                     // shift only
  double fraction = 0.0;                     // shift only, in [0, 1]
  Branch rationale = Branch::kStay;
};

struct ReturnEstimate {
  double attack_return = 0.0;
  double baseline_return = 0.0;
};

/// The block being considered for undercutting.
struct HeadBlock {
  Fee fee = 0;
  std::vector<Transaction> txs;
};

// Profitability bounds on gamma.
double limited_bound_d1(double undercutter);
double sufficient_bound_d1(double undercutter, double honest);
double limited_bound_d2(double undercutter);
double sufficient_bound_d2(double undercutter, double honest);
/// Rational miners join a D = 1 fork below this gamma.
double join_threshold_d1(double undercutter, double honest);
/// Rational miners shift at the D = 2 tie below this gamma (+inf at 0.5).
double shift_threshold_d2_tie(double undercutter, double honest);

inline bool is_negligible(double gamma, double threshold) { return gamma <= threshold; }

/// After one bandwidth set is removed, the remaining fee is at most
/// threshold times that set's fee (and the set itself carries fees).
bool single_set_left(const MempoolView& pool, const ChainParams& params);

/// E[R_u] = (gamma + bu / (bu + delta)) * bu * (bu + delta); E[R'_u] = bu * gamma.
ReturnEstimate expected_returns_d1(const PowerSplit& split, double gamma, double delta);

/// E[R_u] = bu^2 (2 gamma + bu) / (1 - bu (1 - bu)); E[R'_u] = 2 bu gamma.
ReturnEstimate expected_returns_d2(const PowerSplit& split, double gamma);

Branch classify_d1(const PowerSplit& split, double gamma, double negligible);
Branch classify_d2(const PowerSplit& split, double gamma, double negligible, bool single_set);

Decision undercut_decision_d1(const PowerSplit& split, double gamma, const ChainParams& params,
                              const MempoolView& pool, const HeadBlock& head);
Decision undercut_decision_d2(const PowerSplit& split, double gamma, const ChainParams& params,
                              const MempoolView& pool, const HeadBlock& head);

/// 1 when rational miners should join the D = 1 fork at the tie, else 0.
int rational_join_d1(const PowerSplit& split, double gamma);

/// Collective rational return at the D = 2 tie when shifting fraction x.
double rational_return_d2_tie(const PowerSplit& split, double gamma, double x);

/// Endpoint argmax of rational_return_d2_tie (ties stay at 0).
int rational_shift_d2_tie(const PowerSplit& split, double gamma);

/// Race snapshot. m and n are the heights of the main chain and the fork
/// above the fork point.
struct ForkState {
  int m = 0;
  int n = 0;
  std::vector<Fee> fees_main;
  std::vector<Fee> fees_fork;
  double fork_power = 0.0;
  double shift_delta = 0.0;
  double rate_main = 0.0;
  double rate_fork = 0.0;

  int lead() const noexcept { return n - m; }
};

enum class ShiftDirection { kToFork, kToMain };

/// Fee inputs of the general shift objective, in fee units.
struct ShiftFees {
  double owned_main = 0.0;
  double owned_fork = 0.0;
  double claimable_main = 0.0;
  double claimable_fork = 0.0;
};

/// Expected rational income when `movable_power` moves fraction x of itself
/// toward `direction`. The fork needs D - lead more blocks and the main
/// chain D + lead; claimable fees are weighted by the mover's share of the
/// chain's power after the move.
double shift_objective(const ForkState& state, int safe_depth, double movable_power,
                       ShiftDirection direction, const ShiftFees& fees, double x);

/// Grid search of shift_objective over x in {0, 1/grid, ..., 1}; the first
/// (smallest) maximizer wins.
double rational_shift_general(const ForkState& state, int safe_depth, double movable_power,
                              ShiftDirection direction, const ShiftFees& fees, int grid = 100);

/// Collective form: the rational power of `split` is the mover.
double rational_shift_general(const ForkState& state, const PowerSplit& split, int safe_depth,
                              ShiftDirection direction, const ShiftFees& fees, int grid = 100);

enum class AvoidanceMode { kOff, kExperimental, kExact, kStrict };

struct AvoidanceConfig {
  AvoidanceMode mode = AvoidanceMode::kOff;
  double strict_factor = 0.8;
  double assumed_undercutter_power = 0.5;
  /// Unset means "use the population's honest fraction".
  std::optional<double> assumed_honest_power;
};

std::string to_string(const AvoidanceConfig& config);
/// Parses off | experimental | exact | strict=<factor>.
AvoidanceConfig parse_avoidance(std::string_view text);

enum class AvoidanceStep {
  kWait,       // pool is negligible next to the head: publish nothing
  kSplitHalf,  // one bandwidth set left: claim one of two equal-fee halves
  kPartial,    // claim only part of the bandwidth set
  kFull,       // conditions already fail: claim the bandwidth set
};

std::string_view to_string(AvoidanceStep step);

struct AvoidanceResult {
  std::vector<Transaction> block;
  Fee claimed_fee = 0;
  AvoidanceStep step = AvoidanceStep::kFull;
};

/// Smallest post-claim gamma that defeats every undercutting condition of
/// the given depth for the assumed adversary.
double avoidance_target_ratio(int safe_depth, double assumed_undercutter,
                              double assumed_honest, double negligible);

/// Crafts a block that leaves undercutting unprofitable for the assumed
/// adversary. head_fee is the fee of the block the new one would extend.
///
/// Experimental and strict modes follow the decision box literally and size
/// the claim as (f0 + f1) / (1 + target) from the current and next
/// bandwidth-set fees, without re-packing what is left over. Exact mode
/// searches greedy prefixes of the bandwidth set, largest first, for one
/// after which both the D = 1 and (for depth 2) the D = 2 decisions stay.
AvoidanceResult craft_avoidance_block(const MempoolView& pool, const ChainParams& params,
                                      int safe_depth, Fee head_fee,
                                      double assumed_undercutter_power,
                                      double assumed_honest_power, AvoidanceMode mode,
                                      double strict_factor = 0.8);

}  // namespace undercut
