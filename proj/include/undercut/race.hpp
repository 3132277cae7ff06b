#pragma once

// Monte Carlo races used to check the closed forms against simulated block
// events.

#include <cstddef>
#include <cstdint>

#include "undercut/mempool.hpp"
#include "undercut/probability.hpp"
#include "undercut/random.hpp"

namespace undercut {

/// Fraction of races in which the fork's exponential clock (rate (O+delta)/I)
/// fires before the main chain's (rate (1-O-delta)/I).
double simulate_first_arrival(double fork_power, double shift_delta, const ChainParams& params,
                              std::size_t trials, std::uint64_t seed);

/// Fraction of +1/-1 walks from point.lead that reach +D before -D.
double simulate_walk_race(const RacePoint& point, std::size_t trials, std::uint64_t seed);

/// Rewards of one undercutting round in units of the attacked head's fee.
struct RoundRewards {
  double attack = 0.0;    // undercutter's fee income when it forks the head
  double baseline = 0.0;  // its income from extending the main chain instead
};

/// One simulated round. The fork starts one block behind and is abandoned
/// once D behind after a main block; it wins once D ahead. The fork's blocks
/// carry gamma each except block D+1, which re-claims the head (fee 1).
/// `joined_power` moves to the fork once it has a block. The baseline mines D
/// main blocks of fee gamma each.
RoundRewards simulate_round(int safe_depth, double undercutter_power, double gamma,
                            double joined_power, Rng& rng);

struct RoundStats {
  std::size_t trials = 0;
  double attack_mean = 0.0;
  double attack_var = 0.0;
  double baseline_mean = 0.0;
  double baseline_var = 0.0;

  /// z-statistic of attack_mean - baseline_mean (independent-sample SE).
  double z_score() const noexcept;
};

RoundStats simulate_rounds(int safe_depth, double undercutter_power, double gamma,
                           double joined_power, std::size_t trials, std::uint64_t seed);

}  // namespace undercut
