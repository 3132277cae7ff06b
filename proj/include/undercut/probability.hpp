#pragma once

#include "undercut/mempool.hpp"

namespace undercut {

/// Race position: effective fork power a, safe depth D and the fork's lead
/// n - m (negative when the fork is behind). |lead| < safe_depth.
struct RacePoint {
  double fork_power = 0.0;
  int safe_depth = 1;
  int lead = 0;

  void validate() const;
};

struct ChainRates {
  double main_rate = 0.0;
  double fork_rate = 0.0;
};

/// Thinned Poisson rates ((1 - O) / I, O / I).
ChainRates chain_rates(double fork_power, const ChainParams& params);

/// Fork win probability at the single D = 1 decision point: O + delta.
/// Throws Error(kInvalidShift) when the sum leaves [0, 1].
double win_prob_d1(double fork_power, double shift_delta);

/// sum_i a^(D - lead + i) (1 - a)^i in closed form: a^(D - lead) / (1 - a(1 - a)).
double win_prob_series(const RacePoint& point);

/// The same series summed term by term until a term drops below cutoff.
double win_prob_series_truncated(const RacePoint& point, double cutoff = 1e-12);

/// Probability that a +1/-1 walk with up-probability a, started at `lead`,
/// reaches +D before -D. This is the race the simulator actually plays; it
/// differs from the series above (1/2 vs 1/3 for a tie at a = 0.5, D = 2).
double race_win_prob(const RacePoint& point);

/// Series value for a chain `gap` = D - lead >= 5 blocks from winning with
/// power a <= 0.5. Never exceeds 1/24.
double deep_catchup_bound(double fork_power, int gap);

}  // namespace undercut
