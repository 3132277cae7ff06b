#include "undercut/race.hpp"

#include <cmath>
#include <limits>

#include "undercut/error.hpp"

namespace undercut {

double simulate_first_arrival(double fork_power, double shift_delta, const ChainParams& params,
                              std::size_t trials, std::uint64_t seed) {
  const double p = win_prob_d1(fork_power, shift_delta);
  const auto rates = chain_rates(p, params);
  if (trials == 0) return 0.0;
  if (rates.fork_rate == 0.0) return 0.0;
  if (rates.main_rate == 0.0) return 1.0;

  Rng rng(seed);
  std::exponential_distribution<double> main_clock(rates.main_rate);
  std::exponential_distribution<double> fork_clock(rates.fork_rate);
  std::size_t wins = 0;
  for (std::size_t i = 0; i < trials; ++i) {
    const double x = main_clock(rng);
    const double y = fork_clock(rng);
    if (y < x) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(trials);
}

double simulate_walk_race(const RacePoint& point, std::size_t trials, std::uint64_t seed) {
  point.validate();
  if (trials == 0) return 0.0;
  Rng rng(seed);
  std::bernoulli_distribution fork_step(point.fork_power);
  std::size_t wins = 0;
  for (std::size_t i = 0; i < trials; ++i) {
    int lead = point.lead;
    while (lead > -point.safe_depth && lead < point.safe_depth) {
      lead += fork_step(rng) ? 1 : -1;
    }
    if (lead >= point.safe_depth) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(trials);
}

RoundRewards simulate_round(int safe_depth, double undercutter_power, double gamma,
                            double joined_power, Rng& rng) {
  if (safe_depth < 1) throw Error(ErrorCode::kInvalidArgument, "safe_depth must be >= 1");
  const double bu = undercutter_power;
  const double fork_after_tie = bu + joined_power;
  if (!(bu > 0.0) || !(fork_after_tie <= 1.0) || joined_power < 0.0) {
    throw Error(ErrorCode::kDegenerateRace, "invalid undercutter or joined power");
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RoundRewards out;

  for (int i = 0; i < safe_depth; ++i) {
    if (unit(rng) < bu) out.baseline += gamma;
  }

  int lead = -1;
  int fork_blocks = 0;
  double earned = 0.0;
  for (;;) {
    const double fork_power = fork_blocks == 0 ? bu : fork_after_tie;
    if (unit(rng) < fork_power) {
      ++fork_blocks;
      const double fee = fork_blocks == safe_depth + 1 ? 1.0 : gamma;
      const bool own = fork_blocks == 1 || unit(rng) * fork_after_tie < bu;
      if (own) earned += fee;
      if (++lead >= safe_depth) {
        out.attack = earned;
        return out;
      }
    } else if (--lead <= -safe_depth) {
      return out;
    }
  }
}

double RoundStats::z_score() const noexcept {
  if (trials == 0) return 0.0;
  const double n = static_cast<double>(trials);
  const double se = std::sqrt(attack_var / n + baseline_var / n);
  const double diff = attack_mean - baseline_mean;
  if (se == 0.0) {
    if (diff == 0.0) return 0.0;
    return diff > 0 ? std::numeric_limits<double>::infinity()
                    : -std::numeric_limits<double>::infinity();
  }
  return diff / se;
}

RoundStats simulate_rounds(int safe_depth, double undercutter_power, double gamma,
                           double joined_power, std::size_t trials, std::uint64_t seed) {
  Rng rng(seed);
  RoundStats s;
  s.trials = trials;
  // Welford accumulators.
  double a_mean = 0, a_m2 = 0, b_mean = 0, b_m2 = 0;
  for (std::size_t i = 0; i < trials; ++i) {
    const auto r = simulate_round(safe_depth, undercutter_power, gamma, joined_power, rng);
    const double k = static_cast<double>(i + 1);
    const double da = r.attack - a_mean;
    a_mean += da / k;
    a_m2 += da * (r.attack - a_mean);
    const double db = r.baseline - b_mean;
    b_mean += db / k;
    b_m2 += db * (r.baseline - b_mean);
  }
  s.attack_mean = a_mean;
  s.baseline_mean = b_mean;
  if (trials > 1) {
    s.attack_var = a_m2 / static_cast<double>(trials - 1);
    s.baseline_var = b_m2 / static_cast<double>(trials - 1);
  }
  return s;
}

}  // namespace undercut
