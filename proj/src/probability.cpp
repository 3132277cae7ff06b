#include "undercut/probability.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

#include "undercut/error.hpp"

namespace undercut {

namespace {

void require_unit(double value, const char* name) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, std::string(name) + " must lie in [0, 1]");
  }
}

}  // namespace

void RacePoint::validate() const {
  require_unit(fork_power, "fork_power");
  if (safe_depth < 1) throw Error(ErrorCode::kInvalidArgument, "safe_depth must be >= 1");
  if (std::abs(lead) >= safe_depth) {
    throw Error(ErrorCode::kInvalidArgument, "|lead| must be smaller than safe_depth");
  }
}

ChainRates chain_rates(double fork_power, const ChainParams& params) {
  require_unit(fork_power, "fork_power");
  params.validate();
  return {(1.0 - fork_power) / params.block_interval, fork_power / params.block_interval};
}

double win_prob_d1(double fork_power, double shift_delta) {
  const double p = fork_power + shift_delta;
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error(ErrorCode::kInvalidShift, "fork power plus shift must lie in [0, 1]");
  }
  return p;
}

double win_prob_series(const RacePoint& point) {
  point.validate();
  const double a = point.fork_power;
  if (a == 0.0) return 0.0;
  if (a == 1.0) return 1.0;
  return std::pow(a, point.safe_depth - point.lead) / (1.0 - a * (1.0 - a));
}

double win_prob_series_truncated(const RacePoint& point, double cutoff) {
  point.validate();
  const double a = point.fork_power;
  if (a == 0.0) return 0.0;
  if (a == 1.0) return 1.0;
  const double ratio = a * (1.0 - a);
  double term = std::pow(a, point.safe_depth - point.lead);
  double sum = 0.0;
  while (term >= cutoff) {
    sum += term;
    term *= ratio;
  }
  return sum;
}

double race_win_prob(const RacePoint& point) {
  point.validate();
  const double a = point.fork_power;
  if (a == 0.0) return 0.0;
  if (a == 1.0) return 1.0;
  const int d = point.safe_depth;
  const int start = point.lead + d;  // distance above the losing barrier
  if (a == 0.5) return static_cast<double>(start) / (2.0 * d);
  const double r = (1.0 - a) / a;
  return (1.0 - std::pow(r, start)) / (1.0 - std::pow(r, 2 * d));
}

double deep_catchup_bound(double fork_power, int gap) {
  if (!(fork_power >= 0.0 && fork_power <= 0.5)) {
    throw Error(ErrorCode::kInvalidArgument, "deep_catchup_bound needs fork_power in [0, 0.5]");
  }
  if (gap < 5) throw Error(ErrorCode::kInvalidArgument, "deep_catchup_bound needs gap >= 5");
  const double a = fork_power;
  return std::pow(a, gap) / (1.0 - a * (1.0 - a));
}

}  // namespace undercut
