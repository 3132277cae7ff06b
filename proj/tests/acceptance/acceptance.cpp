// Acceptance run: one PASS/FAIL/SKIP line per criterion, exit status 1 when
// any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "undercut/engine.hpp"
#include "undercut/error.hpp"
#include "undercut/experiment.hpp"
#include "undercut/mempool.hpp"
#include "undercut/probability.hpp"
#include "undercut/race.hpp"
#include "undercut/strategy.hpp"
#include "undercut/trace.hpp"

using namespace undercut;

namespace {

struct Outcome {
  enum class Status { kPass, kFail, kSkip } status = Status::kFail;
  std::string detail;
};

Outcome pass(std::string detail) { return {Outcome::Status::kPass, std::move(detail)}; }
Outcome fail(std::string detail) { return {Outcome::Status::kFail, std::move(detail)}; }
Outcome verdict(bool ok, std::string detail) { return ok ? pass(detail) : fail(detail); }

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Independent term-by-term sum of a^(D-lead) (a(1-a))^k, stopping once a
// term drops below 1e-12.
double series_oracle(double a, int depth, int lead) {
  double sum = 0.0;
  for (int k = 0;; ++k) {
    const double term = std::pow(a, depth - lead) * std::pow(a * (1.0 - a), k);
    if (term < 1e-12) break;
    sum += term;
  }
  return sum;
}

Outcome probability_oracle() {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  int points = 0;
  for (int i = 1; i <= 19; ++i) {
    const double a = 0.05 * i;
    for (int depth = 1; depth <= 2; ++depth) {
      for (int lead = -1; lead <= 1; ++lead) {
        if (std::abs(lead) >= depth) continue;
        const RacePoint p{a, depth, lead};
        const double closed = win_prob_series(p);
        worst = std::max(worst, std::abs(closed - win_prob_series_truncated(p, 1e-12)));
        worst = std::max(worst, std::abs(closed - series_oracle(a, depth, lead)));
        ++points;
      }
    }
  }
  const double elapsed = seconds_since(start);
  return verdict(worst <= 1e-9 && elapsed < 1.0,
                 fmt("%d points, max |closed - truncated| = %.2e, %.3f s", points, worst, elapsed));
}

Outcome catchup_bound() {
  const auto start = std::chrono::steady_clock::now();
  const double at_half = deep_catchup_bound(0.5, 5);
  bool below = true;
  double largest = 0.0;
  for (int i = 1; i < 50; ++i) {
    const double v = deep_catchup_bound(0.01 * i, 5);
    largest = std::max(largest, v);
    below = below && v < 1.0 / 24.0;
  }
  const double elapsed = seconds_since(start);
  const bool ok = std::abs(at_half - 1.0 / 24.0) <= 1e-12 && below && elapsed < 1.0;
  return verdict(ok, fmt("bound(0.5, 5) = %.15f, max over a < 0.5 = %.6f, %.3f s", at_half,
                         largest, elapsed));
}

Outcome first_arrival() {
  const auto start = std::chrono::steady_clock::now();
  const ChainParams params;
  const std::pair<double, double> cases[] = {{0.2, 0.0}, {0.3, 0.1}, {0.45, 0.05}};
  bool ok = true;
  std::string detail;
  std::uint64_t seed = 101;
  for (const auto& [o, d] : cases) {
    const double freq = simulate_first_arrival(o, d, params, 100'000, seed++);
    ok = ok && std::abs(freq - (o + d)) <= 0.01;
    detail += fmt("(%.2f,%.2f)->%.4f ", o, d, freq);
  }
  const double elapsed = seconds_since(start);
  return verdict(ok && elapsed < 60.0, detail + fmt("%.2f s", elapsed));
}

// A head of ten 1,000-fee transactions and a pool whose first bandwidth set
// carries gamma times the head, followed by two cheaper sets.
struct BoundaryState {
  ChainParams params;
  MempoolView pool;
  HeadBlock head;
  double gamma = 0.0;
};

BoundaryState boundary_state(double gamma) {
  BoundaryState s;
  s.params.block_size_limit = 1000;
  TxId id = 1;
  for (int i = 0; i < 10; ++i) {
    s.head.txs.push_back({id++, 0.0, 100, 1000});
    s.head.fee += 1000;
  }
  const auto top = static_cast<Fee>(std::llround(gamma * 1000.0));
  for (int i = 0; i < 10; ++i) s.pool.pending.push_back({id++, 1.0, 100, top});
  for (int i = 0; i < 20; ++i) s.pool.pending.push_back({id++, 2.0, 100, top / 2});
  s.gamma = gamma_ratio(s.pool, s.head.fee, s.params);
  return s;
}

Outcome boundary() {
  bool ok = true;
  std::string detail;

  const auto d1 = PowerSplit::from(0.2, 0.1);
  {
    const auto s = boundary_state(0.24);
    const auto dec = undercut_decision_d1(d1, s.gamma, s.params, s.pool, s.head);
    const double joined = rational_join_d1(d1, s.gamma) * d1.rational;
    const auto stats = simulate_rounds(1, d1.undercutter, s.gamma, joined, 1'000'000, 7);
    ok = ok && dec.action == Action::kUndercut && stats.z_score() > 1.645;
    detail += fmt("D1 g=%.2f %s z=%.1f; ", s.gamma, dec.action == Action::kUndercut ? "undercut" : "stay",
                  stats.z_score());
  }
  {
    const auto s = boundary_state(0.26);
    const auto dec = undercut_decision_d1(d1, s.gamma, s.params, s.pool, s.head);
    ok = ok && dec.action == Action::kStay;
    detail += fmt("D1 g=%.2f %s; ", s.gamma, dec.action == Action::kStay ? "stay" : "undercut");
  }

  const auto d2 = PowerSplit::from(0.5, 0.3);
  {
    const auto s = boundary_state(0.49);
    const auto dec = undercut_decision_d2(d2, s.gamma, s.params, s.pool, s.head);
    const double joined = rational_shift_d2_tie(d2, s.gamma) * d2.rational;
    const auto stats = simulate_rounds(2, d2.undercutter, s.gamma, joined, 1'000'000, 8);
    ok = ok && dec.action == Action::kUndercut && stats.z_score() > 1.645;
    detail += fmt("D2 g=%.2f %s z=%.1f; ", s.gamma, dec.action == Action::kUndercut ? "undercut" : "stay",
                  stats.z_score());
  }
  {
    const auto s = boundary_state(0.51);
    const auto dec = undercut_decision_d2(d2, s.gamma, s.params, s.pool, s.head);
    ok = ok && dec.action == Action::kStay;
    detail += fmt("D2 g=%.2f %s", s.gamma, dec.action == Action::kStay ? "stay" : "undercut");
  }
  return verdict(ok, detail);
}

Fee brute_force(const std::vector<Transaction>& txs, Size limit) {
  Fee best = 0;
  for (std::uint32_t mask = 0; mask < (1U << txs.size()); ++mask) {
    Size size = 0;
    Fee fee = 0;
    for (std::size_t i = 0; i < txs.size(); ++i) {
      if ((mask >> i) & 1U) {
        size += txs[i].size;
        fee += txs[i].fee;
      }
    }
    if (size <= limit && fee > best) best = fee;
  }
  return best;
}

Outcome bandwidth_oracle() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(5);
  ChainParams params;
  params.block_size_limit = 1000;
  int mismatches = 0;
  int greedy_above = 0;
  int greedy_short = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = std::uniform_int_distribution<int>(0, 15)(rng);
    MempoolView pool;
    for (int i = 0; i < n; ++i) {
      pool.pending.push_back({static_cast<TxId>(i + 1), 0.0,
                              std::uniform_int_distribution<Size>(1, 400)(rng),
                              std::uniform_int_distribution<Fee>(0, 10'000)(rng)});
    }
    const auto exact = bandwidth_set(pool, params, SelectionMode::kExact);
    const auto greedy = bandwidth_set(pool, params, SelectionMode::kGreedy);
    const auto chosen = summarize(select_by_id(pool.pending, exact.tx_ids));
    if (exact.total_fee != brute_force(pool.pending, params.block_size_limit) ||
        chosen.total_fee != exact.total_fee || chosen.total_size > params.block_size_limit) {
      ++mismatches;
    }
    if (greedy.total_fee > exact.total_fee) ++greedy_above;
    if (greedy.total_fee < exact.total_fee) ++greedy_short;
  }
  const double elapsed = seconds_since(start);
  return verdict(mismatches == 0 && greedy_above == 0 && elapsed < 30.0,
                 fmt("1000 pools, %d mismatches, greedy above exact %d, greedy below exact %d, "
                     "%.2f s",
                     mismatches, greedy_above, greedy_short, elapsed));
}

Outcome fair_share() {
  const auto p = preset("bitcoin16");
  SynthConfig synth;
  synth.duration = 200 * p.params.block_interval;
  synth.rate = 5000.0 / synth.duration;
  synth.fees = FeeDistribution::uniform(1000, 5000);
  synth.seed = 16;
  const auto trace = synthesize_trace(synth);

  ExperimentConfig config;
  config.powers = p.powers;
  config.params = p.params;
  config.honest_fractions = {0.0};
  config.repetitions = 50;
  config.base_seed = 606;
  config.all_honest = true;
  const auto summary = run_experiment(config, trace);

  std::map<int, std::pair<double, double>> by_id;  // id -> (power, mean share)
  for (const auto& cell : summary.cells) {
    for (std::size_t i = 0; i < cell.miners.size(); ++i) {
      auto& slot = by_id[cell.miners[i].id];
      slot.first += cell.miners[i].power;
      slot.second += cell.miner_mean_shares[i];
    }
  }
  double worst = 0.0;
  int worst_id = 0;
  for (const auto& [id, v] : by_id) {
    const double gap = std::abs(v.second - v.first);
    if (gap > worst) {
      worst = gap;
      worst_id = id;
    }
  }
  return verdict(worst <= 0.02, fmt("%zu miners, %zu txs, largest |share - power| = %.4f (miner %d)",
                                    by_id.size(), trace.size(), worst, worst_id));
}

// Sixty batches of about 1,000 pareto-fee transactions, each arriving within
// one second and followed by twenty quiet block intervals.
std::vector<TraceRecord> batch_trace(const ChainParams& params) {
  std::vector<TraceRecord> out;
  for (int b = 0; b < 60; ++b) {
    SynthConfig synth;
    synth.rate = 1000.0;
    synth.duration = 1.0;
    synth.start_time = 20.0 * params.block_interval * b;
    synth.fees = FeeDistribution::pareto(1.5, 1000.0);
    synth.min_size = params.block_size_limit / 300;
    synth.max_size = params.block_size_limit / 100;
    synth.seed = 7000 + static_cast<std::uint64_t>(b);
    for (auto tx : synthesize_trace(synth)) {
      tx.id = static_cast<TxId>(out.size() + 1);
      out.push_back(tx);
    }
  }
  return out;
}

struct Sweep {
  double mean_share = 0.0;  // averaged over honest-fraction cells
  std::size_t attacks = 0;
};

Sweep sweep(const Preset& p, const std::vector<TraceRecord>& trace, AvoidanceMode mode,
            int repetitions, std::uint64_t seed) {
  ExperimentConfig config;
  config.powers = p.powers;
  config.params = p.params;
  config.repetitions = repetitions;
  config.base_seed = seed;
  config.avoidance.mode = mode;
  const auto summary = run_experiment(config, trace);
  Sweep out;
  for (const auto& cell : summary.cells) {
    out.mean_share += cell.mean_share;
    out.attacks += cell.attacks;
  }
  out.mean_share /= static_cast<double>(summary.cells.size());
  return out;
}

Outcome avoidance_efficacy() {
  bool ok = true;
  std::string detail;
  for (const char* name : {"bitcoin16", "bitcoin-hypothetical45"}) {
    const auto p = preset(name);
    const auto trace = batch_trace(p.params);
    const auto off = sweep(p, trace, AvoidanceMode::kOff, 50, 77);
    const auto on = sweep(p, trace, AvoidanceMode::kExperimental, 50, 77);
    ok = ok && on.attacks < off.attacks && on.mean_share <= off.mean_share;
    detail += fmt("%s: attacks %zu -> %zu, share %.4f -> %.4f; ", name, off.attacks, on.attacks,
                  off.mean_share, on.mean_share);
  }
  detail.resize(detail.size() - 2);
  return verdict(ok, detail);
}

Outcome exact_fixpoint() {
  std::mt19937_64 rng(8);
  ChainParams params;
  params.block_size_limit = 1000;
  int violations = 0;
  int claimed = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 20)(rng);
    MempoolView pool;
    for (int i = 0; i < n; ++i) {
      const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      pool.pending.push_back({static_cast<TxId>(i + 1), 0.0,
                              std::uniform_int_distribution<Size>(20, 400)(rng),
                              static_cast<Fee>(std::floor(100.0 / std::pow(1.0 - u, 1.0 / 1.5)))});
    }
    const double bh = std::uniform_real_distribution<double>(0.0, 0.5)(rng);
    const Fee head_fee = std::uniform_int_distribution<Fee>(0, 3 * pool.total_fee())(rng);
    const auto res = craft_avoidance_block(pool, params, 2, head_fee, 0.5, bh, AvoidanceMode::kExact);
    if (!res.block.empty()) ++claimed;

    std::vector<TxId> ids;
    for (const auto& tx : res.block) ids.push_back(tx.id);
    const auto after = without(pool, ids);
    const HeadBlock head{res.claimed_fee, res.block};
    const auto split = PowerSplit::from(0.5, bh);
    const double gamma = gamma_ratio(after, head.fee, params);
    const auto d1 = undercut_decision_d1(split, gamma, params, after, head);
    const auto d2 = undercut_decision_d2(split, gamma, params, after, head);
    if (d1.action != Action::kStay || d2.action != Action::kStay) ++violations;
  }
  return verdict(violations == 0,
                 fmt("1000 pools (%d non-empty claims), %d decisions other than stay", claimed,
                     violations));
}

Outcome real_trace_shares() {
  const char* bitcoin = std::getenv("UNDERCUT_BITCOIN_TRACE");
  const char* monero = std::getenv("UNDERCUT_MONERO_TRACE");
  if (bitcoin == nullptr && monero == nullptr) {
    return {Outcome::Status::kSkip,
            "set UNDERCUT_BITCOIN_TRACE and/or UNDERCUT_MONERO_TRACE to real trace files"};
  }
  bool ok = true;
  std::string detail;
  auto check = [&](const char* name, const char* path, int reps, double lo, double hi) {
    const auto p = preset(name);
    const auto s = sweep(p, load_trace(path), AvoidanceMode::kOff, reps, 1);
    ok = ok && s.mean_share >= lo && s.mean_share <= hi;
    detail += fmt("%s %.4f in [%.2f, %.2f]; ", name, s.mean_share, lo, hi);
  };
  if (bitcoin != nullptr) {
    check("bitcoin16", bitcoin, 50, 0.17, 0.19);
    check("bitcoin-hypothetical45", bitcoin, 50, 0.47, 0.52);
  }
  if (monero != nullptr) check("monero", monero, 10, 0.40, 0.46);
  detail.resize(detail.size() - 2);
  return verdict(ok, detail);
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"1 probability oracle", probability_oracle},
      {"2 deep catch-up bound", catchup_bound},
      {"3 first-arrival race", first_arrival},
      {"4 boundary consistency", boundary},
      {"5 bandwidth-set oracle", bandwidth_oracle},
      {"6 fair-share baseline", fair_share},
      {"7 avoidance efficacy", avoidance_efficacy},
      {"8 exact-avoidance fixpoint", exact_fixpoint},
      {"9 real-trace shares", real_trace_shares},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Outcome out;
    try {
      out = run();
    } catch (const std::exception& e) {
      out = fail(std::string("exception: ") + e.what());
    }
    const char* tag = out.status == Outcome::Status::kPass   ? "PASS"
                      : out.status == Outcome::Status::kSkip ? "SKIP"
                                                             : "FAIL";
    if (out.status == Outcome::Status::kFail) ++failures;
    std::printf("%s  criterion %s: %s\n", tag, name, out.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
