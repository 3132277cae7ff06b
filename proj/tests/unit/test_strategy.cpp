#include <cmath>
#include <random>

#include "doctest.h"
#include "test_support.hpp"
#include "undercut/error.hpp"
#include "undercut/strategy.hpp"

using namespace undercut;
using test::tx;

namespace {

ChainParams limit(Size b, double negligible = 0.01) {
  ChainParams p;
  p.block_size_limit = b;
  p.negligible_fee_threshold = negligible;
  return p;
}

Fee fee_of(const std::vector<Transaction>& txs) {
  Fee f = 0;
  for (const auto& t : txs) f += t.fee;
  return f;
}

std::vector<TxId> ids_of(const std::vector<Transaction>& txs) {
  std::vector<TxId> ids;
  for (const auto& t : txs) ids.push_back(t.id);
  return ids;
}

// A pool whose greedy bandwidth sets carry the given fees, one unit-size
// transaction of fee 1 per unit of fee, with block limit `per_block`.
MempoolView unit_pool(int count) {
  MempoolView pool;
  for (int i = 0; i < count; ++i) pool.pending.push_back(tx(static_cast<TxId>(i + 1), 1, 1));
  return pool;
}

}  // namespace

TEST_CASE("power split validation") {
  CHECK_NOTHROW(PowerSplit::from(0.2, 0.5));
  CHECK(PowerSplit::from(0.2, 0.5).rational == doctest::Approx(0.3));
  CHECK_NOTHROW(PowerSplit::from(0.5, 0.5));
  CHECK_THROWS_AS(PowerSplit::from(0.6, 0.1), Error);
  CHECK_THROWS_AS(PowerSplit::from(0.3, 0.8), Error);
  PowerSplit bad{0.2, 0.2, 0.2};
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("expected returns at depth 1") {
  auto r = expected_returns_d1(PowerSplit::from(0.2, 0.5), 0.25, 0.0);
  CHECK(r.attack_return == doctest::Approx(0.05));
  CHECK(r.baseline_return == doctest::Approx(0.05));
  r = expected_returns_d1(PowerSplit::from(0.5, 0.3), 1.0, 0.0);
  CHECK(r.attack_return == doctest::Approx(0.5));
  CHECK(r.baseline_return == doctest::Approx(0.5));
  r = expected_returns_d1(PowerSplit::from(0.3, 0.3), 0.0, 0.0);
  CHECK(r.attack_return == doctest::Approx(0.09));
  CHECK(r.baseline_return == 0.0);
  try {
    expected_returns_d1(PowerSplit::from(0.0, 0.5), 0.1, 0.0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerateRace);
  }
}

TEST_CASE("expected returns at depth 2") {
  auto r = expected_returns_d2(PowerSplit::from(0.5, 0.2), 0.5);
  CHECK(r.attack_return == doctest::Approx(0.5));
  CHECK(r.baseline_return == doctest::Approx(0.5));
  // The limited-mempool boundary for bu = 0.2 sits near 0.03.
  const double bound = limited_bound_d2(0.2);
  CHECK(std::abs(bound - 0.03) < 0.0015);
  r = expected_returns_d2(PowerSplit::from(0.2, 0.2), bound);
  CHECK(r.attack_return == doctest::Approx(r.baseline_return));
  r = expected_returns_d2(PowerSplit::from(0.2, 0.2), 0.0);
  CHECK(r.baseline_return == 0.0);
  CHECK(r.attack_return > 0.0);
}

TEST_CASE("depth-1 decision examples") {
  CHECK(classify_d1(PowerSplit::from(0.2, 0.5), 0.2, 0.01) == Branch::kLimited);
  CHECK(classify_d1(PowerSplit::from(0.2, 0.0), 0.2, 0.01) == Branch::kLimited);
  CHECK(classify_d1(PowerSplit::from(0.2, 0.5), 0.3, 0.01) == Branch::kSufficient);
  CHECK(branch_number(Branch::kSufficient, 1) == 3);
  CHECK(classify_d1(PowerSplit::from(0.2, 0.5), 0.5, 0.01) == Branch::kStay);
  CHECK(classify_d1(PowerSplit::from(0.2, 0.1), 0.26, 0.01) == Branch::kStay);
  CHECK(classify_d1(PowerSplit::from(0.2, 0.1), 0.005, 0.01) == Branch::kNegligible);
  CHECK(sufficient_bound_d1(0.2, 0.0) == 0.0);
}

TEST_CASE("depth-2 decision examples") {
  CHECK(limited_bound_d2(0.3) == doctest::Approx(0.0918).epsilon(0.001));
  CHECK(classify_d2(PowerSplit::from(0.3, 0.3), 0.05, 0.01, false) == Branch::kLimited);
  CHECK(classify_d2(PowerSplit::from(0.5, 0.3), 0.4, 0.01, false) == Branch::kLimited);
  CHECK(branch_number(Branch::kLimited, 2) == 3);
  CHECK(shift_threshold_d2_tie(0.45, 0.1) == doctest::Approx(3.68).epsilon(0.001));
  CHECK(sufficient_bound_d2(0.45, 0.1) == doctest::Approx(0.623).epsilon(0.001));
  CHECK(classify_d2(PowerSplit::from(0.45, 0.1), 0.6, 0.01, false) == Branch::kSufficient);
  CHECK(classify_d2(PowerSplit::from(0.45, 0.1), 0.6, 0.01, true) == Branch::kSingleSet);
  CHECK(classify_d2(PowerSplit::from(0.5, 0.3), 0.51, 0.01, false) == Branch::kStay);
  CHECK(std::isinf(shift_threshold_d2_tie(0.5, 0.3)));
}

TEST_CASE("decision templates") {
  const auto params = limit(10);
  const auto split = PowerSplit::from(0.3, 0.3);
  HeadBlock head{100, {tx(1, 2, 40), tx(2, 2, 30), tx(3, 2, 20), tx(4, 2, 10)}};

  SUBCASE("negligible gamma: half of the head at depth 1, a third at depth 2") {
    MempoolView pool{{tx(9, 1, 1)}};
    const double gamma = gamma_ratio(pool, head.fee, params);
    auto d = undercut_decision_d1(split, gamma, params, pool, head);
    CHECK(d.action == Action::kUndercut);
    CHECK(d.rationale == Branch::kNegligible);
    CHECK(fee_of(d.block_template) == 50);
    d = undercut_decision_d2(split, gamma, params, pool, head);
    CHECK(d.rationale == Branch::kNegligible);
    CHECK(fee_of(d.block_template) >= 30);
    CHECK(fee_of(d.block_template) <= 40);
  }
  SUBCASE("limited mempool: the current bandwidth set") {
    MempoolView pool{{tx(9, 5, 10), tx(10, 5, 5), tx(11, 5, 1)}};
    const double gamma = gamma_ratio(pool, head.fee, params);
    const auto d = undercut_decision_d1(split, gamma, params, pool, head);
    CHECK(d.rationale == Branch::kLimited);
    CHECK(fee_of(d.block_template) == 15);
  }
  SUBCASE("one non-negligible set left at depth 2: half of it") {
    MempoolView pool{{tx(9, 5, 30), tx(10, 5, 30)}};
    const double gamma = gamma_ratio(pool, head.fee, params);
    const auto d = undercut_decision_d2(PowerSplit::from(0.45, 0.1), gamma, params, pool, head);
    CHECK(d.rationale == Branch::kSingleSet);
    CHECK(fee_of(d.block_template) == 30);
  }
  SUBCASE("fee-less head is never undercut") {
    HeadBlock empty{0, {}};
    MempoolView pool{{tx(9, 5, 30)}};
    const auto d = undercut_decision_d1(split, kInfiniteGamma, params, pool, empty);
    CHECK(d.action == Action::kStay);
    CHECK(d.rationale == Branch::kEmptyHead);
  }
  SUBCASE("stay") {
    MempoolView pool{{tx(9, 5, 90), tx(10, 5, 90)}};
    const double gamma = gamma_ratio(pool, head.fee, params);
    const auto d = undercut_decision_d1(split, gamma, params, pool, head);
    CHECK(d.action == Action::kStay);
    CHECK(d.block_template.empty());
  }
}

TEST_CASE("depth-1 decision agrees with the expected-return formulas") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double negligible = 0.01;
  int checked = 0;
  while (checked < 1000) {
    const double bu = 0.01 + 0.48 * unit(rng);
    const double bh = (1.0 - bu) * unit(rng);
    const double gamma = 2.0 * unit(rng);
    const auto split = PowerSplit::from(bu, bh);
    // A negligible next set is worth nothing to the baseline.
    const double g = is_negligible(gamma, negligible) ? 0.0 : gamma;
    const double delta = rational_join_d1(split, g) * split.rational;
    const auto r = expected_returns_d1(split, g, delta);
    if (std::abs(r.attack_return - r.baseline_return) < 1e-12) continue;
    const bool undercut = classify_d1(split, gamma, negligible) != Branch::kStay;
    CHECK(undercut == (r.attack_return > r.baseline_return));
    ++checked;
  }
}

TEST_CASE("rational join at depth 1") {
  CHECK(rational_join_d1(PowerSplit::from(0.176, 0.5), 0.5) == 1);
  CHECK(join_threshold_d1(0.176, 0.5) == doctest::Approx(0.6068).epsilon(1e-3));
  CHECK(rational_join_d1(PowerSplit::from(0.3, 0.4), 0.0) == 1);
  const auto weak_honest = PowerSplit::from(0.3, 0.2);
  CHECK(rational_join_d1(weak_honest, limited_bound_d1(0.3)) == 0);
  CHECK(rational_join_d1(weak_honest, 1.0) == 0);
}

TEST_CASE("rational join depends only on the fee ratio") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<Fee> fee(1, 1'000'000);
  std::uniform_int_distribution<Fee> scale(2, 1000);
  for (int i = 0; i < 500; ++i) {
    const Fee next = fee(rng);
    const Fee head = fee(rng);
    const Fee k = scale(rng);
    const auto split = PowerSplit::from(0.2, 0.1 + 0.0014 * i);
    CHECK(rational_join_d1(split, gamma_ratio(next, head)) ==
          rational_join_d1(split, gamma_ratio(next * k, head * k)));
  }
}

TEST_CASE("rational shift at the depth-2 tie") {
  for (double gamma : {0.0, 0.5, 2.0, 50.0}) {
    CHECK(rational_shift_d2_tie(PowerSplit::from(0.5, 0.2), gamma) == 1);
  }
  CHECK(shift_threshold_d2_tie(0.3, 0.5) == doctest::Approx(0.393).epsilon(1e-3));
  CHECK(rational_shift_d2_tie(PowerSplit::from(0.3, 0.5), 0.9) == 0);
  CHECK(shift_threshold_d2_tie(0.2, 0.5) > 0.0);
  CHECK(rational_shift_d2_tie(PowerSplit::from(0.2, 0.5), 0.0) == 1);

  // Endpoint comparison equals the closed threshold.
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double bu = 0.01 + 0.48 * unit(rng);
    const double bh = (1.0 - bu) * unit(rng) * 0.999;
    const double gamma = 3.0 * unit(rng);
    const double threshold = shift_threshold_d2_tie(bu, bh);
    if (std::abs(gamma - threshold) < 1e-9) continue;
    CHECK(rational_shift_d2_tie(PowerSplit::from(bu, bh), gamma) == (gamma < threshold ? 1 : 0));
  }
}

TEST_CASE("general rational shift") {
  ForkState st;
  st.m = 1;
  st.n = 1;
  st.fork_power = 0.3;

  SUBCASE("nothing to gain keeps the miner in place") {
    CHECK(rational_shift_general(st, 2, 0.2, ShiftDirection::kToFork, ShiftFees{}) == 0.0);
  }
  SUBCASE("own fork blocks pull the miner to the fork") {
    st.fork_power = 0.4;
    ShiftFees fees{1.0, 100.0, 10.0, 10.0};
    CHECK(rational_shift_general(st, 2, 0.2, ShiftDirection::kToFork, fees, 2) == 1.0);
  }
  SUBCASE("grid points and bounds") {
    ShiftFees fees{5.0, 1.0, 3.0, 2.0};
    const double x = rational_shift_general(st, 2, 0.3, ShiftDirection::kToFork, fees, 7);
    CHECK(x >= 0.0);
    CHECK(x <= 1.0);
    CHECK(std::abs(x * 7 - std::round(x * 7)) < 1e-12);
    CHECK_THROWS_AS(rational_shift_general(st, 2, 0.3, ShiftDirection::kToFork, fees, 0), Error);
    st.n = 3;
    CHECK_THROWS_AS(rational_shift_general(st, 2, 0.3, ShiftDirection::kToFork, fees), Error);
  }
  SUBCASE("moving back to the main chain") {
    st.m = 2;
    st.n = 1;
    st.fork_power = 0.6;
    ShiftFees fees{0.0, 0.0, 10.0, 1.0};
    CHECK(rational_shift_general(st, 2, 0.3, ShiftDirection::kToMain, fees) == 1.0);
  }
}

TEST_CASE("general shift reduces to the depth-1 join rule") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int checked = 0;
  while (checked < 1000) {
    const double bu = 0.01 + 0.48 * unit(rng);
    const double bh = (1.0 - bu) * unit(rng);
    const auto split = PowerSplit::from(bu, bh);
    if (split.rational < 1e-6) continue;
    const double gamma = 2.0 * unit(rng);
    if (std::abs(gamma - join_threshold_d1(bu, bh)) < 1e-9) continue;

    ForkState st;
    st.m = 1;
    st.n = 1;
    st.fork_power = bu;
    // Rational miners own the main head with probability br / (1 - bu); the
    // main chain's next block carries gamma and the fork's re-claims the head.
    ShiftFees fees;
    fees.owned_main = split.rational / (1.0 - bu);
    fees.claimable_main = gamma;
    fees.claimable_fork = 1.0;
    const double x = rational_shift_general(st, split, 1, ShiftDirection::kToFork, fees, 100);
    CHECK((x >= 0.5 ? 1 : 0) == rational_join_d1(split, gamma));
    CHECK((x == 0.0 || x == 1.0));
    ++checked;
  }
}

TEST_CASE("avoidance mode parsing") {
  CHECK(parse_avoidance("off").mode == AvoidanceMode::kOff);
  CHECK(parse_avoidance("exact").mode == AvoidanceMode::kExact);
  CHECK(parse_avoidance("experimental").mode == AvoidanceMode::kExperimental);
  const auto strict = parse_avoidance("strict=0.8");
  CHECK(strict.mode == AvoidanceMode::kStrict);
  CHECK(strict.strict_factor == doctest::Approx(0.8));
  CHECK(to_string(strict) == "strict=0.8");
  CHECK(to_string(parse_avoidance("exact")) == "exact");
  CHECK_THROWS_AS(parse_avoidance("strict=2"), Error);
  CHECK_THROWS_AS(parse_avoidance("sometimes"), Error);
}

TEST_CASE("experimental avoidance claims three of four") {
  // Bandwidth set fee 4, next set fee 2, head fee 4 so gamma = 1.
  MempoolView pool{{tx(1, 1, 2), tx(2, 1, 2), tx(3, 1, 1), tx(4, 1, 1)}};
  const auto r = craft_avoidance_block(pool, limit(2), 1, 4, 0.5, 0.3, AvoidanceMode::kExperimental);
  CHECK(r.step == AvoidanceStep::kPartial);
  CHECK(r.claimed_fee == 3);
}

TEST_CASE("strict avoidance scales the experimental claim") {
  // f0 = 100, f1 = 60, target ratio 1: experimental claims 80, strict 64.
  const auto pool = unit_pool(160);
  const auto params = limit(100);
  const auto exp = craft_avoidance_block(pool, params, 1, 100, 0.5, 0.3, AvoidanceMode::kExperimental);
  const auto strict = craft_avoidance_block(pool, params, 1, 100, 0.5, 0.3, AvoidanceMode::kStrict, 0.8);
  CHECK(exp.claimed_fee == 80);
  CHECK(strict.claimed_fee == 64);
}

TEST_CASE("avoidance at depth 2 with one set left claims half of it") {
  MempoolView pool{{tx(1, 2, 10), tx(2, 2, 10), tx(3, 2, 6), tx(4, 2, 4)}};
  const auto r = craft_avoidance_block(pool, limit(10), 2, 40, 0.5, 0.3, AvoidanceMode::kExperimental);
  CHECK(r.step == AvoidanceStep::kSplitHalf);
  CHECK(r.claimed_fee >= 14);
  CHECK(r.claimed_fee <= 16);
}

TEST_CASE("avoidance waits when the pool is negligible") {
  MempoolView pool{{tx(1, 1, 1)}};
  const auto r = craft_avoidance_block(pool, limit(10), 1, 1000, 0.5, 0.3, AvoidanceMode::kExact);
  CHECK(r.step == AvoidanceStep::kWait);
  CHECK(r.block.empty());
}

TEST_CASE("avoidance never claims more than the bandwidth set") {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> count(0, 30);
  std::uniform_int_distribution<Fee> head(0, 3000);
  for (int trial = 0; trial < 300; ++trial) {
    const MempoolView pool{test::random_pool(rng, count(rng), 20, 500)};
    const auto params = limit(60);
    const Fee best = bandwidth_set(pool, params).total_fee;
    for (int depth = 1; depth <= 2; ++depth) {
      for (auto mode : {AvoidanceMode::kExperimental, AvoidanceMode::kExact, AvoidanceMode::kStrict}) {
        const auto r = craft_avoidance_block(pool, params, depth, head(rng), 0.5, 0.3, mode);
        CHECK(r.claimed_fee <= best);
        CHECK(r.claimed_fee == fee_of(r.block));
        Size size = 0;
        for (const auto& t : r.block) size += t.size;
        CHECK(size <= params.block_size_limit);
      }
    }
  }
}

TEST_CASE("exact avoidance leaves the adversary no profitable undercut") {
  std::mt19937_64 rng(123);
  std::uniform_int_distribution<int> count(1, 40);
  std::uniform_int_distribution<Fee> head(0, 5000);
  std::uniform_real_distribution<double> honest(0.0, 0.5);
  for (int trial = 0; trial < 200; ++trial) {
    const MempoolView pool{test::random_pool(rng, count(rng), 20, 1000)};
    const auto params = limit(80);
    const double bh = honest(rng);
    const auto split = PowerSplit::from(0.5, bh);
    for (int depth = 1; depth <= 2; ++depth) {
      const auto r = craft_avoidance_block(pool, params, depth, head(rng), 0.5, bh, AvoidanceMode::kExact);
      const auto after = without(pool, ids_of(r.block));
      const HeadBlock block{fee_of(r.block), r.block};
      const double gamma = gamma_ratio(after, block.fee, params);
      CHECK(undercut_decision_d1(split, gamma, params, after, block).action == Action::kStay);
      if (depth == 2) {
        CHECK(undercut_decision_d2(split, gamma, params, after, block).action == Action::kStay);
      }
    }
  }
}
