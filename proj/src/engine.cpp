#include "undercut/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <unordered_set>

#include "undercut/error.hpp"
#include "undercut/probability.hpp"

namespace undercut {

std::vector<TxId> Block::tx_ids() const {
  std::vector<TxId> ids;
  ids.reserve(txs.size());
  for (const auto& tx : txs) ids.push_back(tx.id);
  return ids;
}

std::vector<MinerProfile> build_population(const PowerDistribution& powers,
                                           double honest_fraction) {
  powers.validate();
  const double bu = powers.undercutter().power;
  if (!(honest_fraction >= 0.0 && honest_fraction <= 1.0 - bu + 1e-12)) {
    throw Error(ErrorCode::kInvalidArgument,
                "honest fraction must lie in [0, 1 - undercutter power]");
  }
  auto entries = powers.entries;
  std::sort(entries.begin(), entries.end(),
            [](const PowerEntry& a, const PowerEntry& b) { return a.id < b.id; });

  std::vector<MinerProfile> out;
  double left = honest_fraction;
  for (const auto& e : entries) {
    if (e.kind == MinerKind::kUndercutter) {
      out.push_back({e.id, e.power, MinerKind::kUndercutter, 0});
      continue;
    }
    const double honest = std::min(left, e.power);
    left -= honest;
    if (honest > 1e-15) out.push_back({e.id, honest, MinerKind::kHonest, 0});
    if (e.power - honest > 1e-15) out.push_back({e.id, e.power - honest, MinerKind::kRational, 0});
  }
  return out;
}

std::vector<MinerProfile> all_honest_population(const PowerDistribution& powers) {
  powers.validate();
  std::vector<MinerProfile> out;
  for (const auto& e : powers.entries) out.push_back({e.id, e.power, MinerKind::kHonest, 0});
  std::sort(out.begin(), out.end(),
            [](const MinerProfile& a, const MinerProfile& b) { return a.id < b.id; });
  return out;
}

double RunResult::share(std::size_t index) const {
  if (main_chain_fee <= 0) return 0.0;
  return static_cast<double>(miners.at(index).earned) / static_cast<double>(main_chain_fee);
}

double RunResult::undercutter_share() const {
  double s = 0.0;
  for (std::size_t i = 0; i < miners.size(); ++i) {
    if (miners[i].kind == MinerKind::kUndercutter) s += share(i);
  }
  return s;
}

std::size_t next_chain_to_extend(std::span<const Chain> chains) {
  std::size_t best = chains.size();
  for (std::size_t i = 0; i < chains.size(); ++i) {
    if (!std::isfinite(chains[i].next_block_time)) continue;
    if (best == chains.size() || chains[i].next_block_time < chains[best].next_block_time ||
        (chains[i].next_block_time == chains[best].next_block_time &&
         chains[i].id < chains[best].id)) {
      best = i;
    }
  }
  if (best == chains.size()) throw Error(ErrorCode::kStalled, "no chain has mining power");
  return best;
}

int select_next_block_miner(const Chain& chain, std::span<const MinerProfile> miners, Rng& rng) {
  if (chain.workers.empty()) throw Error(ErrorCode::kNoSample, "chain has no workers");
  double total = 0.0;
  for (int w : chain.workers) total += miners[static_cast<std::size_t>(w)].power;
  if (!(total > 0.0)) throw Error(ErrorCode::kNoSample, "chain workers have no power");
  const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  double acc = 0.0;
  int last = chain.workers.front();
  for (int w : chain.workers) {
    const double p = miners[static_cast<std::size_t>(w)].power;
    if (p <= 0.0) continue;
    acc += p;
    last = w;
    if (u < acc) return w;
  }
  return last;
}

double sample_next_block_time(double power, double now, const ChainParams& params, Rng& rng) {
  if (!(power > 0.0)) throw Error(ErrorCode::kNoSample, "cannot sample a powerless chain");
  return now + std::exponential_distribution<double>(power / params.block_interval)(rng);
}

double sample_next_block_time(const Chain& chain, double now, const ChainParams& params,
                              Rng& rng) {
  return sample_next_block_time(chain.power, now, params, rng);
}

namespace {

void merge_into(MempoolView& pool, std::span<const Transaction> txs) {
  if (txs.empty()) return;
  const auto mid = static_cast<std::ptrdiff_t>(pool.pending.size());
  pool.pending.insert(pool.pending.end(), txs.begin(), txs.end());
  std::sort(pool.pending.begin() + mid, pool.pending.end(), greedy_before);
  std::inplace_merge(pool.pending.begin(), pool.pending.begin() + mid, pool.pending.end(),
                     greedy_before);
}

std::pair<std::size_t, std::size_t> arrival_window(std::span<const TraceRecord> trace,
                                                   double t_prev, double t_now) {
  auto by_time = [](double t, const TraceRecord& r) { return t < r.arrival_time; };
  const auto lo = std::upper_bound(trace.begin(), trace.end(), t_prev, by_time);
  const auto hi = std::upper_bound(lo, trace.end(), t_now, by_time);
  return {static_cast<std::size_t>(lo - trace.begin()),
          static_cast<std::size_t>(hi - trace.begin())};
}

}  // namespace

void update_mempool(Chain& chain, double t_prev, double t_now,
                    std::span<const TraceRecord> trace) {
  if (t_prev > t_now) throw Error(ErrorCode::kInvalidArgument, "t_prev must not exceed t_now");
  const auto [lo, hi] = arrival_window(trace, t_prev, t_now);
  merge_into(chain.pool, trace.subspan(lo, hi - lo));
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

class Simulation {
 public:
  Simulation(std::span<const TraceRecord> trace, std::vector<MinerProfile> miners,
             const RunConfig& config)
      : trace_(trace), miners_(std::move(miners)), config_(config), rng_(config.seed) {
    config_.params.validate();
    if (config_.safe_depth != 1 && config_.safe_depth != 2) {
      throw Error(ErrorCode::kInvalidArgument, "safe depth must be 1 or 2");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < miners_.size(); ++i) {
      const auto& m = miners_[i];
      if (!(m.power >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "negative miner power");
      total += m.power;
      if (m.kind == MinerKind::kUndercutter) {
        if (undercutter_ >= 0) {
          throw Error(ErrorCode::kInvalidArgument, "at most one undercutter per run");
        }
        undercutter_ = static_cast<int>(i);
      } else if (m.kind == MinerKind::kHonest) {
        honest_power_ += m.power;
      }
    }
    if (miners_.empty() || std::abs(total - 1.0) > 1e-9) {
      throw Error(ErrorCode::kInvalidArgument, "miner powers must sum to 1");
    }
    for (std::size_t i = 1; i < trace_.size(); ++i) {
      if (trace_[i].arrival_time < trace_[i - 1].arrival_time) {
        throw Error(ErrorCode::kInvalidArgument, "trace must be sorted by arrival time");
      }
    }
    rational_order_.resize(miners_.size());
    std::iota(rational_order_.begin(), rational_order_.end(), 0);
    std::stable_sort(rational_order_.begin(), rational_order_.end(), [&](int a, int b) {
      return miners_[static_cast<std::size_t>(a)].power > miners_[static_cast<std::size_t>(b)].power;
    });
    max_blocks_ = config_.max_blocks;
    if (max_blocks_ == 0) {
      const double span = trace_.empty() ? 0.0 : trace_.back().arrival_time - trace_.front().arrival_time;
      max_blocks_ = static_cast<std::size_t>(20.0 * span / config_.params.block_interval) + 10'000;
    }
  }

  RunResult run() {
    for (const auto& r : trace_) result_.trace_fee += r.fee;

    Chain main;
    main.id = next_chain_id_++;
    chains_.push_back(std::move(main));
    chain_of_.assign(miners_.size(), chains_.front().id);
    for (std::size_t i = 0; i < miners_.size(); ++i) {
      chains_.front().workers.push_back(static_cast<int>(i));
    }
    recompute_power(chains_.front());

    now_ = trace_.empty() ? 0.0 : trace_.front().arrival_time;
    add_arrivals(now_);
    chains_.front().next_block_time = sample_or_inf(chains_.front());

    std::size_t mined = 0;
    while (!finished()) {
      if (++mined > max_blocks_) {
        throw Error(ErrorCode::kStalled,
                    "run exceeded " + std::to_string(max_blocks_) + " blocks without settling");
      }
      step();
    }
    settle();
    return std::move(result_);
  }

 private:
  const MinerProfile& miner(int index) const { return miners_[static_cast<std::size_t>(index)]; }

  Chain& chain_by_id(int id) {
    for (auto& c : chains_) {
      if (c.id == id) return c;
    }
    throw Error(ErrorCode::kInvalidArgument, "unknown chain id");
  }

  void recompute_power(Chain& c) const {
    c.power = 0.0;
    for (int w : c.workers) c.power += miner(w).power;
  }

  double sample_or_inf(const Chain& c) {
    return c.power > 0.0 ? sample_next_block_time(c, now_, config_.params, rng_) : kInf;
  }

  void add_arrivals(double t_now) {
    std::size_t hi = next_record_;
    while (hi < trace_.size() && trace_[hi].arrival_time <= t_now) ++hi;
    if (hi == next_record_) return;
    const auto batch = trace_.subspan(next_record_, hi - next_record_);
    for (auto& c : chains_) merge_into(c.pool, batch);
    next_record_ = hi;
  }

  bool finished() const {
    if (next_record_ < trace_.size() || chains_.size() != 1) return false;
    const auto& c = chains_.front();
    const Fee next = bandwidth_set(c.pool, config_.params).total_fee;
    if (next == 0) return true;
    // Two empty blocks with no arrivals left: every later block repeats them.
    const auto n = c.blocks.size();
    if (n >= 2 && c.blocks[n - 1]->txs.empty() && c.blocks[n - 2]->txs.empty()) return true;
    // Partial claims shrink the head along with the pool, so the drain is
    // also measured against the richest block on the chain.
    Fee richest = 0;
    for (const auto& b : c.blocks) richest = std::max(richest, b->fee_total);
    const double bound = config_.params.negligible_fee_threshold;
    return static_cast<double>(next) <= bound * static_cast<double>(c.head_fee()) ||
           static_cast<double>(next) <= bound * static_cast<double>(richest);
  }

  void step() {
    const std::size_t ext_index = next_chain_to_extend(chains_);
    const double t = chains_[ext_index].next_block_time;
    add_arrivals(t);
    now_ = t;
    const int ext_id = chains_[ext_index].id;
    const int who = select_next_block_miner(chains_[ext_index], miners_, rng_);
    publish_block(who, chains_[ext_index]);

    changed_.clear();
    changed_.insert(ext_id);
    update_chains(ext_id);
    update_miners(ext_id);
    for (auto& c : chains_) {
      if (changed_.count(c.id) != 0) {
        recompute_power(c);
        c.next_block_time = sample_or_inf(c);
      }
    }
  }

  void publish_block(int who, Chain& c) {
    const auto& m = miner(who);
    std::vector<Transaction> txs;
    const auto& avoid = config_.avoidance;
    if (m.kind == MinerKind::kUndercutter && c.pending_template && c.height() == c.fork_point) {
      std::unordered_set<TxId> present;
      for (const auto& tx : c.pool.pending) present.insert(tx.id);
      for (const auto& tx : *c.pending_template) {
        if (present.count(tx.id) != 0) txs.push_back(tx);
      }
      c.pending_template.reset();
    } else if (avoid.mode != AvoidanceMode::kOff) {
      const double bu = avoid.assumed_undercutter_power;
      const double bh = std::min(avoid.assumed_honest_power.value_or(honest_power_), 1.0 - bu);
      txs = craft_avoidance_block(c.pool, config_.params, config_.safe_depth, c.head_fee(), bu,
                                  bh, avoid.mode, avoid.strict_factor)
                .block;
    } else {
      const auto set = bandwidth_set(c.pool, config_.params);
      txs = select_by_id(c.pool.pending, set.tx_ids);
    }

    auto block = std::make_shared<Block>();
    block->owner = who;
    block->creation_time = now_;
    block->height = c.height() + 1;
    std::unordered_set<TxId> used;
    for (const auto& tx : txs) {
      block->fee_total += tx.fee;
      block->size_total += tx.size;
      used.insert(tx.id);
    }
    block->txs = std::move(txs);
    std::erase_if(c.pool.pending, [&](const Transaction& tx) { return used.count(tx.id) != 0; });
    c.blocks.push_back(std::move(block));
  }

  void move_miner(int who, Chain& from, Chain& to) {
    std::erase(from.workers, who);
    to.workers.push_back(who);
    chain_of_[static_cast<std::size_t>(who)] = to.id;
    changed_.insert(from.id);
    changed_.insert(to.id);
    recompute_power(from);
    recompute_power(to);
  }

  void update_chains(int ext_id) {
    const auto depth = static_cast<std::size_t>(config_.safe_depth);
    const std::size_t ext_height = chain_by_id(ext_id).height();
    for (std::size_t i = 0; i < chains_.size();) {
      Chain& other = chains_[i];
      if (other.id == ext_id || ext_height < other.height() + depth) {
        ++i;
        continue;
      }
      Chain& ext = chain_by_id(ext_id);
      if (ext.id > other.id) {
        ++result_.forks_won;
      } else {
        ++result_.forks_lost;
      }
      for (int w : other.workers) {
        ext.workers.push_back(w);
        chain_of_[static_cast<std::size_t>(w)] = ext.id;
      }
      changed_.insert(ext.id);
      chains_.erase(chains_.begin() + static_cast<std::ptrdiff_t>(i));
    }
    if (chains_.size() == 1) {
      auto& only = chains_.front();
      only.fork_point = only.height();
      only.pending_template.reset();
      recompute_power(only);
    }
  }

  PowerSplit actual_split() const {
    const double bu = undercutter_ >= 0 ? miner(undercutter_).power : 0.0;
    PowerSplit s;
    s.undercutter = bu;
    s.honest = honest_power_;
    s.rational = std::max(0.0, 1.0 - bu - honest_power_);
    return s;
  }

  void undercutter_decides(const Block& head) {
    Chain& main = chains_.front();
    const auto split = actual_split();
    const double gamma = gamma_ratio(main.pool, head.fee_total, config_.params);
    const HeadBlock hb{head.fee_total, head.txs};
    const Decision d = config_.safe_depth == 1
                           ? undercut_decision_d1(split, gamma, config_.params, main.pool, hb)
                           : undercut_decision_d2(split, gamma, config_.params, main.pool, hb);
    ++result_.branch_counts[static_cast<std::size_t>(d.rationale)];
    if (d.action != Action::kUndercut) return;
    ++result_.attacks;

    Chain fork;
    fork.id = next_chain_id_++;
    fork.blocks.assign(main.blocks.begin(), main.blocks.end() - 1);
    fork.fork_point = fork.blocks.size();
    fork.pool = main.pool;
    merge_into(fork.pool, head.txs);
    fork.pending_template = d.block_template;
    chains_.push_back(std::move(fork));
    move_miner(undercutter_, chains_.front(), chains_.back());
  }

  Fee owned_since(const Chain& c, std::size_t fork_point, int who) const {
    Fee sum = 0;
    for (std::size_t i = fork_point; i < c.blocks.size(); ++i) {
      if (c.blocks[i]->owner == who) sum += c.blocks[i]->fee_total;
    }
    return sum;
  }

  bool rational_moves(int who, const Chain& main, const Chain& fork, bool to_fork) const {
    const int depth = config_.safe_depth;
    const auto& params = config_.params;
    const std::size_t fp = fork.fork_point;
    const int m = static_cast<int>(main.height() - fp);
    const int n = static_cast<int>(fork.height() - fp);
    const int lead = n - m;
    if (std::abs(lead) >= depth) return false;

    if (m == 1 && n == 1 && to_fork) {
      const Fee main_next = bandwidth_set(main.pool, params).total_fee;
      const Fee fork_next = bandwidth_set(fork.pool, params).total_fee;
      const double gamma = gamma_ratio(main_next, fork_next);
      const auto split = actual_split();
      return depth == 1 ? rational_join_d1(split, gamma) == 1
                        : rational_shift_d2_tie(split, gamma) == 1;
    }

    ForkState st;
    st.m = m;
    st.n = n;
    for (std::size_t i = fp; i < main.height(); ++i) st.fees_main.push_back(main.blocks[i]->fee_total);
    for (std::size_t i = fp; i < fork.height(); ++i) st.fees_fork.push_back(fork.blocks[i]->fee_total);
    st.fork_power = std::min(1.0, fork.power);
    const auto rates = chain_rates(st.fork_power, params);
    st.rate_main = rates.main_rate;
    st.rate_fork = rates.fork_rate;

    ShiftFees fees;
    fees.owned_main = static_cast<double>(owned_since(main, fp, who));
    fees.owned_fork = static_cast<double>(owned_since(fork, fp, who));
    fees.claimable_main = static_cast<double>(
        greedy_fill(main.pool.pending, (depth + lead) * params.block_size_limit).total_fee);
    fees.claimable_fork = static_cast<double>(
        greedy_fill(fork.pool.pending, (depth - lead) * params.block_size_limit).total_fee);
    const double x = rational_shift_general(
        st, depth, miner(who).power, to_fork ? ShiftDirection::kToFork : ShiftDirection::kToMain,
        fees, config_.grid);
    return x >= 0.5;
  }

  void update_miners(int ext_id) {
    const Block& head = *chain_by_id(ext_id).blocks.back();

    if (undercutter_ >= 0 && chains_.size() == 1 && head.owner != undercutter_) {
      undercutter_decides(head);
    }

    Chain* ext = &chain_by_id(ext_id);
    for (std::size_t i = 0; i < miners_.size(); ++i) {
      const int who = static_cast<int>(i);
      if (miners_[i].kind != MinerKind::kHonest || chain_of_[i] == ext_id) continue;
      Chain& from = chain_by_id(chain_of_[i]);
      if (ext->height() > from.height()) move_miner(who, from, *ext);
    }

    if (chains_.size() != 2) return;
    for (int who : rational_order_) {
      const auto idx = static_cast<std::size_t>(who);
      if (miners_[idx].kind != MinerKind::kRational || chain_of_[idx] == ext_id) continue;
      if (miners_[idx].power <= 0.0) continue;
      Chain& main = chains_[0];
      Chain& fork = chains_[1];
      const bool to_fork = ext_id == fork.id;
      if (rational_moves(who, main, fork, to_fork)) {
        move_miner(who, to_fork ? main : fork, to_fork ? fork : main);
      }
    }
  }

  void settle() {
    const auto& c = chains_.front();
    result_.main_chain = c.blocks;
    for (const auto& b : c.blocks) {
      miners_[static_cast<std::size_t>(b->owner)].earned += b->fee_total;
      result_.main_chain_fee += b->fee_total;
    }
    result_.miners = std::move(miners_);
    result_.end_time = now_;
  }

  std::span<const TraceRecord> trace_;
  std::vector<MinerProfile> miners_;
  RunConfig config_;
  Rng rng_;
  std::vector<Chain> chains_;
  std::vector<int> chain_of_;
  std::vector<int> rational_order_;
  std::unordered_set<int> changed_;
  int undercutter_ = -1;
  double honest_power_ = 0.0;
  int next_chain_id_ = 0;
  std::size_t next_record_ = 0;
  std::size_t max_blocks_ = 0;
  double now_ = 0.0;
  RunResult result_;
};

}  // namespace

RunResult run(std::span<const TraceRecord> trace, std::vector<MinerProfile> miners,
              const RunConfig& config) {
  return Simulation(trace, std::move(miners), config).run();
}

}  // namespace undercut
