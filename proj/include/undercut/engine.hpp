#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "undercut/mempool.hpp"
#include "undercut/random.hpp"
#include "undercut/strategy.hpp"
#include "undercut/trace.hpp"

namespace undercut {

struct Block {
  int owner = -1;  // index into the run's miner list
  std::vector<Transaction> txs;
  Fee fee_total = 0;
  Size size_total = 0;
  double creation_time = 0.0;
  std::size_t height = 0;  // 1 for the first block

  std::vector<TxId> tx_ids() const;
};

using BlockPtr = std::shared_ptr<const Block>;

struct MinerProfile {
  int id = 0;  // miner id from the power distribution; a split miner keeps it twice
  double power = 0.0;
  MinerKind kind = MinerKind::kRational;
  Fee earned = 0;
};

/// Honest miners take `honest_fraction` of the total power from the
/// non-undercutter miners in ascending id order. The miner straddling the
/// boundary is split into an honest and a rational profile so the honest
/// power is exact.
std::vector<MinerProfile> build_population(const PowerDistribution& powers,
                                           double honest_fraction);

/// Every miner, the undercutter included, honest.
std::vector<MinerProfile> all_honest_population(const PowerDistribution& powers);

struct Chain {
  int id = 0;  // creation order; lower is older
  std::vector<BlockPtr> blocks;  // from genesis, shared with the parent chain
  std::size_t fork_point = 0;    // blocks shared with the chain it forked from
  double next_block_time = std::numeric_limits<double>::infinity();
  std::vector<int> workers;      // miner indices
  double power = 0.0;
  MempoolView pool;              // kept in greedy order
  std::optional<std::vector<Transaction>> pending_template;

  std::size_t height() const noexcept { return blocks.size(); }
  Fee head_fee() const noexcept { return blocks.empty() ? 0 : blocks.back()->fee_total; }
};

struct RunConfig {
  ChainParams params;
  int safe_depth = 1;
  AvoidanceConfig avoidance;
  std::uint64_t seed = 1;
  int grid = 100;
  /// Block cap before the run is declared stalled; 0 derives one from the
  /// trace span.
  std::size_t max_blocks = 0;
};

/// Index into Branch for the per-branch decision counts.
inline constexpr std::size_t kBranchCount = 6;

struct RunResult {
  std::vector<MinerProfile> miners;  // with earnings settled
  std::vector<BlockPtr> main_chain;
  Fee main_chain_fee = 0;
  Fee trace_fee = 0;
  std::size_t attacks = 0;
  std::array<std::size_t, kBranchCount> branch_counts{};
  std::size_t forks_won = 0;
  std::size_t forks_lost = 0;
  double end_time = 0.0;

  /// Earnings of miner `index` over all main-chain fees (0 when none).
  double share(std::size_t index) const;
  /// Summed share of every profile of kind undercutter.
  double undercutter_share() const;
};

/// Index of the chain with the earliest next block; ties go to the older
/// chain. Throws Error(kStalled) when no chain has mining power.
std::size_t next_chain_to_extend(std::span<const Chain> chains);

/// Worker of `chain` drawn with probability proportional to its power.
int select_next_block_miner(const Chain& chain, std::span<const MinerProfile> miners, Rng& rng);

/// now + Exponential(power / interval). Throws Error(kNoSample) for zero power.
double sample_next_block_time(double power, double now, const ChainParams& params, Rng& rng);
double sample_next_block_time(const Chain& chain, double now, const ChainParams& params, Rng& rng);

/// Adds the trace records with arrival time in (t_prev, t_now] to the pool,
/// keeping greedy order. `trace` must be sorted by arrival time.
void update_mempool(Chain& chain, double t_prev, double t_now,
                    std::span<const TraceRecord> trace);

/// Runs one seeded simulation over the trace until it is consumed, a single
/// chain remains, and the pool's bandwidth-set fee is negligible next to the
/// head block.
RunResult run(std::span<const TraceRecord> trace, std::vector<MinerProfile> miners,
              const RunConfig& config);

}  // namespace undercut
