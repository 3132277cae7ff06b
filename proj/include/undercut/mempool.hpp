#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace undercut {

using TxId = std::uint64_t;
using Fee = std::int64_t;
using Size = std::int64_t;

/// One fee-bearing unit. Fee rate is fee/size; sizes use a single unit
/// convention per trace (bytes or weight units).
struct Transaction {
  TxId id = 0;
  double arrival_time = 0.0;
  Size size = 1;
  Fee fee = 0;

  friend bool operator==(const Transaction&, const Transaction&) = default;
};

struct ChainParams {
  Size block_size_limit = 1'000'000;
  double block_interval = 600.0;
  double negligible_fee_threshold = 0.01;

  /// Throws Error(kInvalidArgument) on a violated invariant.
  void validate() const;
};

/// Unconfirmed transactions as seen from one chain. Confirmed transactions
/// are not tracked here; a chain's confirmed set is the union of its blocks.
struct MempoolView {
  std::vector<Transaction> pending;

  Fee total_fee() const noexcept;
  Size total_size() const noexcept;
};

enum class SelectionMode { kGreedy, kExact };

struct BandwidthSetResult {
  std::vector<TxId> tx_ids;
  Fee total_fee = 0;
  Size total_size = 0;
  bool exact = false;
};

/// Largest pool accepted by exact selection.
inline constexpr std::size_t kMaxExactPool = 25;

/// Greedy ordering: fee rate descending, then fee descending, then id
/// ascending. A strict total order over distinct ids.
bool greedy_before(const Transaction& a, const Transaction& b) noexcept;

/// Sorts a copy of txs into greedy order (no-op copy when already sorted).
std::vector<Transaction> greedy_order(std::span<const Transaction> txs);

/// Maximum-fee subset of the pool fitting the block size limit.
///
/// Greedy mode packs first-fit in greedy order. Exact mode enumerates every
/// subset (meet-in-the-middle split with a SIMD scan over the lower half) and
/// throws Error(kInstanceTooLarge) for pools above kMaxExactPool.
BandwidthSetResult bandwidth_set(const MempoolView& pool, const ChainParams& params,
                                 SelectionMode mode = SelectionMode::kGreedy);

/// Same as bandwidth_set(kGreedy) but with an explicit size budget.
BandwidthSetResult greedy_fill(std::span<const Transaction> txs, Size size_limit);

/// True iff (candidate ∩ S).fee >= proportion * S.fee for some exact
/// bandwidth set S of the pool. proportion must lie in (0, 1].
bool is_near_bandwidth_set(std::span<const TxId> candidate, const MempoolView& pool,
                           const ChainParams& params, double proportion);

inline constexpr double kInfiniteGamma = std::numeric_limits<double>::infinity();

/// Next bandwidth-set fee over the head block fee. Returns kInfiniteGamma when
/// the head is fee-less but the pool is not, and 0 for a fee-less pool.
double gamma_ratio(const MempoolView& pool, Fee head_block_fee, const ChainParams& params);
double gamma_ratio(Fee next_set_fee, Fee head_block_fee) noexcept;

/// Partitions txs into k in {1,2,3} disjoint subsets of near-equal fee using
/// longest-processing-time assignment. Falls back to alternate assignment
/// orders when a part would overflow the size limit; throws
/// Error(kUnsplittable) when none fits.
std::vector<std::vector<Transaction>> split_equal_fee(std::span<const Transaction> txs, int k,
                                                      const ChainParams& params);

/// First-fit in greedy order, skipping any transaction that would push the
/// fee above target_fee or the size above the block limit.
BandwidthSetResult claim_partial(const MempoolView& pool, Fee target_fee,
                                 const ChainParams& params);

/// Fee and size totals of a transaction list as a BandwidthSetResult.
BandwidthSetResult summarize(std::span<const Transaction> txs);

/// Transactions of pool whose ids are listed in ids (pool order preserved).
std::vector<Transaction> select_by_id(std::span<const Transaction> pool, std::span<const TxId> ids);

/// pool minus the transactions whose ids are listed in ids.
MempoolView without(const MempoolView& pool, std::span<const TxId> ids);

}  // namespace undercut
