#include "undercut/mempool.hpp"

#include <algorithm>
#include <bit>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_set>

#include "undercut/error.hpp"
#include "undercut/kernels.hpp"

namespace undercut {

void ChainParams::validate() const {
  if (block_size_limit <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "block_size_limit must be positive");
  }
  if (!(block_interval > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "block_interval must be positive");
  }
  if (!(negligible_fee_threshold >= 0.0 && negligible_fee_threshold < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "negligible_fee_threshold must lie in [0, 1)");
  }
}

Fee MempoolView::total_fee() const noexcept {
  Fee sum = 0;
  for (const auto& tx : pending) sum += tx.fee;
  return sum;
}

Size MempoolView::total_size() const noexcept {
  Size sum = 0;
  for (const auto& tx : pending) sum += tx.size;
  return sum;
}

namespace {
__extension__ using Wide = __int128;
}  // namespace

bool greedy_before(const Transaction& a, const Transaction& b) noexcept {
  const Wide lhs = static_cast<Wide>(a.fee) * b.size;
  const Wide rhs = static_cast<Wide>(b.fee) * a.size;
  if (lhs != rhs) return lhs > rhs;
  if (a.fee != b.fee) return a.fee > b.fee;
  return a.id < b.id;
}

std::vector<Transaction> greedy_order(std::span<const Transaction> txs) {
  std::vector<Transaction> out(txs.begin(), txs.end());
  if (!std::is_sorted(out.begin(), out.end(), greedy_before)) {
    std::sort(out.begin(), out.end(), greedy_before);
  }
  return out;
}

BandwidthSetResult summarize(std::span<const Transaction> txs) {
  BandwidthSetResult r;
  r.tx_ids.reserve(txs.size());
  for (const auto& tx : txs) {
    r.tx_ids.push_back(tx.id);
    r.total_fee += tx.fee;
    r.total_size += tx.size;
  }
  return r;
}

BandwidthSetResult greedy_fill(std::span<const Transaction> txs, Size size_limit) {
  BandwidthSetResult r;
  if (size_limit <= 0) return r;
  const auto ordered = greedy_order(txs);
  for (const auto& tx : ordered) {
    if (r.total_size + tx.size > size_limit) continue;
    r.tx_ids.push_back(tx.id);
    r.total_fee += tx.fee;
    r.total_size += tx.size;
    if (r.total_size == size_limit) break;
  }
  return r;
}

namespace {

// Subset sums over a small transaction list, indexed by bitmask.
struct SubsetTable {
  std::vector<std::int64_t> sizes;
  std::vector<std::int64_t> fees;
};

SubsetTable subset_table(std::span<const Transaction> txs) {
  const std::size_t count = std::size_t{1} << txs.size();
  SubsetTable t;
  t.sizes.assign(count, 0);
  t.fees.assign(count, 0);
  for (std::size_t mask = 1; mask < count; ++mask) {
    const auto low = static_cast<std::size_t>(std::countr_zero(mask));
    const std::size_t rest = mask & (mask - 1);
    t.sizes[mask] = t.sizes[rest] + txs[low].size;
    t.fees[mask] = t.fees[rest] + txs[low].fee;
  }
  return t;
}

void require_exact_size(std::size_t n) {
  if (n > kMaxExactPool) {
    throw Error(ErrorCode::kInstanceTooLarge,
                "exact selection supports at most " + std::to_string(kMaxExactPool) +
                    " transactions, got " + std::to_string(n));
  }
}

BandwidthSetResult exact_bandwidth_set(std::span<const Transaction> txs, Size limit) {
  const std::size_t n = txs.size();
  const std::size_t lo_n = (n + 1) / 2;
  const auto lo = subset_table(txs.first(lo_n));
  const auto hi = subset_table(txs.subspan(lo_n));

  Fee best_fee = -1;
  std::size_t best_hi = 0;
  std::size_t best_lo = 0;
  for (std::size_t h = 0; h < hi.sizes.size(); ++h) {
    const Size budget = limit - hi.sizes[h];
    if (budget < 0) continue;
    const auto scan = kernels::best_fitting(lo.sizes, lo.fees, budget);
    if (scan.index < 0) continue;
    const Fee total = hi.fees[h] + scan.fee;
    if (total > best_fee) {
      best_fee = total;
      best_hi = h;
      best_lo = static_cast<std::size_t>(scan.index);
    }
  }

  BandwidthSetResult r;
  r.exact = true;
  for (std::size_t i = 0; i < n; ++i) {
    const bool in = i < lo_n ? ((best_lo >> i) & 1U) != 0 : ((best_hi >> (i - lo_n)) & 1U) != 0;
    if (!in) continue;
    r.tx_ids.push_back(txs[i].id);
    r.total_fee += txs[i].fee;
    r.total_size += txs[i].size;
  }
  return r;
}

}  // namespace

BandwidthSetResult bandwidth_set(const MempoolView& pool, const ChainParams& params,
                                 SelectionMode mode) {
  if (mode == SelectionMode::kExact) {
    require_exact_size(pool.pending.size());
    if (pool.total_size() <= params.block_size_limit) {
      auto r = summarize(pool.pending);
      r.exact = true;
      return r;
    }
    return exact_bandwidth_set(pool.pending, params.block_size_limit);
  }
  if (pool.total_size() <= params.block_size_limit) return summarize(pool.pending);
  return greedy_fill(pool.pending, params.block_size_limit);
}

bool is_near_bandwidth_set(std::span<const TxId> candidate, const MempoolView& pool,
                           const ChainParams& params, double proportion) {
  if (!(proportion > 0.0 && proportion <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "proportion must lie in (0, 1]");
  }
  const auto& txs = pool.pending;
  require_exact_size(txs.size());

  std::unordered_set<TxId> wanted(candidate.begin(), candidate.end());
  Size candidate_size = 0;
  std::size_t matched = 0;
  for (const auto& tx : txs) {
    if (wanted.count(tx.id) != 0) {
      candidate_size += tx.size;
      ++matched;
    }
  }
  if (matched != wanted.size()) {
    throw Error(ErrorCode::kInvalidCandidate, "candidate references transactions outside the pool");
  }
  if (candidate_size > params.block_size_limit) {
    throw Error(ErrorCode::kInvalidCandidate, "candidate exceeds the block size limit");
  }

  const Size limit = params.block_size_limit;
  const Fee best = bandwidth_set(pool, params, SelectionMode::kExact).total_fee;

  // Candidate-fee tables mirror the fee tables but only count members.
  std::vector<Transaction> masked(txs.begin(), txs.end());
  for (auto& tx : masked) {
    if (wanted.count(tx.id) == 0) tx.fee = 0;
  }
  const std::size_t lo_n = (txs.size() + 1) / 2;
  const std::span<const Transaction> all(txs);
  const std::span<const Transaction> member(masked);
  const auto lo = subset_table(all.first(lo_n));
  const auto hi = subset_table(all.subspan(lo_n));
  const auto lo_member = subset_table(member.first(lo_n)).fees;
  const auto hi_member = subset_table(member.subspan(lo_n)).fees;

  // Existential over every bandwidth set: keep the largest overlap.
  Fee overlap = -1;
  for (std::size_t h = 0; h < hi.sizes.size(); ++h) {
    const Size budget = limit - hi.sizes[h];
    if (budget < 0) continue;
    const Fee need = best - hi.fees[h];
    for (std::size_t l = 0; l < lo.sizes.size(); ++l) {
      if (lo.sizes[l] <= budget && lo.fees[l] == need) {
        overlap = std::max(overlap, hi_member[h] + lo_member[l]);
      }
    }
  }
  return static_cast<double>(overlap) >= proportion * static_cast<double>(best);
}

double gamma_ratio(Fee next_set_fee, Fee head_block_fee) noexcept {
  if (next_set_fee <= 0) return 0.0;
  if (head_block_fee <= 0) return kInfiniteGamma;
  return static_cast<double>(next_set_fee) / static_cast<double>(head_block_fee);
}

double gamma_ratio(const MempoolView& pool, Fee head_block_fee, const ChainParams& params) {
  return gamma_ratio(bandwidth_set(pool, params).total_fee, head_block_fee);
}

namespace {

using Parts = std::vector<std::vector<Transaction>>;

bool fits(const Parts& parts, Size limit) {
  return std::all_of(parts.begin(), parts.end(), [&](const auto& part) {
    Size s = 0;
    for (const auto& tx : part) s += tx.size;
    return s <= limit;
  });
}

std::size_t argmin(const std::vector<std::int64_t>& v) {
  return static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

std::vector<std::vector<Transaction>> split_equal_fee(std::span<const Transaction> txs, int k,
                                                      const ChainParams& params) {
  if (k < 1 || k > 3) {
    throw Error(ErrorCode::kInvalidArgument, "split_equal_fee supports k in {1, 2, 3}");
  }
  const auto parts_n = static_cast<std::size_t>(k);
  const Size limit = params.block_size_limit;

  std::vector<Transaction> by_fee(txs.begin(), txs.end());
  std::sort(by_fee.begin(), by_fee.end(), [](const Transaction& a, const Transaction& b) {
    if (a.fee != b.fee) return a.fee > b.fee;
    if (a.size != b.size) return a.size > b.size;
    return a.id < b.id;
  });

  // Longest-processing-time on fee.
  auto lpt = [&]() {
    Parts parts(parts_n);
    std::vector<std::int64_t> load(parts_n, 0);
    for (const auto& tx : by_fee) {
      const auto j = argmin(load);
      parts[j].push_back(tx);
      load[j] += tx.fee;
    }
    return parts;
  };

  // Fee order, lightest part that still has room.
  auto lpt_with_room = [&]() -> std::optional<Parts> {
    Parts parts(parts_n);
    std::vector<std::int64_t> load(parts_n, 0);
    std::vector<Size> used(parts_n, 0);
    for (const auto& tx : by_fee) {
      std::optional<std::size_t> pick;
      for (std::size_t j = 0; j < parts_n; ++j) {
        if (used[j] + tx.size > limit) continue;
        if (!pick || load[j] < load[*pick]) pick = j;
      }
      if (!pick) return std::nullopt;
      parts[*pick].push_back(tx);
      load[*pick] += tx.fee;
      used[*pick] += tx.size;
    }
    return parts;
  };

  // Size-balanced fallback.
  auto by_size = [&]() {
    std::vector<Transaction> ordered = by_fee;
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const Transaction& a, const Transaction& b) { return a.size > b.size; });
    Parts parts(parts_n);
    std::vector<std::int64_t> used(parts_n, 0);
    for (const auto& tx : ordered) {
      const auto j = argmin(used);
      parts[j].push_back(tx);
      used[j] += tx.size;
    }
    return parts;
  };

  auto finish = [](Parts parts) {
    for (auto& part : parts) std::sort(part.begin(), part.end(), greedy_before);
    return parts;
  };

  if (auto parts = lpt(); fits(parts, limit)) return finish(std::move(parts));
  if (auto parts = lpt_with_room(); parts && fits(*parts, limit)) return finish(std::move(*parts));
  if (auto parts = by_size(); fits(parts, limit)) return finish(std::move(parts));
  throw Error(ErrorCode::kUnsplittable,
              "cannot split " + std::to_string(txs.size()) + " transactions into " +
                  std::to_string(k) + " parts within the block size limit");
}

BandwidthSetResult claim_partial(const MempoolView& pool, Fee target_fee,
                                 const ChainParams& params) {
  BandwidthSetResult r;
  if (target_fee <= 0) return r;
  const auto ordered = greedy_order(pool.pending);
  for (const auto& tx : ordered) {
    if (r.total_size + tx.size > params.block_size_limit) continue;
    if (r.total_fee + tx.fee > target_fee) continue;
    r.tx_ids.push_back(tx.id);
    r.total_fee += tx.fee;
    r.total_size += tx.size;
  }
  return r;
}

std::vector<Transaction> select_by_id(std::span<const Transaction> pool,
                                      std::span<const TxId> ids) {
  const std::unordered_set<TxId> wanted(ids.begin(), ids.end());
  std::vector<Transaction> out;
  out.reserve(ids.size());
  for (const auto& tx : pool) {
    if (wanted.count(tx.id) != 0) out.push_back(tx);
  }
  return out;
}

MempoolView without(const MempoolView& pool, std::span<const TxId> ids) {
  const std::unordered_set<TxId> drop(ids.begin(), ids.end());
  MempoolView out;
  out.pending.reserve(pool.pending.size());
  for (const auto& tx : pool.pending) {
    if (drop.count(tx.id) == 0) out.pending.push_back(tx);
  }
  return out;
}

}  // namespace undercut
