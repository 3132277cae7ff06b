#include "undercut/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

namespace undercut::kernels {

// Four int64 lanes. Each lane keeps its own running maximum and the first
// index that produced it; the horizontal reduction then picks the largest
// fee and, on ties, the smallest index, which reproduces the scalar
// "first strict maximum" result exactly.
__attribute__((target("avx2"))) ScanBest best_fitting_avx2(
    std::span<const std::int64_t> sizes, std::span<const std::int64_t> fees,
    std::int64_t budget) noexcept {
  const auto n = static_cast<std::int64_t>(sizes.size());
  const std::int64_t vec_end = n - (n % 4);

  const __m256i budget_v = _mm256_set1_epi64x(budget);
  const __m256i none_v = _mm256_set1_epi64x(-1);
  const __m256i step_v = _mm256_set1_epi64x(4);
  __m256i best_fee = none_v;
  __m256i best_idx = none_v;
  __m256i idx = _mm256_setr_epi64x(0, 1, 2, 3);

  for (std::int64_t i = 0; i < vec_end; i += 4) {
    const __m256i s = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(sizes.data() + i));
    const __m256i f = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(fees.data() + i));
    const __m256i too_big = _mm256_cmpgt_epi64(s, budget_v);
    const __m256i cand = _mm256_blendv_epi8(f, none_v, too_big);
    const __m256i better = _mm256_cmpgt_epi64(cand, best_fee);
    best_fee = _mm256_blendv_epi8(best_fee, cand, better);
    best_idx = _mm256_blendv_epi8(best_idx, idx, better);
    idx = _mm256_add_epi64(idx, step_v);
  }

  alignas(32) std::int64_t lane_fee[4];
  alignas(32) std::int64_t lane_idx[4];
  _mm256_store_si256(reinterpret_cast<__m256i*>(lane_fee), best_fee);
  _mm256_store_si256(reinterpret_cast<__m256i*>(lane_idx), best_idx);

  ScanBest best;
  for (int lane = 0; lane < 4; ++lane) {
    if (lane_idx[lane] < 0) continue;
    if (lane_fee[lane] > best.fee ||
        (lane_fee[lane] == best.fee && lane_idx[lane] < best.index)) {
      best.fee = lane_fee[lane];
      best.index = lane_idx[lane];
    }
  }
  for (std::int64_t i = vec_end; i < n; ++i) {
    if (sizes[i] <= budget && fees[i] > best.fee) {
      best.fee = fees[i];
      best.index = i;
    }
  }
  return best;
}

}  // namespace undercut::kernels

#endif
