#pragma once

// Data-parallel inner loops used by the exact bandwidth-set search.
//
// Each kernel has a scalar reference implementation and, on x86-64, an AVX2
// variant. The variant is selected at runtime from CPUID; defining
// UNDERCUT_FORCE_SCALAR pins the scalar path. All variants must return
// bit-identical results (the tests enforce this).

#include <cstdint>
#include <span>
#include <string_view>

namespace undercut::kernels {

enum class Backend { kScalar, kAvx2 };

std::string_view to_string(Backend backend);

/// True when the running CPU supports the AVX2 variant and it was compiled in.
bool avx2_available() noexcept;

/// Backend used by the dispatching entry points.
Backend active_backend() noexcept;

/// Test hook: force a backend. Requesting kAvx2 on a CPU without it is ignored.
void set_backend(Backend backend) noexcept;

struct ScanBest {
  std::int64_t fee = -1;    // -1 when no entry fits
  std::int64_t index = -1;  // first index reaching `fee`
};

/// Among entries with sizes[i] <= budget, the largest fees[i] and the first
/// index where it occurs. sizes and fees must have equal length.
ScanBest best_fitting(std::span<const std::int64_t> sizes,
                      std::span<const std::int64_t> fees,
                      std::int64_t budget) noexcept;

ScanBest best_fitting_scalar(std::span<const std::int64_t> sizes,
                             std::span<const std::int64_t> fees,
                             std::int64_t budget) noexcept;

#if defined(__x86_64__) || defined(_M_X64)
ScanBest best_fitting_avx2(std::span<const std::int64_t> sizes,
                           std::span<const std::int64_t> fees,
                           std::int64_t budget) noexcept;
#endif

}  // namespace undercut::kernels
