#include "undercut/kernels.hpp"

#include <atomic>

namespace undercut::kernels {

namespace {

Backend detect() noexcept {
#if !defined(UNDERCUT_FORCE_SCALAR) && (defined(__x86_64__) || defined(_M_X64))
  if (__builtin_cpu_supports("avx2")) return Backend::kAvx2;
#endif
  return Backend::kScalar;
}

std::atomic<Backend>& backend_slot() noexcept {
  static std::atomic<Backend> slot{detect()};
  return slot;
}

}  // namespace

std::string_view to_string(Backend backend) {
  return backend == Backend::kAvx2 ? "avx2" : "scalar";
}

bool avx2_available() noexcept { return detect() == Backend::kAvx2; }

Backend active_backend() noexcept {
  return backend_slot().load(std::memory_order_relaxed);
}

void set_backend(Backend backend) noexcept {
  if (backend == Backend::kAvx2 && !avx2_available()) return;
  backend_slot().store(backend, std::memory_order_relaxed);
}

ScanBest best_fitting_scalar(std::span<const std::int64_t> sizes,
                             std::span<const std::int64_t> fees,
                             std::int64_t budget) noexcept {
  ScanBest best;
  const auto n = static_cast<std::int64_t>(sizes.size());
  for (std::int64_t i = 0; i < n; ++i) {
    if (sizes[i] <= budget && fees[i] > best.fee) {
      best.fee = fees[i];
      best.index = i;
    }
  }
  return best;
}

ScanBest best_fitting(std::span<const std::int64_t> sizes,
                      std::span<const std::int64_t> fees,
                      std::int64_t budget) noexcept {
#if defined(__x86_64__) || defined(_M_X64)
  if (active_backend() == Backend::kAvx2) {
    return best_fitting_avx2(sizes, fees, budget);
  }
#endif
  return best_fitting_scalar(sizes, fees, budget);
}

}  // namespace undercut::kernels
