#include "shuffledp/kernels.hpp"

#include <atomic>
#include <stdexcept>

namespace shuffledp::kernels {

namespace {

bool detect_avx2() {
#if defined(SHUFFLEDP_HAVE_AVX2_TU) && (defined(__x86_64__) || defined(_M_X64))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

std::atomic<Backend> g_backend{detect_avx2() ? Backend::avx2 : Backend::scalar};

}  // namespace

bool avx2_supported() {
  static const bool ok = detect_avx2();
  return ok;
}

Backend active_backend() { return g_backend.load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  if (b == Backend::avx2 && !avx2_supported())
    throw std::invalid_argument("set_backend: avx2 not supported on this host");
  g_backend.store(b, std::memory_order_relaxed);
}

double sum(const double* x, std::size_t n) {
  return active_backend() == Backend::avx2 ? detail::sum_avx2(x, n) : detail::sum_scalar(x, n);
}

double positive_sum(const double* x, std::size_t n) {
  return active_backend() == Backend::avx2 ? detail::positive_sum_avx2(x, n)
                                           : detail::positive_sum_scalar(x, n);
}

double hinge_sum(const double* p, const double* q, double a, double b, std::size_t n) {
  return active_backend() == Backend::avx2 ? detail::hinge_sum_avx2(p, q, a, b, n)
                                           : detail::hinge_sum_scalar(p, q, a, b, n);
}

void fma_inplace(double* acc, const double* x, double c, std::size_t n) {
  if (active_backend() == Backend::avx2)
    detail::fma_inplace_avx2(acc, x, c, n);
  else
    detail::fma_inplace_scalar(acc, x, c, n);
}

}  // namespace shuffledp::kernels
