// AVX2+FMA variants of the reduction kernels. This translation unit is the
// only one compiled with -mavx2; nothing here may be called unless the
// dispatcher verified cpu support first.

#include "shuffledp/kernels.hpp"

#ifdef SHUFFLEDP_HAVE_AVX2_TU

#include <immintrin.h>

#include <algorithm>
#include <cmath>

namespace shuffledp::kernels::detail {

namespace {

// Four independent Kahan lanes; combined with a scalar Neumaier pass at the
// end, together with the ragged tail.
struct Kahan4 {
  __m256d s = _mm256_setzero_pd();
  __m256d c = _mm256_setzero_pd();

  inline void add(__m256d v) {
    // Branch-free Neumaier step per lane.
    __m256d t = _mm256_add_pd(s, v);
    __m256d abs_mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
    __m256d big = _mm256_max_pd(_mm256_and_pd(s, abs_mask), _mm256_and_pd(v, abs_mask));
    __m256d swap = _mm256_cmp_pd(_mm256_and_pd(s, abs_mask), big, _CMP_LT_OQ);
    // lo = the smaller-magnitude operand, hi = the larger one
    __m256d hi = _mm256_blendv_pd(s, v, swap);
    __m256d lo = _mm256_blendv_pd(v, s, swap);
    c = _mm256_add_pd(c, _mm256_add_pd(_mm256_sub_pd(hi, t), lo));
    s = t;
  }

  double value(double tail_sum, double tail_comp) const {
    alignas(32) double ss[4], cc[4];
    _mm256_store_pd(ss, s);
    _mm256_store_pd(cc, c);
    // Final combine in scalar Neumaier.
    double total = tail_sum, comp = tail_comp;
    for (int i = 0; i < 4; ++i) {
      double v = ss[i];
      double t = total + v;
      comp += std::abs(total) >= std::abs(v) ? (total - t) + v : (v - t) + total;
      total = t;
      comp += cc[i];
    }
    return total + comp;
  }
};

struct KahanScalar {
  double s = 0.0, c = 0.0;
  void add(double v) {
    double t = s + v;
    if (std::abs(s) >= std::abs(v))
      c += (s - t) + v;
    else
      c += (v - t) + s;
    s = t;
  }
};

}  // namespace

double sum_avx2(const double* x, std::size_t n) {
  Kahan4 acc;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc.add(_mm256_loadu_pd(x + i));
  KahanScalar tail;
  for (; i < n; ++i) tail.add(x[i]);
  return acc.value(tail.s, tail.c);
}

double positive_sum_avx2(const double* x, std::size_t n) {
  Kahan4 acc;
  __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc.add(_mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  KahanScalar tail;
  for (; i < n; ++i) tail.add(std::max(x[i], 0.0));
  return acc.value(tail.s, tail.c);
}

double hinge_sum_avx2(const double* p, const double* q, double a, double b, std::size_t n) {
  Kahan4 acc;
  __m256d va = _mm256_set1_pd(a);
  __m256d vb = _mm256_set1_pd(b);
  __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vp = _mm256_loadu_pd(p + i);
    __m256d vq = _mm256_loadu_pd(q + i);
    __m256d term = _mm256_fmsub_pd(va, vp, _mm256_mul_pd(vb, vq));
    acc.add(_mm256_max_pd(term, zero));
  }
  KahanScalar tail;
  for (; i < n; ++i) tail.add(std::max(a * p[i] - b * q[i], 0.0));
  return acc.value(tail.s, tail.c);
}

void fma_inplace_avx2(double* acc, const double* x, double c, std::size_t n) {
  __m256d vc = _mm256_set1_pd(c);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_fmadd_pd(vc, _mm256_loadu_pd(x + i), _mm256_loadu_pd(acc + i));
    _mm256_storeu_pd(acc + i, v);
  }
  for (; i < n; ++i) acc[i] += c * x[i];
}

}  // namespace shuffledp::kernels::detail

#else  // SHUFFLEDP_HAVE_AVX2_TU

// Non-x86 or no -mavx2 support in the toolchain: satisfy the symbols; the
// dispatcher never routes here because avx2_supported() reports false.
namespace shuffledp::kernels::detail {
double sum_avx2(const double* x, std::size_t n) { return sum_scalar(x, n); }
double positive_sum_avx2(const double* x, std::size_t n) { return positive_sum_scalar(x, n); }
double hinge_sum_avx2(const double* p, const double* q, double a, double b, std::size_t n) {
  return hinge_sum_scalar(p, q, a, b, n);
}
void fma_inplace_avx2(double* acc, const double* x, double c, std::size_t n) {
  fma_inplace_scalar(acc, x, c, n);
}
}  // namespace shuffledp::kernels::detail

#endif
