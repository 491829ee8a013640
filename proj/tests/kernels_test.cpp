#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "shuffledp/kernels.hpp"
#include "shuffledp/rng.hpp"

using namespace shuffledp;

namespace {

// Mixed-magnitude data that defeats naive summation: alternating huge and
// tiny terms whose float sum drifts unless compensation is in place.
std::vector<double> adversarial(std::size_t n, Rng& rng) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mag = std::pow(10.0, static_cast<double>(rng.below(33)) - 16.0);
    x[i] = (rng.uniform() - 0.5) * mag;
  }
  return x;
}

long double ref_sum(const std::vector<double>& x) {
  long double s = 0.0L;
  for (double v : x) s += static_cast<long double>(v);
  return s;
}

long double ref_positive_sum(const std::vector<double>& x) {
  long double s = 0.0L;
  for (double v : x)
    if (v > 0.0) s += static_cast<long double>(v);
  return s;
}

long double ref_hinge(const std::vector<double>& p, const std::vector<double>& q, double a,
                      double b) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < p.size(); ++i) {
    long double t = static_cast<long double>(a) * p[i] - static_cast<long double>(b) * q[i];
    if (t > 0.0L) s += t;
  }
  return s;
}

}  // namespace

TEST_CASE("kernels: compensated sums track a long-double reference") {
  // The tolerance is conditioned on the total magnitude: a cancelled total
  // can only be known to eps times what was added up.
  Rng rng(derive_seed(808, 1));
  for (std::size_t n : {0ul, 1ul, 3ul, 4ul, 7ul, 64ul, 1000ul, 4097ul}) {
    std::vector<double> x = adversarial(n, rng);
    double abs_total = 1.0;
    for (double v : x) abs_total += std::fabs(v);
    long double want = ref_sum(x);
    double got = kernels::sum(x.data(), x.size());
    CHECK(std::fabs(static_cast<double>(want - static_cast<long double>(got))) <=
          1e-14 * abs_total);

    long double wantp = ref_positive_sum(x);
    double gotp = kernels::positive_sum(x.data(), x.size());
    CHECK(std::fabs(static_cast<double>(wantp - static_cast<long double>(gotp))) <=
          1e-14 * (static_cast<double>(wantp) + 1.0));
  }
}

TEST_CASE("kernels: hinge sum matches the reference") {
  Rng rng(derive_seed(808, 2));
  for (std::size_t n : {1ul, 5ul, 64ul, 333ul}) {
    std::vector<double> p = adversarial(n, rng), q = adversarial(n, rng);
    double a = 1.0, b = std::exp(1.0);
    long double want = ref_hinge(p, q, a, b);
    double got = kernels::hinge_sum(p.data(), q.data(), a, b, n);
    CHECK(std::fabs(static_cast<double>(want - static_cast<long double>(got))) <=
          1e-14 * (static_cast<double>(want) + 1.0));
  }
}

TEST_CASE("kernels: fused multiply-add accumulation") {
  Rng rng(derive_seed(808, 3));
  for (std::size_t n : {1ul, 4ul, 9ul, 257ul}) {
    std::vector<double> acc(n), x(n), base(n);
    for (std::size_t i = 0; i < n; ++i) {
      base[i] = rng.uniform();
      x[i] = rng.uniform() - 0.5;
    }
    double c = 2.75;
    acc = base;
    kernels::fma_inplace(acc.data(), x.data(), c, n);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(acc[i] == doctest::Approx(base[i] + c * x[i]).epsilon(1e-15));
  }
}

TEST_CASE("kernels: scalar and vector backends agree to an ulp") {
  // Lane-splitting reorders the additions, so the two backends may differ in
  // the last ulp but never more; the long-double test above bounds both.
  if (!kernels::avx2_supported()) return;
  Rng rng(derive_seed(808, 4));
  std::vector<double> x(1537);
  for (double& v : x) v = rng.uniform();
  double scalar = kernels::detail::sum_scalar(x.data(), x.size());
  double simd = kernels::detail::sum_avx2(x.data(), x.size());
  CHECK(std::fabs(scalar - simd) <= 1e-15 * std::fabs(scalar));
  double ps = kernels::detail::positive_sum_scalar(x.data(), x.size());
  double pv = kernels::detail::positive_sum_avx2(x.data(), x.size());
  CHECK(std::fabs(ps - pv) <= 1e-15 * std::fabs(ps));
}

TEST_CASE("kernels: backend dispatch honors overrides") {
  kernels::Backend original = kernels::active_backend();
  kernels::set_backend(kernels::Backend::scalar);
  CHECK(kernels::active_backend() == kernels::Backend::scalar);
  std::vector<double> x{1.0, 2.0, 3.0};
  CHECK(kernels::sum(x.data(), 3) == doctest::Approx(6.0));
  if (kernels::avx2_supported()) {
    kernels::set_backend(kernels::Backend::avx2);
    CHECK(kernels::sum(x.data(), 3) == doctest::Approx(6.0));
  } else {
    CHECK_THROWS_AS(kernels::set_backend(kernels::Backend::avx2), std::invalid_argument);
  }
  kernels::set_backend(original);
}

TEST_CASE("kernels: divergence-scale accumulations stay exact") {
  // A million tiny probabilities plus one large term: naive summation loses
  // the tail, compensated summation keeps it to the last ulp.
  std::size_t n = 1000001;
  std::vector<double> x(n, 1e-18);
  x[0] = 1.0;
  double got = kernels::sum(x.data(), n);
  CHECK(got == doctest::Approx(1.0 + 1e-12).epsilon(1e-15));
}
