#include "shuffledp/kernels.hpp"

#include <algorithm>

namespace shuffledp::kernels::detail {

namespace {

// Kahan-Neumaier running sum: exact enough that accumulation order stops
// mattering for windows of ~1e8 terms.
struct Kahan {
  double s = 0.0;
  double c = 0.0;
  void add(double v) {
    double t = s + v;
    if (std::abs(s) >= std::abs(v))
      c += (s - t) + v;
    else
      c += (v - t) + s;
    s = t;
  }
  double value() const { return s + c; }
};

}  // namespace

double sum_scalar(const double* x, std::size_t n) {
  Kahan k;
  for (std::size_t i = 0; i < n; ++i) k.add(x[i]);
  return k.value();
}

double positive_sum_scalar(const double* x, std::size_t n) {
  Kahan k;
  for (std::size_t i = 0; i < n; ++i) k.add(std::max(x[i], 0.0));
  return k.value();
}

double hinge_sum_scalar(const double* p, const double* q, double a, double b, std::size_t n) {
  Kahan k;
  for (std::size_t i = 0; i < n; ++i) k.add(std::max(a * p[i] - b * q[i], 0.0));
  return k.value();
}

void fma_inplace_scalar(double* acc, const double* x, double c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] += c * x[i];
}

}  // namespace shuffledp::kernels::detail
