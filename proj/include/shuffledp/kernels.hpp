#pragma once

#include <cstddef>

namespace shuffledp::kernels {

// The divergence sums spend nearly all their time in four reductions over
// dense pmf windows. Each has a scalar reference implementation and an AVX2
// variant; the dispatcher picks at load time from cpuid, and tests pin one
// backend to cross-check the other. All variants use Kahan-compensated
// accumulation so window ordering does not affect the result beyond ~1 ulp.

enum class Backend { scalar, avx2 };

// Backend active for subsequent kernel calls.
Backend active_backend();

// Force a backend. Throws std::invalid_argument if this host cannot run it.
void set_backend(Backend b);

bool avx2_supported();

// sum of x[i]
double sum(const double* x, std::size_t n);

// sum of max(x[i], 0)
double positive_sum(const double* x, std::size_t n);

// sum of max(a * p[i] - b * q[i], 0); the hockey-stick row kernel
double hinge_sum(const double* p, const double* q, double a, double b, std::size_t n);

// acc[i] += c * x[i]
void fma_inplace(double* acc, const double* x, double c, std::size_t n);

namespace detail {
double sum_scalar(const double* x, std::size_t n);
double positive_sum_scalar(const double* x, std::size_t n);
double hinge_sum_scalar(const double* p, const double* q, double a, double b, std::size_t n);
void fma_inplace_scalar(double* acc, const double* x, double c, std::size_t n);

double sum_avx2(const double* x, std::size_t n);
double positive_sum_avx2(const double* x, std::size_t n);
double hinge_sum_avx2(const double* p, const double* q, double a, double b, std::size_t n);
void fma_inplace_avx2(double* acc, const double* x, double c, std::size_t n);
}  // namespace detail

}  // namespace shuffledp::kernels
