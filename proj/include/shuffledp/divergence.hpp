#pragma once

#include <cstdint>

#include "shuffledp/dist.hpp"

namespace shuffledp {

// Result of a hockey-stick divergence evaluation at a fixed epsilon.
//
// `delta` is a certified lower end: for exact evaluations the true divergence
// lies in [delta, delta + truncation_error], where truncation_error collects
// the window tail mass (scaled by e^eps where it can inflate a term).
// Calibrators accept a parameter only when delta + truncation_error fits the
// target, so truncation can never certify a leaky parameter as private.
//
// exact=false marks protocol bounds obtained by projecting the transcript
// onto a coarser statistic (data processing): the reported value is a valid
// lower bound on the transcript divergence but not the whole story, so
// parameters calibrated against it are flagged optimistic.
struct PrivacyReport {
  double epsilon = 0.0;
  double delta = 0.0;
  double truncation_error = 0.0;
  bool exact = true;
};

// The three noise components of the correlated mechanism: the output wires
// carry (sum + Z1 + Z3, Z2 + Z3), so Z3 cancels in the difference but pads
// both visible counts.
struct NoiseTriple {
  IntegerDistribution d1;
  IntegerDistribution d2;
  IntegerDistribution d3;
};

// d_eps(D || k + D): divergence between the noise law and its shift, the
// quantity that certifies one-count-off neighbors.
PrivacyReport shift_divergence(const IntegerDistribution& d, long long k, double eps,
                               double tail_budget = 1e-12);

// max over 1 <= |k| <= sensitivity of shift_divergence; Delta-summation
// privacy holds iff this is <= delta.
PrivacyReport delta_summation_divergence(const IntegerDistribution& d, long long sensitivity,
                                         double eps, double tail_budget = 1e-12);

// Divergence between the joint laws of (U+ - U-, U-) for true sums differing
// by one, where U+ = sum + Z1 + Z3 and U- = Z2 + Z3. Dispatches to a
// closed-form evaluation when D1, D2 are geometric with e^-eps <= p1 (the
// regime every calibrated triple lives in) and to the literal triple sum
// otherwise. Requires non-negative infinitely divisible components.
PrivacyReport correlated_divergence(const NoiseTriple& t, double eps,
                                    double tail_budget = 1e-12);

// The literal triple-sum evaluation, kept as the reference the fast path is
// tested against. Cost is |W1 x W2 x W3|, so use small windows only.
PrivacyReport correlated_divergence_reference(const NoiseTriple& t, double eps,
                                              double tail_budget = 1e-12);

// Exact two-dimensional condition for per-bucket Poisson histogram noise:
// d_eps( Poi(lam) x Poi(lam) || (1 + Poi(lam)) x (-1 + Poi(lam)) ), both
// directions. Moving one user between buckets shifts two coordinates at once,
// which is strictly harder than two independent one-coordinate shifts.
PrivacyReport poisson_histogram_divergence(double lambda, double eps,
                                           double tail_budget = 1e-12);

// E[ [sum_{i=1}^n U_i]_+ ] for iid U taking value d1 w.p. p1, d2 w.p. p2,
// d3 w.p. 1 - p1 - p2. Evaluated as a double binomial sum over windows whose
// omitted mass is certified; value is a lower bound (terms are only dropped)
// and truncation_error bounds what the dropped terms could add.
struct PositivePartMean {
  double value = 0.0;
  double truncation_error = 0.0;
};
PositivePartMean positive_part_mean(std::uint64_t n, double p1, double p2, double d1, double d2,
                                    double d3, double tail_budget = 1e-12);

enum class BaselineProtocol { binary_rr, b_rr, rappor, frag_rappor };

// Lower bound on the best achievable delta of a local-randomizer protocol
// after shuffling, at flip probability p_flip. binary_rr evaluates its exact
// two-point transcript law (exact=true); the rest bound the transcript
// divergence from below through a projected statistic (exact=false).
PrivacyReport baseline_delta_lower(BaselineProtocol proto, double p_flip, double eps,
                                   std::uint64_t n, std::uint64_t B,
                                   double tail_budget = 1e-12);

}  // namespace shuffledp
