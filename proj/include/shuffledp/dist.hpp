#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "shuffledp/errors.hpp"
#include "shuffledp/rng.hpp"

namespace shuffledp {

enum class DistKind {
  point_mass,        // all mass at one integer c
  bernoulli,         // {0,1}, P(1) = p
  binomial,          // sum of n Bernoulli(p)
  poisson,           // rate lambda >= 0
  neg_binomial,      // NB(r, p): P(k) = C(k+r-1, k) (1-p)^r p^k, k >= 0
  logarithmic,       // P(k) = -p^k / (k log(1-p)), k >= 1
  discrete_laplace,  // P(k) proportional to e^{-s|k|}, k in Z
  shifted,           // base + constant
  difference,        // lhs - rhs, independent
};

class IntegerDistribution;

// Compound-Poisson form: a Poisson(rate) number of iid draws from `atom`.
struct DcpForm {
  double rate;
  std::shared_ptr<const IntegerDistribution> atom;
};

// Dense pmf table on [lo, lo + mass.size()), with a certified upper bound on
// the probability mass falling outside the table.
struct PmfWindow {
  long long lo = 0;
  std::vector<double> mass;
  double omitted = 0.0;

  long long hi() const { return lo + static_cast<long long>(mass.size()) - 1; }
  double at(long long k) const {
    long long i = k - lo;
    if (i < 0 || i >= static_cast<long long>(mass.size())) return 0.0;
    return mass[static_cast<std::size_t>(i)];
  }
};

// Immutable integer-valued distribution. Composite kinds (shifted,
// difference) hold their children by shared pointer, so copies are cheap.
//
// Degenerate parameters are normalized at construction: Poisson(0), NB(0, p)
// and NB(r, 0) all construct as point_mass(0), Binomial(0, p) as
// point_mass(0), so downstream code never sees zero-rate special cases.
class IntegerDistribution {
 public:
  static IntegerDistribution point_mass(long long c);
  static IntegerDistribution bernoulli(double p);
  static IntegerDistribution binomial(long long n, double p);
  static IntegerDistribution poisson(double lambda);
  static IntegerDistribution neg_binomial(double r, double p);
  static IntegerDistribution geometric(double p);  // NB(1, p)
  static IntegerDistribution logarithmic(double p);
  static IntegerDistribution discrete_laplace(double s);
  static IntegerDistribution shifted(IntegerDistribution base, long long k);
  static IntegerDistribution difference(IntegerDistribution lhs, IntegerDistribution rhs);

  DistKind kind() const { return kind_; }

  double mean() const;
  double variance() const;

  // Exact pmf at k. For the difference kind this sums over a window of the
  // subtrahend (tail 1e-15 per side), which is plenty for test-scale use.
  double pmf(long long k) const;

  // The distribution D' with D = sum of n iid copies of D'. Throws
  // NotDivisible when the kind has no such splitting or the parameters are
  // not divisible by n.
  IntegerDistribution divide(std::uint64_t n) const;

  // Compound-Poisson decomposition. Defined for poisson, neg_binomial (which
  // covers geometric) and point_mass(0); throws UnsupportedKind otherwise.
  DcpForm to_dcp() const;

  long long sample(Rng& rng) const;

  // Dense pmf window covering all but at most tail_mass of the probability.
  // Tail cutoffs are certified by geometric bounds on the pmf ratio, not
  // eyeballed; `omitted` in the result is a rigorous upper bound.
  PmfWindow pmf_window(double tail_mass = 1e-12) const;

  // Kind-specific parameter accessors. Calling one on the wrong kind throws
  // UnsupportedKind; they exist so calibration code can pattern-match noise
  // shapes without a parallel parameter struct.
  double rate() const;       // poisson
  double r() const;          // neg_binomial
  double p() const;          // neg_binomial, logarithmic, bernoulli, binomial
  long long trials() const;  // binomial
  double scale() const;      // discrete_laplace
  long long offset() const;  // point_mass (the atom), shifted (the shift)
  const IntegerDistribution& base() const;  // shifted
  const IntegerDistribution& lhs() const;   // difference
  const IntegerDistribution& rhs() const;   // difference

 private:
  IntegerDistribution(DistKind k, double x, double y, long long c)
      : kind_(k), x_(x), y_(y), c_(c) {}

  DistKind kind_;
  double x_ = 0.0;  // first numeric parameter (p, lambda, r, s)
  double y_ = 0.0;  // second numeric parameter (p for neg_binomial)
  long long c_ = 0; // integer parameter (point mass atom, shift, trials)
  std::shared_ptr<const IntegerDistribution> c1_, c2_;
};

namespace detail {

// Building blocks shared by IntegerDistribution::sample and the protocol
// hot paths (which precompute the per-draw constants once per experiment).

// Knuth's product method, split into segments of rate <= 400 so the running
// product never underflows. O(1 + lambda) uniforms.
long long sample_poisson(double lambda, Rng& rng);

// Same, for lambda <= 400 with exp(-lambda) precomputed by the caller.
long long sample_poisson_pre(double exp_neg_lambda, Rng& rng);

// Inverse-transform sampling of Logarithmic(p) via the pmf recurrence
// f(k) = f(k-1) * p * (k-1) / k; expected iteration count is the mean.
// c1 must be -1 / log(1 - p).
long long sample_logarithmic(double p, double c1, Rng& rng);

// NB(r, p) through its compound-Poisson form: a Poisson(-r log(1-p)) number
// of Logarithmic(p) atoms.
long long sample_neg_binomial(double r, double p, Rng& rng);

}  // namespace detail

}  // namespace shuffledp
