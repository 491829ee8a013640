#include "shuffledp/dist.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <vector>

namespace shuffledp {

namespace {

constexpr long long kNoSupportEnd = std::numeric_limits<long long>::max();
constexpr long long kWindowSizeBudget = 1LL << 28;

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// Reciprocal table for the logarithmic sampler's inner loop; beyond the table
// a division is rare enough not to matter.
const std::array<double, 32768>& inv_table() {
  static const std::array<double, 32768> t = [] {
    std::array<double, 32768> a{};
    for (std::size_t i = 1; i < a.size(); ++i) a[i] = 1.0 / static_cast<double>(i);
    return a;
  }();
  return t;
}

inline double inv_int(long long k) {
  const auto& t = inv_table();
  return k < static_cast<long long>(t.size()) ? t[static_cast<std::size_t>(k)]
                                              : 1.0 / static_cast<double>(k);
}

struct ScanResult {
  long long stop;   // last index inside the window
  double tail;      // certified bound on the mass beyond `stop`
};

// Walks from `start` in direction `dir`, tracking the pmf by its ratio
// recurrence, until the geometric tail bound beyond the current index drops
// under `budget` or the support ends. `sup` must upper-bound every ratio past
// its argument in this direction; that is what certifies the bound.
template <class Ratio, class Sup, class LogPmf>
ScanResult scan_side(long long start, long long support_end, int dir, double budget,
                     Ratio ratio, Sup sup, LogPmf log_pmf) {
  long long k = start;
  double cur = std::exp(log_pmf(start));
  long long steps = 0;
  while (k != support_end) {
    double rho = sup(k);
    if (rho < 1.0) {
      double bound = cur * rho / (1.0 - rho);
      if (bound <= budget) return {k, bound};
    }
    cur *= ratio(k);
    k += dir;
    if ((++steps & 0xffff) == 0) cur = std::exp(log_pmf(k));
    if (steps > kWindowSizeBudget)
      throw std::runtime_error("pmf window exceeds size budget; tail mass too strict");
  }
  return {k, 0.0};
}

// Fills [lo, hi] by the ratio recurrence anchored at the mode, re-anchoring
// periodically so multiplicative rounding drift cannot accumulate over very
// long windows.
template <class RatioUp, class RatioDn, class LogPmf>
PmfWindow fill_window(long long lo, long long hi, long long mode, double omitted,
                      RatioUp ratio_up, RatioDn ratio_dn, LogPmf log_pmf) {
  PmfWindow w;
  w.lo = lo;
  w.omitted = omitted;
  w.mass.assign(static_cast<std::size_t>(hi - lo + 1), 0.0);
  double anchor = std::exp(log_pmf(mode));
  w.mass[static_cast<std::size_t>(mode - lo)] = anchor;
  double cur = anchor;
  long long steps = 0;
  for (long long k = mode; k < hi; ++k) {
    cur *= ratio_up(k);
    if ((++steps & 0xffff) == 0) cur = std::exp(log_pmf(k + 1));
    w.mass[static_cast<std::size_t>(k + 1 - lo)] = cur;
  }
  cur = anchor;
  steps = 0;
  for (long long k = mode; k > lo; --k) {
    cur *= ratio_dn(k);
    if ((++steps & 0xffff) == 0) cur = std::exp(log_pmf(k - 1));
    w.mass[static_cast<std::size_t>(k - 1 - lo)] = cur;
  }
  return w;
}

}  // namespace

IntegerDistribution IntegerDistribution::point_mass(long long c) {
  return IntegerDistribution(DistKind::point_mass, 0.0, 0.0, c);
}

IntegerDistribution IntegerDistribution::bernoulli(double p) {
  require(p >= 0.0 && p <= 1.0, "bernoulli: p must be in [0, 1]");
  return IntegerDistribution(DistKind::bernoulli, p, 0.0, 0);
}

IntegerDistribution IntegerDistribution::binomial(long long n, double p) {
  require(n >= 0, "binomial: trials must be non-negative");
  require(p >= 0.0 && p <= 1.0, "binomial: p must be in [0, 1]");
  if (n == 0 || p == 0.0) return point_mass(0);
  if (p == 1.0) return point_mass(n);
  return IntegerDistribution(DistKind::binomial, p, 0.0, n);
}

IntegerDistribution IntegerDistribution::poisson(double lambda) {
  require(std::isfinite(lambda) && lambda >= 0.0, "poisson: rate must be finite and >= 0");
  if (lambda == 0.0) return point_mass(0);
  return IntegerDistribution(DistKind::poisson, lambda, 0.0, 0);
}

IntegerDistribution IntegerDistribution::neg_binomial(double r, double p) {
  require(std::isfinite(r) && r >= 0.0, "neg_binomial: r must be finite and >= 0");
  require(p >= 0.0 && p < 1.0, "neg_binomial: p must be in [0, 1)");
  if (r == 0.0 || p == 0.0) return point_mass(0);
  return IntegerDistribution(DistKind::neg_binomial, r, p, 0);
}

IntegerDistribution IntegerDistribution::geometric(double p) { return neg_binomial(1.0, p); }

IntegerDistribution IntegerDistribution::logarithmic(double p) {
  require(p > 0.0 && p < 1.0, "logarithmic: p must be in (0, 1)");
  return IntegerDistribution(DistKind::logarithmic, p, 0.0, 0);
}

IntegerDistribution IntegerDistribution::discrete_laplace(double s) {
  require(std::isfinite(s) && s > 0.0, "discrete_laplace: scale must be finite and > 0");
  return IntegerDistribution(DistKind::discrete_laplace, s, 0.0, 0);
}

IntegerDistribution IntegerDistribution::shifted(IntegerDistribution base, long long k) {
  if (k == 0) return base;
  if (base.kind_ == DistKind::point_mass) return point_mass(base.c_ + k);
  IntegerDistribution d(DistKind::shifted, 0.0, 0.0, k);
  d.c1_ = std::make_shared<IntegerDistribution>(std::move(base));
  return d;
}

IntegerDistribution IntegerDistribution::difference(IntegerDistribution lhs,
                                                    IntegerDistribution rhs) {
  if (rhs.kind_ == DistKind::point_mass) return shifted(std::move(lhs), -rhs.c_);
  IntegerDistribution d(DistKind::difference, 0.0, 0.0, 0);
  d.c1_ = std::make_shared<IntegerDistribution>(std::move(lhs));
  d.c2_ = std::make_shared<IntegerDistribution>(std::move(rhs));
  return d;
}

double IntegerDistribution::rate() const {
  if (kind_ != DistKind::poisson) throw UnsupportedKind("rate(): not a poisson distribution");
  return x_;
}

double IntegerDistribution::r() const {
  if (kind_ != DistKind::neg_binomial) throw UnsupportedKind("r(): not a neg_binomial");
  return x_;
}

double IntegerDistribution::p() const {
  switch (kind_) {
    case DistKind::neg_binomial: return y_;
    case DistKind::logarithmic:
    case DistKind::bernoulli:
    case DistKind::binomial: return x_;
    default: throw UnsupportedKind("p(): kind has no success probability");
  }
}

long long IntegerDistribution::trials() const {
  if (kind_ != DistKind::binomial) throw UnsupportedKind("trials(): not a binomial");
  return c_;
}

double IntegerDistribution::scale() const {
  if (kind_ != DistKind::discrete_laplace) throw UnsupportedKind("scale(): not discrete_laplace");
  return x_;
}

long long IntegerDistribution::offset() const {
  if (kind_ != DistKind::point_mass && kind_ != DistKind::shifted)
    throw UnsupportedKind("offset(): kind has no offset");
  return c_;
}

const IntegerDistribution& IntegerDistribution::base() const {
  if (kind_ != DistKind::shifted) throw UnsupportedKind("base(): not a shifted distribution");
  return *c1_;
}

const IntegerDistribution& IntegerDistribution::lhs() const {
  if (kind_ != DistKind::difference) throw UnsupportedKind("lhs(): not a difference");
  return *c1_;
}

const IntegerDistribution& IntegerDistribution::rhs() const {
  if (kind_ != DistKind::difference) throw UnsupportedKind("rhs(): not a difference");
  return *c2_;
}

double IntegerDistribution::mean() const {
  switch (kind_) {
    case DistKind::point_mass: return static_cast<double>(c_);
    case DistKind::bernoulli: return x_;
    case DistKind::binomial: return static_cast<double>(c_) * x_;
    case DistKind::poisson: return x_;
    case DistKind::neg_binomial: return x_ * y_ / (1.0 - y_);
    case DistKind::logarithmic: return -x_ / ((1.0 - x_) * std::log1p(-x_));
    case DistKind::discrete_laplace: return 0.0;
    case DistKind::shifted: return c1_->mean() + static_cast<double>(c_);
    case DistKind::difference: return c1_->mean() - c2_->mean();
  }
  return 0.0;
}

double IntegerDistribution::variance() const {
  switch (kind_) {
    case DistKind::point_mass: return 0.0;
    case DistKind::bernoulli: return x_ * (1.0 - x_);
    case DistKind::binomial: return static_cast<double>(c_) * x_ * (1.0 - x_);
    case DistKind::poisson: return x_;
    case DistKind::neg_binomial: {
      double q = 1.0 - y_;
      return x_ * y_ / (q * q);
    }
    case DistKind::logarithmic: {
      double L = std::log1p(-x_);
      double q = 1.0 - x_;
      return -x_ * (x_ + L) / (q * q * L * L);
    }
    case DistKind::discrete_laplace: {
      double q = std::exp(-x_);
      double d = 1.0 - q;
      return 2.0 * q / (d * d);
    }
    case DistKind::shifted: return c1_->variance();
    case DistKind::difference: return c1_->variance() + c2_->variance();
  }
  return 0.0;
}

double IntegerDistribution::pmf(long long k) const {
  switch (kind_) {
    case DistKind::point_mass:
      return k == c_ ? 1.0 : 0.0;
    case DistKind::bernoulli:
      if (k == 0) return 1.0 - x_;
      if (k == 1) return x_;
      return 0.0;
    case DistKind::binomial: {
      if (k < 0 || k > c_) return 0.0;
      double n = static_cast<double>(c_);
      double kk = static_cast<double>(k);
      return std::exp(std::lgamma(n + 1.0) - std::lgamma(kk + 1.0) - std::lgamma(n - kk + 1.0) +
                      kk * std::log(x_) + (n - kk) * std::log1p(-x_));
    }
    case DistKind::poisson: {
      if (k < 0) return 0.0;
      double kk = static_cast<double>(k);
      return std::exp(kk * std::log(x_) - x_ - std::lgamma(kk + 1.0));
    }
    case DistKind::neg_binomial: {
      if (k < 0) return 0.0;
      double kk = static_cast<double>(k);
      return std::exp(std::lgamma(kk + x_) - std::lgamma(x_) - std::lgamma(kk + 1.0) +
                      x_ * std::log1p(-y_) + kk * std::log(y_));
    }
    case DistKind::logarithmic: {
      if (k < 1) return 0.0;
      double kk = static_cast<double>(k);
      return std::exp(kk * std::log(x_) - std::log(kk)) / -std::log1p(-x_);
    }
    case DistKind::discrete_laplace: {
      double q = std::exp(-x_);
      return (1.0 - q) / (1.0 + q) * std::exp(-x_ * static_cast<double>(std::llabs(k)));
    }
    case DistKind::shifted:
      return c1_->pmf(k - c_);
    case DistKind::difference: {
      PmfWindow rw = c2_->pmf_window(1e-15);
      double s = 0.0;
      for (std::size_t j = 0; j < rw.mass.size(); ++j)
        s += rw.mass[j] * c1_->pmf(k + rw.lo + static_cast<long long>(j));
      return s;
    }
  }
  return 0.0;
}

IntegerDistribution IntegerDistribution::divide(std::uint64_t n) const {
  require(n >= 1, "divide: n must be >= 1");
  if (n == 1) return *this;
  double nn = static_cast<double>(n);
  switch (kind_) {
    case DistKind::poisson:
      return poisson(x_ / nn);
    case DistKind::neg_binomial:
      return neg_binomial(x_ / nn, y_);
    case DistKind::discrete_laplace: {
      double q = std::exp(-x_);
      return difference(neg_binomial(1.0 / nn, q), neg_binomial(1.0 / nn, q));
    }
    case DistKind::point_mass:
      if (c_ % static_cast<long long>(n) != 0)
        throw NotDivisible("divide: point mass atom not divisible by n");
      return point_mass(c_ / static_cast<long long>(n));
    case DistKind::binomial:
      if (c_ % static_cast<long long>(n) != 0)
        throw NotDivisible("divide: binomial trial count not divisible by n");
      return binomial(c_ / static_cast<long long>(n), x_);
    case DistKind::shifted:
      if (c_ % static_cast<long long>(n) != 0)
        throw NotDivisible("divide: shift not divisible by n");
      return shifted(c1_->divide(n), c_ / static_cast<long long>(n));
    case DistKind::difference:
      return difference(c1_->divide(n), c2_->divide(n));
    case DistKind::bernoulli:
    case DistKind::logarithmic:
      throw NotDivisible("divide: kind is not infinitely divisible");
  }
  throw NotDivisible("divide: unhandled kind");
}

DcpForm IntegerDistribution::to_dcp() const {
  switch (kind_) {
    case DistKind::poisson:
      return {x_, std::make_shared<IntegerDistribution>(point_mass(1))};
    case DistKind::neg_binomial:
      return {-x_ * std::log1p(-y_), std::make_shared<IntegerDistribution>(logarithmic(y_))};
    case DistKind::point_mass:
      if (c_ == 0) return {0.0, std::make_shared<IntegerDistribution>(point_mass(1))};
      throw UnsupportedKind("to_dcp: nonzero point mass has no compound-Poisson form");
    default:
      throw UnsupportedKind("to_dcp: kind has no compound-Poisson form");
  }
}

namespace detail {

long long sample_poisson_pre(double exp_neg_lambda, Rng& rng) {
  long long k = -1;
  double prod = 1.0;
  do {
    prod *= rng.uniform();
    ++k;
  } while (prod > exp_neg_lambda);
  return k;
}

long long sample_poisson(double lambda, Rng& rng) {
  if (!(lambda > 0.0)) return 0;
  static const double kExpNeg400 = std::exp(-400.0);
  long long total = 0;
  while (lambda > 400.0) {
    total += sample_poisson_pre(kExpNeg400, rng);
    lambda -= 400.0;
  }
  total += sample_poisson_pre(std::exp(-lambda), rng);
  return total;
}

long long sample_logarithmic(double p, double c1, Rng& rng) {
  double u = rng.uniform();
  double pw = c1 * p;  // c1 * p^k, starting at k = 1
  double cdf = pw;
  long long k = 1;
  while (u > cdf) {
    ++k;
    pw *= p;
    double term = pw * inv_int(k);
    cdf += term;
    // Rounding guard: once terms are this small the cdf has numerically
    // converged, and a pathological u in the last ~1e-15 of mass would
    // otherwise spin. Truncating here biases at most that much mass.
    if (term < 1e-18) break;
  }
  return k;
}

long long sample_neg_binomial(double r, double p, Rng& rng) {
  double log1mp = std::log1p(-p);
  long long atoms = sample_poisson(-r * log1mp, rng);
  double c1 = -1.0 / log1mp;
  long long total = 0;
  for (; atoms > 0; --atoms) total += sample_logarithmic(p, c1, rng);
  return total;
}

}  // namespace detail

long long IntegerDistribution::sample(Rng& rng) const {
  switch (kind_) {
    case DistKind::point_mass:
      return c_;
    case DistKind::bernoulli:
      return rng.uniform() < x_ ? 1 : 0;
    case DistKind::binomial: {
      long long s = 0;
      for (long long i = 0; i < c_; ++i) s += rng.uniform() < x_ ? 1 : 0;
      return s;
    }
    case DistKind::poisson:
      return detail::sample_poisson(x_, rng);
    case DistKind::neg_binomial:
      return detail::sample_neg_binomial(x_, y_, rng);
    case DistKind::logarithmic:
      return detail::sample_logarithmic(x_, -1.0 / std::log1p(-x_), rng);
    case DistKind::discrete_laplace: {
      double q = std::exp(-x_);
      return detail::sample_neg_binomial(1.0, q, rng) - detail::sample_neg_binomial(1.0, q, rng);
    }
    case DistKind::shifted:
      return c1_->sample(rng) + c_;
    case DistKind::difference:
      return c1_->sample(rng) - c2_->sample(rng);
  }
  return 0;
}

PmfWindow IntegerDistribution::pmf_window(double tail_mass) const {
  require(tail_mass > 0.0 && tail_mass < 1.0, "pmf_window: tail_mass must be in (0, 1)");
  double budget = 0.5 * tail_mass;
  switch (kind_) {
    case DistKind::point_mass: {
      PmfWindow w;
      w.lo = c_;
      w.mass = {1.0};
      return w;
    }
    case DistKind::bernoulli: {
      PmfWindow w;
      w.lo = 0;
      w.mass = {1.0 - x_, x_};
      return w;
    }
    case DistKind::poisson: {
      double lam = x_;
      auto log_pmf = [lam](long long k) {
        double kk = static_cast<double>(k);
        return kk * std::log(lam) - lam - std::lgamma(kk + 1.0);
      };
      auto ratio_up = [lam](long long k) { return lam / static_cast<double>(k + 1); };
      auto ratio_dn = [lam](long long k) { return static_cast<double>(k) / lam; };
      long long mode = static_cast<long long>(lam);
      ScanResult up = scan_side(mode, kNoSupportEnd, +1, budget, ratio_up, ratio_up, log_pmf);
      ScanResult dn = scan_side(mode, 0LL, -1, budget, ratio_dn, ratio_dn, log_pmf);
      return fill_window(dn.stop, up.stop, mode, up.tail + dn.tail, ratio_up, ratio_dn, log_pmf);
    }
    case DistKind::neg_binomial: {
      double r = x_, p = y_;
      auto log_pmf = [r, p](long long k) {
        double kk = static_cast<double>(k);
        return std::lgamma(kk + r) - std::lgamma(r) - std::lgamma(kk + 1.0) +
               r * std::log1p(-p) + kk * std::log(p);
      };
      auto ratio_up = [r, p](long long k) {
        return p * (static_cast<double>(k) + r) / static_cast<double>(k + 1);
      };
      auto sup_up = [r, p, ratio_up](long long k) { return std::max(ratio_up(k), p); };
      auto ratio_dn = [r, p](long long k) {
        return static_cast<double>(k) / (p * (static_cast<double>(k) - 1.0 + r));
      };
      long long mode = r > 1.0 ? static_cast<long long>(std::floor((r - 1.0) * p / (1.0 - p))) : 0;
      if (mode < 0) mode = 0;
      ScanResult up = scan_side(mode, kNoSupportEnd, +1, budget, ratio_up, sup_up, log_pmf);
      ScanResult dn =
          mode > 0 ? scan_side(mode, 0LL, -1, budget, ratio_dn, ratio_dn, log_pmf)
                   : ScanResult{0, 0.0};
      return fill_window(dn.stop, up.stop, mode, up.tail + dn.tail, ratio_up, ratio_dn, log_pmf);
    }
    case DistKind::binomial: {
      double p = x_;
      long long n = c_;
      double nn = static_cast<double>(n);
      double odds = p / (1.0 - p);
      auto log_pmf = [nn, p](long long k) {
        double kk = static_cast<double>(k);
        return std::lgamma(nn + 1.0) - std::lgamma(kk + 1.0) - std::lgamma(nn - kk + 1.0) +
               kk * std::log(p) + (nn - kk) * std::log1p(-p);
      };
      auto ratio_up = [nn, odds](long long k) {
        double kk = static_cast<double>(k);
        return (nn - kk) / (kk + 1.0) * odds;
      };
      auto ratio_dn = [nn, odds](long long k) {
        double kk = static_cast<double>(k);
        return kk / ((nn - kk + 1.0) * odds);
      };
      long long mode = std::clamp(static_cast<long long>(std::floor((nn + 1.0) * p)), 0LL, n);
      ScanResult up = scan_side(mode, n, +1, budget, ratio_up, ratio_up, log_pmf);
      ScanResult dn = scan_side(mode, 0LL, -1, budget, ratio_dn, ratio_dn, log_pmf);
      return fill_window(dn.stop, up.stop, mode, up.tail + dn.tail, ratio_up, ratio_dn, log_pmf);
    }
    case DistKind::logarithmic: {
      double p = x_;
      auto log_pmf = [p](long long k) {
        double kk = static_cast<double>(k);
        return kk * std::log(p) - std::log(kk) - std::log(-std::log1p(-p));
      };
      auto ratio_up = [p](long long k) {
        return p * static_cast<double>(k) / static_cast<double>(k + 1);
      };
      auto sup_up = [p](long long) { return p; };
      auto ratio_dn = [](long long) { return 0.0; };
      ScanResult up = scan_side(1LL, kNoSupportEnd, +1, budget, ratio_up, sup_up, log_pmf);
      return fill_window(1, up.stop, 1, up.tail, ratio_up, ratio_dn, log_pmf);
    }
    case DistKind::discrete_laplace: {
      double q = std::exp(-x_);
      // Per-side tail past K is q^{K+1} / (1 + q); solve for the smallest K.
      long long K = static_cast<long long>(
          std::ceil(std::log(budget * (1.0 + q)) / std::log(q))) - 1;
      if (K < 0) K = 0;
      double c = (1.0 - q) / (1.0 + q);
      PmfWindow w;
      w.lo = -K;
      w.mass.assign(static_cast<std::size_t>(2 * K + 1), 0.0);
      for (long long k = -K; k <= K; ++k)
        w.mass[static_cast<std::size_t>(k + K)] = c * std::exp(-x_ * std::llabs(k));
      w.omitted = 2.0 * std::pow(q, static_cast<double>(K + 1)) / (1.0 + q);
      return w;
    }
    case DistKind::shifted: {
      PmfWindow w = c1_->pmf_window(tail_mass);
      w.lo += c_;
      return w;
    }
    case DistKind::difference: {
      PmfWindow a = c1_->pmf_window(0.5 * tail_mass);
      PmfWindow b = c2_->pmf_window(0.5 * tail_mass);
      PmfWindow w;
      w.lo = a.lo - b.hi();
      w.mass.assign(a.mass.size() + b.mass.size() - 1, 0.0);
      for (std::size_t i = 0; i < a.mass.size(); ++i)
        for (std::size_t j = 0; j < b.mass.size(); ++j)
          w.mass[i + (b.mass.size() - 1 - j)] += a.mass[i] * b.mass[j];
      w.omitted = a.omitted + b.omitted;
      return w;
    }
  }
  throw UnsupportedKind("pmf_window: unhandled kind");
}

}  // namespace shuffledp
