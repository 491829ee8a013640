#include "shuffledp/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "shuffledp/kernels.hpp"

namespace shuffledp {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void check_eps_budget(double eps, double tail_budget) {
  require(std::isfinite(eps) && eps >= 0.0, "divergence: eps must be finite and >= 0");
  require(tail_budget > 0.0 && tail_budget < 0.1, "divergence: tail budget must be in (0, 0.1)");
}

// Small local Neumaier accumulator for cross-row totals (the row reductions
// themselves go through the kernels).
struct Kahan {
  double s = 0.0, c = 0.0;
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

// Wraps a raw windowed sum into the [delta, delta + truncation_error]
// bracket: dropped terms can hide at most `omitted` of true mass, and
// zero-filled out-of-window subtrahends can inflate the sum by e^eps times
// that much.
PrivacyReport bracketed(double eps, double raw, double omitted, bool exact = true) {
  double ee = std::exp(eps);
  PrivacyReport r;
  r.epsilon = eps;
  r.delta = std::max(0.0, raw - ee * omitted);
  r.truncation_error = (1.0 + ee) * omitted;
  r.exact = exact;
  return r;
}

bool summable_noise_kind(const IntegerDistribution& d) {
  switch (d.kind()) {
    case DistKind::poisson:
    case DistKind::neg_binomial:
      return true;
    case DistKind::point_mass:
      return d.offset() == 0;
    default:
      return false;
  }
}

double shift_raw(const PmfWindow& w, long long k, double ee) {
  std::size_t n = w.mass.size();
  std::vector<double> q(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    long long src = static_cast<long long>(i) - k;
    if (src >= 0 && src < static_cast<long long>(n)) q[i] = w.mass[static_cast<std::size_t>(src)];
  }
  return kernels::hinge_sum(w.mass.data(), q.data(), 1.0, ee, n);
}

// Closed-form route for geometric D1, D2 with q1 >= e^-eps. Writing the
// direction-1 inner kernel as D2(c) (D1(a+c) - e^eps D1(a+c-1)) and summing
// the geometric series over a and c exactly leaves a single pass over the D3
// window:
//   dir1 = (1 - q1) * sum_y [ D3(y) - (e^eps - q1) q2 G(y-1) ]_+,
//   G(y) = D3(y) + q1 q2 G(y-1).
// Direction 2 vanishes outright: D1(y-1) <= e^eps D1(y) pointwise, so every
// cell of the flipped difference is non-positive.
PrivacyReport correlated_fast(const NoiseTriple& t, double eps, double tail_budget) {
  double ee = std::exp(eps);
  double q1 = t.d1.p();
  double q2 = t.d2.p();
  PmfWindow w3 = t.d3.pmf_window(tail_budget / (1.0 + ee));
  std::size_t n = w3.mass.size();
  std::vector<double> h(n);
  double g = 0.0;  // G one index behind; the trimmed left tail is in the bracket
  double gr = q1 * q2;
  double hc = (ee - q1) * q2;
  for (std::size_t i = 0; i < n; ++i) {
    h[i] = w3.mass[i] - hc * g;
    g = w3.mass[i] + gr * g;
  }
  double dir1 = (1.0 - q1) * kernels::positive_sum(h.data(), n);
  return bracketed(eps, dir1, w3.omitted);
}

}  // namespace

PrivacyReport shift_divergence(const IntegerDistribution& d, long long k, double eps,
                               double tail_budget) {
  check_eps_budget(eps, tail_budget);
  if (k == 0) {
    PrivacyReport r;
    r.epsilon = eps;
    return r;
  }
  double ee = std::exp(eps);
  PmfWindow w = d.pmf_window(tail_budget / (1.0 + ee));
  return bracketed(eps, shift_raw(w, k, ee), w.omitted);
}

PrivacyReport delta_summation_divergence(const IntegerDistribution& d, long long sensitivity,
                                         double eps, double tail_budget) {
  check_eps_budget(eps, tail_budget);
  require(sensitivity >= 1, "delta_summation_divergence: sensitivity must be >= 1");
  double ee = std::exp(eps);
  PmfWindow w = d.pmf_window(tail_budget / (1.0 + ee));
  double lower = 0.0, upper = 0.0;
  for (long long k = 1; k <= sensitivity; ++k) {
    for (long long sk : {k, -k}) {
      PrivacyReport r = bracketed(eps, shift_raw(w, sk, ee), w.omitted);
      lower = std::max(lower, r.delta);
      upper = std::max(upper, r.delta + r.truncation_error);
    }
  }
  PrivacyReport r;
  r.epsilon = eps;
  r.delta = lower;
  r.truncation_error = upper - lower;
  return r;
}

PrivacyReport correlated_divergence(const NoiseTriple& t, double eps, double tail_budget) {
  check_eps_budget(eps, tail_budget);
  require(summable_noise_kind(t.d1) && summable_noise_kind(t.d2) && summable_noise_kind(t.d3),
          "correlated_divergence: components must be non-negative infinitely divisible");
  if (t.d1.kind() == DistKind::neg_binomial && t.d1.r() == 1.0 &&
      t.d2.kind() == DistKind::neg_binomial && t.d2.r() == 1.0 &&
      t.d1.p() >= std::exp(-eps))
    return correlated_fast(t, eps, tail_budget);
  return correlated_divergence_reference(t, eps, tail_budget);
}

PrivacyReport correlated_divergence_reference(const NoiseTriple& t, double eps,
                                              double tail_budget) {
  check_eps_budget(eps, tail_budget);
  require(summable_noise_kind(t.d1) && summable_noise_kind(t.d2) && summable_noise_kind(t.d3),
          "correlated_divergence: components must be non-negative infinitely divisible");
  double ee = std::exp(eps);
  double tail = tail_budget / (3.0 * (1.0 + ee));
  PmfWindow w1 = t.d1.pmf_window(tail);
  PmfWindow w2 = t.d2.pmf_window(tail);
  PmfWindow w3 = t.d3.pmf_window(tail);

  // The visible pair is (a, b) = (U+ - U-, U-). Conditioning on Z2 = c and
  // Z3 = b - c factorizes the joint pmf, so each direction's difference is a
  // convolution over c of a D1-difference kernel with the D3 window.
  std::size_t n2 = w2.mass.size(), n3 = w3.mass.size();
  std::size_t rown = n2 + n3 - 1;
  std::vector<double> row1(rown), row2(rown);
  long long a_lo = w1.lo - w2.hi() - 1;
  long long a_hi = w1.hi() - w2.lo + 1;
  Kahan dir1, dir2;
  for (long long a = a_lo; a <= a_hi; ++a) {
    std::fill(row1.begin(), row1.end(), 0.0);
    std::fill(row2.begin(), row2.end(), 0.0);
    bool pos1 = false, pos2 = false;
    for (std::size_t ci = 0; ci < n2; ++ci) {
      long long c = w2.lo + static_cast<long long>(ci);
      double m2 = w2.mass[ci];
      double p_same = w1.at(a + c);      // D1 at the unshifted sum
      double p_down = w1.at(a + c - 1);  // D1 one lower: the shifted law
      double k1 = m2 * (p_same - ee * p_down);
      double k2 = m2 * (p_down - ee * p_same);
      if (k1 != 0.0) {
        kernels::fma_inplace(row1.data() + ci, w3.mass.data(), k1, n3);
        pos1 |= k1 > 0.0;
      }
      if (k2 != 0.0) {
        kernels::fma_inplace(row2.data() + ci, w3.mass.data(), k2, n3);
        pos2 |= k2 > 0.0;
      }
    }
    if (pos1) dir1.add(kernels::positive_sum(row1.data(), rown));
    if (pos2) dir2.add(kernels::positive_sum(row2.data(), rown));
  }
  double omitted = w1.omitted + w2.omitted + w3.omitted;
  return bracketed(eps, std::max(dir1.value(), dir2.value()), omitted);
}

PrivacyReport poisson_histogram_divergence(double lambda, double eps, double tail_budget) {
  check_eps_budget(eps, tail_budget);
  require(std::isfinite(lambda) && lambda > 0.0, "poisson_histogram_divergence: lambda > 0");
  double ee = std::exp(eps);
  PmfWindow w = IntegerDistribution::poisson(lambda).pmf_window(tail_budget / (2.0 * (1.0 + ee)));
  const double* p = w.mass.data();
  std::size_t n = w.mass.size();
  Kahan dir1, dir2;
  // Moving one user from bucket 1 to bucket 2 turns (Poi, Poi) into
  // (1 + Poi, -1 + Poi); rows below are over the second coordinate.
  for (std::size_t xi = 0; xi <= n; ++xi) {
    double px = xi < n ? p[xi] : 0.0;
    double pxm1 = xi >= 1 ? p[xi - 1] : 0.0;
    if (px > 0.0) {
      // sum_y [ P(x)P(y) - ee P(x-1)P(y+1) ]_+ ; boundary y = hi has no
      // in-window P(y+1), leaving the bare P(x)P(hi) term.
      dir1.add(kernels::hinge_sum(p, p + 1, px, ee * pxm1, n - 1));
      dir1.add(px * p[n - 1]);
    }
    if (pxm1 > 0.0)
      dir2.add(kernels::hinge_sum(p + 1, p, pxm1, ee * px, n - 1));
  }
  return bracketed(eps, std::max(dir1.value(), dir2.value()), 2.0 * w.omitted);
}

PositivePartMean positive_part_mean(std::uint64_t n, double p1, double p2, double d1, double d2,
                                    double d3, double tail_budget) {
  require(n >= 1, "positive_part_mean: n must be >= 1");
  require(p1 >= 0.0 && p2 >= 0.0 && p1 + p2 <= 1.0 + 1e-15,
          "positive_part_mean: probabilities must be a sub-distribution");
  require(tail_budget > 0.0, "positive_part_mean: tail budget must be > 0");
  double p3 = std::max(0.0, 1.0 - p1 - p2);
  double max_pos = std::max({d1, d2, d3, 0.0});
  if (max_pos == 0.0) return {0.0, 0.0};

  double worst = static_cast<double>(n) * max_pos;  // largest possible [sum]_+
  double tail = std::max(tail_budget / (2.0 * worst), 1e-300);
  long long nn = static_cast<long long>(n);
  PmfWindow w1 = IntegerDistribution::binomial(nn, p1).pmf_window(tail);
  double q2 = p2 + p3 > 0.0 ? p2 / (p2 + p3) : 0.0;

  Kahan total;
  double dropped = w1.omitted;
  for (std::size_t i = 0; i < w1.mass.size(); ++i) {
    long long a1 = w1.lo + static_cast<long long>(i);
    long long m = nn - a1;
    PmfWindow w2 = IntegerDistribution::binomial(m, q2).pmf_window(tail);
    double base = static_cast<double>(a1) * d1 + static_cast<double>(m) * d3;
    double slope = d2 - d3;
    Kahan inner;
    for (std::size_t j = 0; j < w2.mass.size(); ++j) {
      double v = base + static_cast<double>(w2.lo + static_cast<long long>(j)) * slope;
      if (v > 0.0) inner.add(w2.mass[j] * v);
    }
    total.add(w1.mass[i] * inner.value());
    dropped += w1.mass[i] * w2.omitted;
  }
  return {total.value(), dropped * worst};
}

PrivacyReport baseline_delta_lower(BaselineProtocol proto, double p_flip, double eps,
                                   std::uint64_t n, std::uint64_t B, double tail_budget) {
  check_eps_budget(eps, tail_budget);
  require(n >= 2, "baseline_delta_lower: need n >= 2");
  double ee = std::exp(eps);
  double nn = static_cast<double>(n);

  switch (proto) {
    case BaselineProtocol::binary_rr: {
      require(p_flip > 0.0 && p_flip <= 0.5, "binary_rr: flip probability must be in (0, 1/2]");
      // Exact transcript law: the multiset of n bits is equivalent to the
      // count of ones, distributed Bin(n-1, p) + Ber(p or 1-p) depending on
      // the distinguished user's bit.
      PmfWindow wb = IntegerDistribution::binomial(static_cast<long long>(n) - 1, p_flip)
                         .pmf_window(tail_budget / (1.0 + ee));
      std::size_t nb = wb.mass.size();
      std::vector<double> law0(nb + 1), law1(nb + 1);
      for (std::size_t i = 0; i <= nb; ++i) {
        double bk = i < nb ? wb.mass[i] : 0.0;
        double bkm1 = i >= 1 ? wb.mass[i - 1] : 0.0;
        law0[i] = (1.0 - p_flip) * bk + p_flip * bkm1;
        law1[i] = p_flip * bk + (1.0 - p_flip) * bkm1;
      }
      double raw = std::max(kernels::hinge_sum(law0.data(), law1.data(), 1.0, ee, nb + 1),
                            kernels::hinge_sum(law1.data(), law0.data(), 1.0, ee, nb + 1));
      return bracketed(eps, raw, wb.omitted);
    }

    case BaselineProtocol::b_rr: {
      require(B >= 2, "b_rr: need at least 2 buckets");
      require(p_flip > 0.0 && p_flip <= 1.0, "b_rr: flip probability must be in (0, 1]");
      double Bd = static_cast<double>(B);
      double keep = 1.0 - p_flip + p_flip / Bd;  // P(report own bucket)
      double hit = p_flip / Bd;                  // P(report a specific other bucket)
      // Likelihood-ratio atoms of one user's report for neighbors that swap
      // the distinguished user between two buckets.
      double d1 = (Bd / p_flip) * (keep - ee * hit);
      double d2 = (Bd / p_flip) * (hit - ee * keep);
      double d3 = (p_flip * (Bd - 2.0) / (Bd - 2.0 * p_flip)) * (1.0 - ee);
      PositivePartMean m = positive_part_mean(n, hit, hit, d1, d2, d3, tail_budget * nn);
      PrivacyReport r;
      r.epsilon = eps;
      r.delta = m.value / nn;
      r.truncation_error = m.truncation_error / nn;
      r.exact = false;
      return r;
    }

    case BaselineProtocol::rappor: {
      require(p_flip > 0.0 && p_flip <= 0.5, "rappor: flip probability must be in (0, 1/2]");
      double q = (1.0 - p_flip) / p_flip;
      double pa = p_flip * p_flip * (1.0 - p_flip);  // P(both touched bits flip one way)
      double d1 = q * q - ee;
      double d2 = 1.0 - ee * q * q;
      double rest = 1.0 - std::pow(1.0 - p_flip, 3) - pa;
      double d3 = (1.0 - ee) * rest / (1.0 - 2.0 * pa);
      PositivePartMean m = positive_part_mean(n, pa, pa, d1, d2, d3, tail_budget * nn);
      PrivacyReport r;
      r.epsilon = eps;
      r.delta = m.value / nn;
      r.truncation_error = m.truncation_error / nn;
      r.exact = false;
      return r;
    }

    case BaselineProtocol::frag_rappor: {
      require(p_flip > 0.0 && p_flip <= 0.5, "frag_rappor: flip probability must be in (0, 1/2]");
      // Project the transcript onto the one-counts of the two buckets the
      // neighboring inputs touch. The count at the distinguished user's own
      // bucket is Ber(1-p) + Bin(n-1, p); the other is Bin(n, p).
      double t = tail_budget / (2.0 * (1.0 + ee));
      PmfWindow wn = IntegerDistribution::binomial(static_cast<long long>(n), p_flip).pmf_window(t);
      PmfWindow wm =
          IntegerDistribution::binomial(static_cast<long long>(n) - 1, p_flip).pmf_window(t);
      long long lo = std::min(wn.lo, wm.lo);
      long long hi = std::max(wn.hi(), wm.hi() + 1);
      std::size_t len = static_cast<std::size_t>(hi - lo + 1);
      std::vector<double> bn(len, 0.0), dd(len, 0.0);
      for (long long k = lo; k <= hi; ++k) {
        std::size_t i = static_cast<std::size_t>(k - lo);
        bn[i] = wn.at(k);
        dd[i] = (1.0 - p_flip) * wm.at(k - 1) + p_flip * wm.at(k);
      }
      // The two divergence directions swap (i, j), so one scan covers both.
      Kahan v;
      for (std::size_t i = 0; i < len; ++i) {
        if (dd[i] == 0.0 && bn[i] == 0.0) continue;
        v.add(kernels::hinge_sum(bn.data(), dd.data(), dd[i], ee * bn[i], len));
      }
      PrivacyReport r = bracketed(eps, v.value(), wn.omitted + wm.omitted);
      r.exact = false;
      return r;
    }
  }
  throw std::invalid_argument("baseline_delta_lower: unknown protocol");
}

}  // namespace shuffledp
