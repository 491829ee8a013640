#include <doctest.h>

#include <cmath>
#include <vector>

#include "shuffledp/divergence.hpp"
#include "shuffledp/dist.hpp"

using namespace shuffledp;

namespace {

double lchoose(double n, double k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

double binom_pmf(long long k, long long n, double p) {
  if (k < 0 || k > n) return 0.0;
  if (p == 0.0) return k == 0 ? 1.0 : 0.0;
  if (p == 1.0) return k == n ? 1.0 : 0.0;
  return std::exp(lchoose(static_cast<double>(n), static_cast<double>(k)) +
                  static_cast<double>(k) * std::log(p) +
                  static_cast<double>(n - k) * std::log1p(-p));
}

double poisson_pmf(long long k, double lambda) {
  if (k < 0) return 0.0;
  return std::exp(-lambda + static_cast<double>(k) * std::log(lambda) -
                  std::lgamma(static_cast<double>(k) + 1.0));
}

// Hockey-stick divergence between two finite laws on the same index set.
double hinge(const std::vector<double>& p, const std::vector<double>& q, double eps) {
  double ee = std::exp(eps), s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::max(0.0, p[i] - ee * q[i]);
  return s;
}

}  // namespace

TEST_CASE("divergence: identical laws and pure-DP boundaries give zero") {
  auto d = IntegerDistribution::neg_binomial(2.0, 0.6);
  PrivacyReport r = shift_divergence(d, 0, 0.5);
  CHECK(r.delta == 0.0);
  CHECK(r.truncation_error == 0.0);
  // Discrete Laplace at scale s has likelihood ratio exactly e^s under a unit
  // shift, so its divergence at eps = s vanishes.
  PrivacyReport pure =
      delta_summation_divergence(IntegerDistribution::discrete_laplace(1.0), 1, 1.0);
  CHECK(pure.delta <= 1e-12);
}

TEST_CASE("divergence: discrete-Laplace shift matches the closed form") {
  // For eps < s the positive part lives on the non-positive axis and sums to
  // (1 - e^{eps-s}) / (1 + e^{-s}).
  double s = 1.0, eps = 0.5;
  double want = (1.0 - std::exp(eps - s)) / (1.0 + std::exp(-s));
  PrivacyReport r = shift_divergence(IntegerDistribution::discrete_laplace(s), 1, eps);
  CHECK(std::fabs(r.delta - want) <= 3e-12);
  CHECK(want <= r.delta + r.truncation_error + 1e-15);
  CHECK(r.truncation_error <= 1e-10);
}

TEST_CASE("divergence: summation divergence is monotone in the sensitivity") {
  auto d = IntegerDistribution::poisson(40.0);
  double last = -1.0;
  for (long long sens : {1, 2, 4, 8}) {
    PrivacyReport r = delta_summation_divergence(d, sens, 0.8);
    CHECK(r.delta >= last);
    last = r.delta;
  }
}

TEST_CASE("divergence: correlated fast path equals the exhaustive reference") {
  std::vector<NoiseTriple> triples;
  triples.push_back({IntegerDistribution::geometric(std::exp(-1.0)),
                     IntegerDistribution::geometric(std::exp(-1.0)),
                     IntegerDistribution::neg_binomial(2.0, 0.7)});
  triples.push_back({IntegerDistribution::geometric(0.5), IntegerDistribution::geometric(0.6),
                     IntegerDistribution::neg_binomial(5.0, 0.4)});
  triples.push_back({IntegerDistribution::geometric(0.45), IntegerDistribution::geometric(0.45),
                     IntegerDistribution::poisson(3.0)});
  for (const NoiseTriple& t : triples) {
    for (double eps : {0.4, 1.0}) {
      PrivacyReport fast = correlated_divergence(t, eps);
      PrivacyReport ref = correlated_divergence_reference(t, eps);
      CHECK(std::fabs(fast.delta - ref.delta) <=
            1e-11 + fast.truncation_error + ref.truncation_error);
    }
  }
}

TEST_CASE("divergence: correlated value pinned against an independent enumeration") {
  // Frozen by a from-scratch high-precision joint-law enumeration:
  // D1 = D2 = NB(1, e^-1), D3 = NB(2, 0.7), eps = 1.
  NoiseTriple t{IntegerDistribution::geometric(std::exp(-1.0)),
                IntegerDistribution::geometric(std::exp(-1.0)),
                IntegerDistribution::neg_binomial(2.0, 0.7)};
  PrivacyReport fast = correlated_divergence(t, 1.0, 1e-14);
  CHECK(std::fabs(fast.delta - 9.54506172765489e-02) <= 1e-12);
  PrivacyReport ref = correlated_divergence_reference(t, 1.0, 1e-14);
  CHECK(std::fabs(ref.delta - 9.54506172765489e-02) <= 1e-12);
}

TEST_CASE("divergence: histogram pair law matches a direct two-dimensional sum") {
  double lambda = 3.0, eps = 0.7, ee = std::exp(eps);
  // Both directions of d_eps(Poi x Poi || (1+Poi) x (-1+Poi)), enumerated
  // far past any relevant mass.
  const long long K = 80;
  double dir1 = 0.0, dir2 = 0.0;
  for (long long x = 0; x <= K; ++x) {
    for (long long y = 0; y <= K; ++y) {
      double p = poisson_pmf(x, lambda) * poisson_pmf(y, lambda);
      double q = poisson_pmf(x - 1, lambda) * poisson_pmf(y + 1, lambda);
      dir1 += std::max(0.0, p - ee * q);
      dir2 += std::max(0.0, q - ee * p);
    }
  }
  double want = std::max(dir1, dir2);
  PrivacyReport r = poisson_histogram_divergence(lambda, eps);
  CHECK(r.delta <= want + 1e-12);
  CHECK(want <= r.delta + r.truncation_error + 1e-12);
}

TEST_CASE("divergence: trinomial positive-part mean matches exhaustive enumeration") {
  const long long n = 30;
  double p1 = 0.2, p2 = 0.3, p3 = 0.5;
  double d1 = 0.9, d2 = -1.4, d3 = 0.05;
  double want = 0.0;
  for (long long a1 = 0; a1 <= n; ++a1) {
    for (long long a2 = 0; a2 + a1 <= n; ++a2) {
      long long a3 = n - a1 - a2;
      double logw = std::lgamma(n + 1.0) - std::lgamma(a1 + 1.0) - std::lgamma(a2 + 1.0) -
                    std::lgamma(a3 + 1.0) + a1 * std::log(p1) + a2 * std::log(p2) +
                    a3 * std::log(p3);
      double v = a1 * d1 + a2 * d2 + a3 * d3;
      if (v > 0.0) want += std::exp(logw) * v;
    }
  }
  PositivePartMean m = positive_part_mean(n, p1, p2, d1, d2, d3);
  CHECK(m.value <= want + 1e-10);
  CHECK(want <= m.value + m.truncation_error + 1e-10);
}

TEST_CASE("divergence: trinomial pruning agrees with the full sum") {
  const long long n = 120;
  double p1 = 0.01, p2 = 0.01;
  double d1 = 2.0, d2 = -3.0, d3 = -0.001;
  PositivePartMean full = positive_part_mean(n, p1, p2, d1, d2, d3, 1e-300);
  PositivePartMean pruned = positive_part_mean(n, p1, p2, d1, d2, d3, 1e-9);
  CHECK(pruned.truncation_error <= 1e-6);
  CHECK(std::fabs(full.value - pruned.value) <=
        1e-4 * full.value + pruned.truncation_error + full.truncation_error);
}

TEST_CASE("divergence: binary randomized response transcript law is exact") {
  const std::uint64_t n = 60;
  double p = 0.15, eps = 0.6;
  // One-count under input 1 vs input 0 for the distinguished user; the other
  // users all hold 0 and contribute Bin(n-1, p) ones.
  std::vector<double> law1(n + 1, 0.0), law0(n + 1, 0.0);
  for (std::uint64_t k = 0; k <= n; ++k) {
    long long kk = static_cast<long long>(k);
    double others = binom_pmf(kk, static_cast<long long>(n) - 1, p);
    double others_m1 = binom_pmf(kk - 1, static_cast<long long>(n) - 1, p);
    law1[k] = (1.0 - p) * others_m1 + p * others;
    law0[k] = p * others_m1 + (1.0 - p) * others;
  }
  double want = std::max(hinge(law1, law0, eps), hinge(law0, law1, eps));
  PrivacyReport r = baseline_delta_lower(BaselineProtocol::binary_rr, p, eps, n, 2);
  CHECK(r.exact);
  CHECK(std::fabs(r.delta - want) <= r.truncation_error + 1e-11);
}

TEST_CASE("divergence: category-response bound is exact when the projection is lossless") {
  // At B = 3 the projected statistic (count_1, count_2, rest) is the whole
  // anonymized transcript, so the bound must equal a from-scratch enumeration
  // of the full category-count law (all other users hold the third value).
  const long long n = 25;
  const double p = 0.4, eps = 0.3, ee = std::exp(eps);
  double hit = p / 3.0, keep = 1.0 - p + p / 3.0;
  auto transcript = [&](double r1, double r2, double r3) {
    // Law over (c1, c2): n-1 iid reports with per-category probabilities
    // (hit, hit, 1-2hit) plus one distinguished report with law (r1, r2, r3).
    std::vector<std::vector<double>> law(n + 1, std::vector<double>(n + 1, 0.0));
    for (long long c1 = 0; c1 <= n - 1; ++c1) {
      for (long long c2 = 0; c1 + c2 <= n - 1; ++c2) {
        long long c3 = n - 1 - c1 - c2;
        double logw = std::lgamma(static_cast<double>(n)) - std::lgamma(c1 + 1.0) -
                      std::lgamma(c2 + 1.0) - std::lgamma(c3 + 1.0) + c1 * std::log(hit) +
                      c2 * std::log(hit) + c3 * std::log(1.0 - 2.0 * hit);
        double w = std::exp(logw);
        law[c1 + 1][c2] += w * r1;
        law[c1][c2 + 1] += w * r2;
        law[c1][c2] += w * r3;
      }
    }
    return law;
  };
  auto law_a = transcript(keep, hit, hit);  // distinguished user holds value 1
  auto law_b = transcript(hit, keep, hit);  // distinguished user holds value 2
  double dir1 = 0.0, dir2 = 0.0;
  for (long long c1 = 0; c1 <= n; ++c1) {
    for (long long c2 = 0; c2 <= n; ++c2) {
      dir1 += std::max(0.0, law_a[c1][c2] - ee * law_b[c1][c2]);
      dir2 += std::max(0.0, law_b[c1][c2] - ee * law_a[c1][c2]);
    }
  }
  double want = std::max(dir1, dir2);
  PrivacyReport r = baseline_delta_lower(BaselineProtocol::b_rr, p, eps, n, 3);
  CHECK(!r.exact);
  CHECK(std::fabs(r.delta - want) <= r.truncation_error + 1e-9);
}

TEST_CASE("divergence: bit-vector bound respects the full transcript law") {
  // Full transcript at B = 3: the anonymized multiset of 3-bit reports, i.e.
  // the count vector over the 8 bit patterns. The projected bound can only
  // lose divergence mass against it (data processing).
  const int n = 12;
  const double p = 0.25, eps = 0.4, ee = std::exp(eps);
  // Per-pattern probabilities; pattern index b = b1 + 2*b2 + 4*b3. A user
  // holding bucket j sets bit j with probability 1-p and the rest with
  // probability p; all other users hold bucket 3.
  auto pattern_law = [&](int bucket) {
    std::vector<double> w(8);
    for (int b = 0; b < 8; ++b) {
      double prob = 1.0;
      for (int j = 0; j < 3; ++j) {
        bool set = (b >> j) & 1;
        double p_set = (j == bucket) ? 1.0 - p : p;
        prob *= set ? p_set : 1.0 - p_set;
      }
      w[b] = prob;
    }
    return w;
  };
  std::vector<double> t = pattern_law(2), r1 = pattern_law(0), r2 = pattern_law(1);
  // Enumerate count vectors (c0..c7) summing to n; the transcript pmf under
  // a distinguished report law r is sum_j r[j] * Mult(n-1; c - e_j, t).
  std::vector<double> lt(8);
  for (int b = 0; b < 8; ++b) lt[b] = std::log(t[b]);
  double dir1 = 0.0, dir2 = 0.0;
  std::vector<int> c(8, 0);
  auto mult_m1 = [&](int drop) {
    if (c[drop] == 0) return 0.0;
    double lw = std::lgamma(static_cast<double>(n));  // log (n-1)!
    for (int b = 0; b < 8; ++b) {
      int cb = c[b] - (b == drop ? 1 : 0);
      lw += cb * lt[b] - std::lgamma(cb + 1.0);
    }
    return std::exp(lw);
  };
  auto rec = [&](auto&& self, int idx, int left) -> void {
    if (idx == 7) {
      c[7] = left;
      double pa = 0.0, pb = 0.0;
      for (int j = 0; j < 8; ++j) {
        double m = mult_m1(j);
        pa += r1[j] * m;
        pb += r2[j] * m;
      }
      dir1 += std::max(0.0, pa - ee * pb);
      dir2 += std::max(0.0, pb - ee * pa);
      return;
    }
    for (int v = 0; v <= left; ++v) {
      c[idx] = v;
      self(self, idx + 1, left - v);
    }
  };
  rec(rec, 0, n);
  double exact = std::max(dir1, dir2);
  PrivacyReport rap = baseline_delta_lower(BaselineProtocol::rappor, p, eps, n, 3);
  CHECK(!rap.exact);
  CHECK(rap.delta > 0.0);
  CHECK(rap.delta <= exact + rap.truncation_error + 1e-9);
}

TEST_CASE("divergence: indexed-bit bound equals its two-count product law") {
  // The fragmented protocol's transcript is the per-bucket one-count vector;
  // buckets untouched by the neighboring inputs have identical independent
  // laws and cancel, so the exact divergence is that of the product law
  // (Ber(1-p) + Bin(n-1, p)) x Bin(n, p) against its swap.
  const std::uint64_t n = 120;
  const double p = 0.12, eps = 0.5, ee = std::exp(eps);
  long long nn = static_cast<long long>(n);
  std::vector<double> own(n + 1), other(n + 1);
  for (long long k = 0; k <= nn; ++k) {
    own[k] = (1.0 - p) * binom_pmf(k - 1, nn - 1, p) + p * binom_pmf(k, nn - 1, p);
    other[k] = binom_pmf(k, nn, p);
  }
  double exact = 0.0;
  for (long long i = 0; i <= nn; ++i)
    for (long long j = 0; j <= nn; ++j)
      exact += std::max(0.0, own[i] * other[j] - ee * other[i] * own[j]);

  PrivacyReport frag = baseline_delta_lower(BaselineProtocol::frag_rappor, p, eps, n, 8);
  CHECK(!frag.exact);
  CHECK(std::fabs(frag.delta - exact) <= frag.truncation_error + 1e-9);
}

TEST_CASE("divergence: protocol bounds decay as the flip probability grows") {
  for (BaselineProtocol proto : {BaselineProtocol::binary_rr, BaselineProtocol::b_rr,
                                 BaselineProtocol::rappor, BaselineProtocol::frag_rappor}) {
    double last = 2.0;
    for (double p : {0.05, 0.15, 0.3, 0.49}) {
      PrivacyReport r = baseline_delta_lower(proto, p, 0.5, 50, 4);
      CHECK(r.delta >= 0.0);
      CHECK(r.delta <= last + 1e-12);
      last = r.delta;
    }
  }
}

TEST_CASE("divergence: tighter tail budgets tighten the bracket") {
  auto d = IntegerDistribution::poisson(30.0);
  PrivacyReport loose = delta_summation_divergence(d, 1, 1.0, 1e-8);
  PrivacyReport tight = delta_summation_divergence(d, 1, 1.0, 1e-14);
  CHECK(tight.truncation_error <= loose.truncation_error);
  // Both brackets contain the true value, so they must overlap.
  CHECK(loose.delta <= tight.delta + tight.truncation_error + 1e-18);
  CHECK(tight.delta <= loose.delta + loose.truncation_error + 1e-18);
}

TEST_CASE("divergence: argument validation") {
  auto d = IntegerDistribution::poisson(3.0);
  CHECK_THROWS_AS(delta_summation_divergence(d, 0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(delta_summation_divergence(d, 1, -0.5), std::invalid_argument);
  CHECK_THROWS_AS(baseline_delta_lower(BaselineProtocol::binary_rr, 0.7, 1.0, 10, 2),
                  std::invalid_argument);
  CHECK_THROWS_AS(baseline_delta_lower(BaselineProtocol::b_rr, 0.5, 1.0, 1, 4),
                  std::invalid_argument);
  NoiseTriple bad{IntegerDistribution::discrete_laplace(1.0), IntegerDistribution::geometric(0.5),
                  IntegerDistribution::poisson(1.0)};
  CHECK_THROWS_AS(correlated_divergence(bad, 1.0), std::invalid_argument);
}
