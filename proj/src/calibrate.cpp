#include "shuffledp/calibrate.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>

#include "shuffledp/errors.hpp"

namespace shuffledp {

namespace {

constexpr double kSearchRelTol = 1e-4;   // all parameter searches stop here
constexpr double kEpsCap = 8.0;          // shuffled-regime guard
constexpr double kMeanCap = 2e5;         // largest D3 mean the search considers

void check_privacy_args(double eps, double delta) {
  if (!(std::isfinite(eps) && eps > 0.0))
    throw std::invalid_argument("calibrate: eps must be finite and > 0");
  if (eps > kEpsCap)
    throw std::invalid_argument(
        "calibrate: eps > 8 rejected; the evaluation windows degenerate and local "
        "randomizers stop needing amplification there");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("calibrate: delta must be in (0, 1)");
}

double dlap_variance(double s) {
  double q = std::exp(-s);
  double d = 1.0 - q;
  return 2.0 * q / (d * d);
}

// Feasibility always tests the certified upper end of the divergence
// bracket, so window truncation can only make us more conservative.
bool fits(const PrivacyReport& r, double delta) {
  return r.delta + r.truncation_error <= delta;
}

std::mutex g_cache_mu;
std::map<std::string, double> g_scalar_cache;
std::map<std::string, MechanismParams> g_params_cache;

std::string key(const char* tag, double a, double b, double c, double d = 0.0,
                std::uint64_t u = 0, std::uint64_t v = 0) {
  char buf[192];
  std::snprintf(buf, sizeof buf, "%s|%.17g|%.17g|%.17g|%.17g|%llu|%llu", tag, a, b, c, d,
                static_cast<unsigned long long>(u), static_cast<unsigned long long>(v));
  return buf;
}

template <class F>
double cached_scalar(const std::string& k, F&& compute) {
  {
    std::lock_guard<std::mutex> lk(g_cache_mu);
    auto it = g_scalar_cache.find(k);
    if (it != g_scalar_cache.end()) return it->second;
  }
  double v = compute();
  std::lock_guard<std::mutex> lk(g_cache_mu);
  g_scalar_cache.emplace(k, v);
  return v;
}

template <class F>
MechanismParams cached_params(const std::string& k, F&& compute) {
  {
    std::lock_guard<std::mutex> lk(g_cache_mu);
    auto it = g_params_cache.find(k);
    if (it != g_params_cache.end()) return it->second;
  }
  MechanismParams v = compute();
  std::lock_guard<std::mutex> lk(g_cache_mu);
  g_params_cache.emplace(k, v);
  return v;
}

// Bisect the smallest feasible value in (lo, hi], where hi is known feasible
// and lo known infeasible, to kSearchRelTol relative. Returning the feasible
// end means a further 0.1% shrink is certified infeasible.
template <class Pred>
double bisect_min_feasible(double lo, double hi, Pred feasible) {
  while (hi - lo > kSearchRelTol * hi) {
    double mid = 0.5 * (lo + hi);
    if (feasible(mid))
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

}  // namespace

std::string mechanism_name(Mechanism m) {
  switch (m) {
    case Mechanism::poisson: return "poisson";
    case Mechanism::nb: return "nb";
    case Mechanism::correlated: return "correlated";
    case Mechanism::binary_rr: return "binary-rr";
    case Mechanism::b_rr: return "b-rr";
    case Mechanism::rappor: return "rappor";
    case Mechanism::frag_rappor: return "frag-rappor";
    case Mechanism::central_dlap: return "central-dlap";
  }
  return "?";
}

Mechanism mechanism_from_name(const std::string& name) {
  if (name == "poisson") return Mechanism::poisson;
  if (name == "nb") return Mechanism::nb;
  if (name == "correlated") return Mechanism::correlated;
  if (name == "binary-rr") return Mechanism::binary_rr;
  if (name == "b-rr") return Mechanism::b_rr;
  if (name == "rappor") return Mechanism::rappor;
  if (name == "frag-rappor") return Mechanism::frag_rappor;
  if (name == "central-dlap") return Mechanism::central_dlap;
  throw std::invalid_argument("unknown mechanism: " + name);
}

std::string MechanismParams::calibration_summary() const {
  char buf[256];
  switch (mechanism) {
    case Mechanism::poisson:
      std::snprintf(buf, sizeof buf, "lambda=%.10g", lambda);
      break;
    case Mechanism::nb:
      std::snprintf(buf, sizeof buf, "r=%.10g;p=%.10g", nb_r, nb_p);
      break;
    case Mechanism::correlated:
      if (tail_bound > 0)
        std::snprintf(buf, sizeof buf, "eps1=%.10g;eps2=%.10g;Delta=%lld;r=%.10g;p=%.10g", eps1,
                      eps2, tail_bound, nb_r, nb_p);
      else
        std::snprintf(buf, sizeof buf, "eps1=%.10g;r=%.10g;p=%.10g", eps1, nb_r, nb_p);
      break;
    case Mechanism::binary_rr:
    case Mechanism::b_rr:
    case Mechanism::rappor:
    case Mechanism::frag_rappor:
      std::snprintf(buf, sizeof buf, "p_flip=%.10g", p_flip);
      break;
    case Mechanism::central_dlap:
      std::snprintf(buf, sizeof buf, "dlap_scale=%.10g", eps1);
      break;
  }
  return buf;
}

double MechanismParams::expected_extra_messages(std::uint64_t n_users) const {
  double nn = static_cast<double>(n_users);
  double Bd = static_cast<double>(B);
  switch (mechanism) {
    case Mechanism::poisson:
      return Bd * lambda / nn;
    case Mechanism::nb:
      return Bd * IntegerDistribution::neg_binomial(nb_r, nb_p).mean() / nn;
    case Mechanism::correlated: {
      if (!triple) return 0.0;
      double m = triple->d1.mean() + triple->d2.mean() + 2.0 * triple->d3.mean();
      return Bd * m / nn;
    }
    case Mechanism::frag_rappor:
      return p_flip * (Bd - 2.0);
    case Mechanism::binary_rr:
    case Mechanism::b_rr:
    case Mechanism::rappor:
    case Mechanism::central_dlap:
      return 0.0;
  }
  return 0.0;
}

std::optional<double> MechanismParams::analytic_rmse() const {
  switch (mechanism) {
    case Mechanism::poisson:
      return std::sqrt(lambda);
    case Mechanism::nb:
      return std::sqrt(IntegerDistribution::neg_binomial(nb_r, nb_p).variance());
    case Mechanism::correlated:
      if (!triple) return std::nullopt;
      return std::sqrt(triple->d1.variance() + triple->d2.variance());
    case Mechanism::central_dlap:
      return std::sqrt(dlap_variance(eps1));
    default:
      return std::nullopt;
  }
}

double poisson_lambda_closed_form(double eps, double delta, long long sensitivity) {
  check_privacy_args(eps, delta);
  if (sensitivity < 1) throw std::invalid_argument("calibrate: sensitivity must be >= 1");
  double d = 1.0 - std::exp(-eps / static_cast<double>(sensitivity));
  return 16.0 * std::log(10.0 / delta) / (d * d) + 2.0 * static_cast<double>(sensitivity) / d;
}

std::pair<double, double> nb_params_closed_form(double eps, double delta, long long sensitivity) {
  check_privacy_args(eps, delta);
  if (sensitivity < 1) throw std::invalid_argument("calibrate: sensitivity must be >= 1");
  if (eps >= 1.0)
    throw std::invalid_argument("nb_params_closed_form: stated for eps in (0, 1) only");
  double p = std::exp(-0.2 * eps / static_cast<double>(sensitivity));
  double r = 3.0 * (1.0 + std::log(1.0 / delta));
  return {r, p};
}

double calibrate_poisson(double eps, double delta, long long sensitivity) {
  check_privacy_args(eps, delta);
  return cached_scalar(key("poisson", eps, delta, static_cast<double>(sensitivity)), [&] {
    double budget = 1e-4 * delta;
    auto feasible = [&](double lam) {
      return fits(delta_summation_divergence(IntegerDistribution::poisson(lam), sensitivity, eps,
                                             budget),
                  delta);
    };
    double closed = poisson_lambda_closed_form(eps, delta, sensitivity);
    double hi = closed;
    while (!feasible(hi)) {
      hi *= 2.0;
      if (hi > 10.0 * closed)
        throw BracketFailure("calibrate_poisson: no feasible lambda within 10x the closed form");
    }
    return bisect_min_feasible(0.0, hi, feasible);
  });
}

double calibrate_poisson_histogram(double eps, double delta) {
  check_privacy_args(eps, delta);
  return cached_scalar(key("poisson-hist", eps, delta, 0.0), [&] {
    double budget = 1e-4 * delta;
    auto feasible = [&](double lam) {
      return fits(poisson_histogram_divergence(lam, eps, budget), delta);
    };
    double closed = poisson_lambda_closed_form(0.5 * eps, 0.5 * delta, 1);
    double hi = closed;
    while (!feasible(hi)) {
      hi *= 2.0;
      if (hi > 10.0 * closed)
        throw BracketFailure(
            "calibrate_poisson_histogram: no feasible lambda within 10x the closed form");
    }
    return bisect_min_feasible(0.0, hi, feasible);
  });
}

double rmse_matched_eps1(double eps, double factor) {
  check_privacy_args(eps, 0.5);
  if (!(factor >= 1.0))
    throw std::invalid_argument("rmse_matched_eps1: factor must be >= 1 (cannot beat central)");
  double v = factor * factor * dlap_variance(eps);
  // Var(DLap(s)) = 2q/(1-q)^2 with q = e^{-s}; solving v(1-q)^2 = 2q for the
  // root below 1.
  double q = (v + 1.0 - std::sqrt(2.0 * v + 1.0)) / v;
  return -std::log(q);
}

MechanismParams calibrate_correlated(double eps, double delta, std::uint64_t n, double factor) {
  check_privacy_args(eps, delta);
  if (n < 1) throw std::invalid_argument("calibrate_correlated: n must be >= 1");
  return cached_params(key("correlated", eps, delta, factor), [&] {
    double eps1 = rmse_matched_eps1(eps, factor);
    double q = std::exp(-eps1);
    IntegerDistribution geo = IntegerDistribution::geometric(q);
    double budget = 1e-4 * delta;

    auto feasible = [&](double r, double p) {
      NoiseTriple t{geo, geo, IntegerDistribution::neg_binomial(r, p)};
      return fits(correlated_divergence(t, eps, budget), delta);
    };
    // Smallest feasible p at this r, or nothing if even a D3 mean of
    // kMeanCap cannot absorb the tails.
    auto p_for = [&](double r) -> std::optional<double> {
      double hi = kMeanCap / (r + kMeanCap);
      if (!feasible(r, hi)) return std::nullopt;
      return bisect_min_feasible(0.0, hi, [&](double p) { return feasible(r, p); });
    };

    double best_cost = std::numeric_limits<double>::infinity();
    double best_r = 0.0, best_p = 0.0;
    auto cost_at = [&](double x) {
      double r = std::exp(x);
      auto p = p_for(r);
      if (!p) return std::numeric_limits<double>::infinity();
      double c = 2.0 * q / (1.0 - q) +
                 2.0 * IntegerDistribution::neg_binomial(r, *p).mean();
      if (c < best_cost) {
        best_cost = c;
        best_r = r;
        best_p = *p;
      }
      return c;
    };

    // Golden section over log r; expected-messages cost is unimodal in r
    // (too few failure modes to smooth vs too many messages).
    const double grat = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = 0.0, b = std::log(1e4);
    double x1 = b - grat * (b - a), x2 = a + grat * (b - a);
    double f1 = cost_at(x1), f2 = cost_at(x2);
    for (int it = 0; it < 40; ++it) {
      if (f1 <= f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - grat * (b - a);
        f1 = cost_at(x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + grat * (b - a);
        f2 = cost_at(x2);
      }
    }
    if (!std::isfinite(best_cost))
      throw Infeasible("calibrate_correlated: no feasible (r, p) in the searched range");

    MechanismParams m;
    m.mechanism = Mechanism::correlated;
    m.epsilon = eps;
    m.delta = delta;
    m.n = n;
    m.eps1 = eps1;
    m.nb_r = best_r;
    m.nb_p = best_p;
    m.triple = NoiseTriple{geo, geo, IntegerDistribution::neg_binomial(best_r, best_p)};
    return m;
  });
}

MechanismParams near_central_params(double eps, double delta, double gamma) {
  check_privacy_args(eps, delta);
  if (!(gamma > 0.0 && gamma <= 0.5))
    throw std::invalid_argument("near_central_params: gamma must be in (0, 1/2]");
  double eps1 = (1.0 - gamma) * eps;
  double eps2 = std::min(0.5, gamma * eps);
  double denom = std::exp(eps1) + 2.0 * std::exp(2.0 * eps1);
  double delta2 = delta / denom;
  long long Delta = static_cast<long long>(std::ceil(std::log(1.0 / delta2) / eps1));
  auto [r, p] = nb_params_closed_form(eps2, delta2, Delta);

  MechanismParams m;
  m.mechanism = Mechanism::correlated;
  m.epsilon = eps;
  m.delta = delta;
  m.gamma = gamma;
  m.eps1 = eps1;
  m.eps2 = eps2;
  m.delta2 = delta2;
  m.delta3 = delta2;
  m.tail_bound = Delta;
  m.nb_r = r;
  m.nb_p = p;
  double q = std::exp(-eps1);
  m.triple = NoiseTriple{IntegerDistribution::geometric(q), IntegerDistribution::geometric(q),
                         IntegerDistribution::neg_binomial(r, p)};
  return m;
}

MechanismParams histogram_params(double eps, double delta, double gamma, std::uint64_t B) {
  if (B < 2) throw std::invalid_argument("histogram_params: need B >= 2");
  // One user switching buckets moves two coordinates by one each, so the
  // one-coordinate recipe runs at half the budget.
  MechanismParams m = near_central_params(0.5 * eps, 0.5 * delta, gamma);
  m.epsilon = eps;
  m.delta = delta;
  m.B = B;
  return m;
}

MechanismParams calibrate_baseline(Mechanism mechanism, double eps, double delta, std::uint64_t n,
                                   std::uint64_t B) {
  check_privacy_args(eps, delta);
  if (n < 2) throw std::invalid_argument("calibrate_baseline: n must be >= 2");
  BaselineProtocol proto;
  double hi;
  switch (mechanism) {
    case Mechanism::binary_rr: proto = BaselineProtocol::binary_rr; hi = 0.5; B = 2; break;
    case Mechanism::b_rr: proto = BaselineProtocol::b_rr; hi = 1.0; break;
    case Mechanism::rappor: proto = BaselineProtocol::rappor; hi = 0.5; break;
    case Mechanism::frag_rappor: proto = BaselineProtocol::frag_rappor; hi = 0.5; break;
    default:
      throw std::invalid_argument("calibrate_baseline: not a baseline mechanism");
  }
  if (mechanism != Mechanism::binary_rr && B < 2)
    throw std::invalid_argument("calibrate_baseline: need B >= 2");

  return cached_params(key("baseline", eps, delta, 0.0, 0.0, n,
                           static_cast<std::uint64_t>(mechanism) * 1000 + B),
                       [&] {
    double budget = 1e-4 * delta;
    auto feasible = [&](double p) {
      return fits(baseline_delta_lower(proto, p, eps, n, B, budget), delta);
    };
    if (!feasible(hi))
      throw Infeasible("calibrate_baseline: maximal flip probability still exceeds delta");
    double p = bisect_min_feasible(0.0, hi, feasible);
    MechanismParams m;
    m.mechanism = mechanism;
    m.epsilon = eps;
    m.delta = delta;
    m.n = n;
    m.B = B;
    m.p_flip = p;
    m.optimistic = mechanism != Mechanism::binary_rr;
    return m;
  });
}

void clear_calibration_cache() {
  std::lock_guard<std::mutex> lk(g_cache_mu);
  g_scalar_cache.clear();
  g_params_cache.clear();
}

}  // namespace shuffledp
