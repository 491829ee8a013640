#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "shuffledp/calibrate.hpp"
#include "shuffledp/divergence.hpp"
#include "shuffledp/errors.hpp"

using namespace shuffledp;

namespace {

double dlap_var(double s) {
  double q = std::exp(-s);
  return 2.0 * q / ((1.0 - q) * (1.0 - q));
}

bool fits_sum(double lambda, double eps, double delta, long long sens) {
  PrivacyReport r = delta_summation_divergence(IntegerDistribution::poisson(lambda), sens, eps);
  return r.delta + r.truncation_error <= delta;
}

bool fits_hist(double lambda, double eps, double delta) {
  PrivacyReport r = poisson_histogram_divergence(lambda, eps);
  return r.delta + r.truncation_error <= delta;
}

}  // namespace

TEST_CASE("calibrate: closed-form noise levels match their formulas") {
  // Independently recomputed values of
  // 16 log(10/delta) / (1-e^{-eps/Delta})^2 + 2 Delta / (1-e^{-eps/Delta}).
  CHECK(poisson_lambda_closed_form(1.0, 1e-6, 1) ==
        doctest::Approx(648.571264352309).epsilon(1e-12));
  CHECK(poisson_lambda_closed_form(0.1, 1e-6, 1) ==
        doctest::Approx(28498.47844304258).epsilon(1e-12));
  CHECK(poisson_lambda_closed_form(1.0, 2e-9, 1) ==
        doctest::Approx(897.4191176097904).epsilon(1e-12));
  CHECK(poisson_lambda_closed_form(0.5, 1e-3, 3) ==
        doctest::Approx(6291.897126661582).epsilon(1e-12));
  // The closed form is sufficient, never tight: it must pass its own check.
  CHECK(fits_sum(poisson_lambda_closed_form(1.0, 1e-6, 1), 1.0, 1e-6, 1));

  auto [r, p] = nb_params_closed_form(0.5, 1e-6, 1);
  CHECK(r == doctest::Approx(44.44653167389282).epsilon(1e-12));
  CHECK(p == doctest::Approx(0.9048374180359595).epsilon(1e-12));
  auto [r5, p5] = nb_params_closed_form(0.5, 1e-6, 5);
  CHECK(r5 == doctest::Approx(r).epsilon(1e-12));
  CHECK(p5 == doctest::Approx(std::exp(-0.02)).epsilon(1e-12));
  {
    PrivacyReport rep =
        delta_summation_divergence(IntegerDistribution::neg_binomial(r, p), 1, 0.5);
    CHECK(rep.delta + rep.truncation_error <= 1e-6);
  }
  // This parameterization is only valid for eps and delta inside (0, 1).
  CHECK_THROWS_AS(nb_params_closed_form(1.0, 1e-6, 1), std::invalid_argument);
  CHECK_THROWS_AS(nb_params_closed_form(0.5, 0.0, 1), std::invalid_argument);
}

TEST_CASE("calibrate: searched Poisson level matches an independent bisection") {
  struct Point {
    double eps, delta, want;
  } points[] = {
      {1.0, 1e-6, 34.06790515780449},
      {0.1, 1e-6, 1408.6644248962402},
      {1.0, 2e-9, 54.984978675842285},
  };
  for (const Point& pt : points) {
    double lam = calibrate_poisson(pt.eps, pt.delta);
    CHECK(lam == doctest::Approx(pt.want).epsilon(5e-4));
    CHECK(fits_sum(lam, pt.eps, pt.delta, 1));
    CHECK(!fits_sum(0.999 * lam, pt.eps, pt.delta, 1));
  }
  // The searched value beats the closed form by an order of magnitude.
  CHECK(calibrate_poisson(1.0, 1e-6) < 0.1 * poisson_lambda_closed_form(1.0, 1e-6, 1));
}

TEST_CASE("calibrate: histogram Poisson level matches an independent bisection") {
  struct Point {
    double eps, delta, want;
  } points[] = {
      {1.0, 1e-6, 42.65453054012712},
      {1.0, 2e-9, 69.04316689585971},
  };
  for (const Point& pt : points) {
    double lam = calibrate_poisson_histogram(pt.eps, pt.delta);
    CHECK(lam == doctest::Approx(pt.want).epsilon(5e-4));
    CHECK(fits_hist(lam, pt.eps, pt.delta));
    CHECK(!fits_hist(0.999 * lam, pt.eps, pt.delta));
  }
  // Two coordinates moving together is strictly harder than one:
  // the histogram level must exceed the summation level.
  CHECK(calibrate_poisson_histogram(1.0, 1e-6) > calibrate_poisson(1.0, 1e-6));
}

TEST_CASE("calibrate: variance-matched noise scale solves its defining equation") {
  for (auto [eps, factor] : {std::pair{1.0, 1.2}, {0.1, 1.2}, {2.0, 1.5}}) {
    double e1 = rmse_matched_eps1(eps, factor);
    CHECK(e1 < eps);
    CHECK(dlap_var(e1) == doctest::Approx(factor * factor * dlap_var(eps)).epsilon(1e-9));
  }
  CHECK(rmse_matched_eps1(1.0, 1.2) == doctest::Approx(0.8432824779917125).epsilon(1e-12));
  CHECK(rmse_matched_eps1(0.1, 1.2) == doctest::Approx(0.08334393594241521).epsilon(1e-12));
  CHECK(rmse_matched_eps1(1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_THROWS_AS(rmse_matched_eps1(1.0, 0.9), std::invalid_argument);
}

TEST_CASE("calibrate: correlated search returns a certified minimal-cost triple") {
  MechanismParams m = calibrate_correlated(1.0, 1e-6, 10000);
  CHECK(m.mechanism == Mechanism::correlated);
  CHECK(!m.optimistic);
  CHECK(m.eps1 == doctest::Approx(0.8432824779917125).epsilon(1e-10));
  REQUIRE(m.triple.has_value());
  CHECK(m.triple->d1.p() == doctest::Approx(std::exp(-m.eps1)).epsilon(1e-12));
  CHECK(m.triple->d2.p() == doctest::Approx(std::exp(-m.eps1)).epsilon(1e-12));
  CHECK(m.triple->d3.r() == doctest::Approx(m.nb_r).epsilon(1e-12));
  CHECK(m.triple->d3.p() == doctest::Approx(m.nb_p).epsilon(1e-12));
  // The returned triple certifies the target.
  PrivacyReport r = correlated_divergence(*m.triple, 1.0);
  CHECK(r.delta + r.truncation_error <= 1e-6);
  // Total message cost sits at the independently found optimum (the cost
  // surface is flat near it, so allow basin-to-basin wiggle).
  CHECK(m.expected_extra_messages(10000) == doctest::Approx(0.039935).epsilon(0.015));
  // Analytic error is the two visible wires' noise, factor times the central
  // reference by construction.
  REQUIRE(m.analytic_rmse().has_value());
  CHECK(*m.analytic_rmse() == doctest::Approx(1.2 * std::sqrt(dlap_var(1.0))).epsilon(1e-6));
}

TEST_CASE("calibrate: analytic split recipe satisfies its defining identities") {
  double eps = 1.0, delta = 1e-6, gamma = 0.25;
  MechanismParams m = near_central_params(eps, delta, gamma);
  CHECK(m.eps1 == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(m.eps2 == doctest::Approx(0.25).epsilon(1e-15));
  double want_d2 = delta / (std::exp(0.75) + 2.0 * std::exp(1.5));
  CHECK(m.delta2 == doctest::Approx(9.024962738678627e-08).epsilon(1e-12));
  CHECK(m.delta2 == doctest::Approx(want_d2).epsilon(1e-12));
  CHECK(m.delta3 == doctest::Approx(m.delta2).epsilon(1e-15));
  CHECK(m.tail_bound == 22);
  CHECK(static_cast<double>(m.tail_bound) >= std::log(1.0 / m.delta2) / m.eps1);
  CHECK(static_cast<double>(m.tail_bound) < std::log(1.0 / m.delta2) / m.eps1 + 1.0);
  REQUIRE(m.triple.has_value());
  CHECK(m.triple->d1.p() == doctest::Approx(std::exp(-0.75)).epsilon(1e-15));
  CHECK(m.nb_p == doctest::Approx(0.997729853416463).epsilon(1e-12));
  CHECK(m.nb_r == doctest::Approx(51.66205910526064).epsilon(1e-12));

  // eps2 saturates at 1/2 for large budgets.
  CHECK(near_central_params(4.0, 1e-6, 0.25).eps2 == doctest::Approx(0.5).epsilon(1e-15));

  CHECK_THROWS_AS(near_central_params(1.0, 1e-6, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(near_central_params(1.0, 1e-6, 0.6), std::invalid_argument);

  MechanismParams h = histogram_params(eps, delta, gamma, 8);
  MechanismParams half = near_central_params(eps / 2.0, delta / 2.0, gamma);
  CHECK(h.B == 8);
  CHECK(h.eps1 == doctest::Approx(half.eps1).epsilon(1e-15));
  CHECK(h.nb_r == doctest::Approx(half.nb_r).epsilon(1e-15));
  CHECK(h.nb_p == doctest::Approx(half.nb_p).epsilon(1e-15));
  CHECK_THROWS_AS(histogram_params(eps, delta, gamma, 1), std::invalid_argument);
}

TEST_CASE("calibrate: baseline flip probabilities are minimal and certified") {
  MechanismParams rr = calibrate_baseline(Mechanism::binary_rr, 1.0, 1e-6, 10000, 2);
  CHECK(rr.p_flip == doctest::Approx(0.003371562002456281).epsilon(5e-4));
  CHECK(!rr.optimistic);
  {
    PrivacyReport at = baseline_delta_lower(BaselineProtocol::binary_rr, rr.p_flip, 1.0, 10000, 2);
    CHECK(at.delta + at.truncation_error <= 1e-6);
    PrivacyReport below =
        baseline_delta_lower(BaselineProtocol::binary_rr, 0.999 * rr.p_flip, 1.0, 10000, 2);
    CHECK(below.delta + below.truncation_error > 1e-6);
  }
  MechanismParams rr2 = calibrate_baseline(Mechanism::binary_rr, 0.1, 1e-6, 10000, 2);
  CHECK(rr2.p_flip == doctest::Approx(0.10010158928551785).epsilon(5e-4));

  for (Mechanism mech : {Mechanism::b_rr, Mechanism::rappor, Mechanism::frag_rappor}) {
    MechanismParams m = calibrate_baseline(mech, 1.0, 1e-6, 2000, 8);
    CHECK(m.optimistic);
    CHECK(m.p_flip > 0.0);
    CHECK(m.B == 8);
  }

  CHECK_THROWS_AS(calibrate_baseline(Mechanism::poisson, 1.0, 1e-6, 100, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(calibrate_baseline(Mechanism::binary_rr, 1.0, 1e-6, 1, 2),
                  std::invalid_argument);
}

TEST_CASE("calibrate: privacy arguments are validated") {
  CHECK_THROWS_AS(calibrate_poisson(0.0, 1e-6), std::invalid_argument);
  CHECK_THROWS_AS(calibrate_poisson(-1.0, 1e-6), std::invalid_argument);
  CHECK_THROWS_AS(calibrate_poisson(9.0, 1e-6), std::invalid_argument);
  CHECK_THROWS_AS(calibrate_poisson(1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(calibrate_poisson(1.0, 1.0), std::invalid_argument);
}

TEST_CASE("calibrate: mechanism names round-trip") {
  for (Mechanism m : {Mechanism::poisson, Mechanism::nb, Mechanism::correlated,
                      Mechanism::binary_rr, Mechanism::b_rr, Mechanism::rappor,
                      Mechanism::frag_rappor, Mechanism::central_dlap}) {
    CHECK(mechanism_from_name(mechanism_name(m)) == m);
  }
  CHECK(mechanism_name(Mechanism::frag_rappor) == "frag-rappor");
  CHECK_THROWS_AS(mechanism_from_name("bogus"), std::invalid_argument);
}

TEST_CASE("calibrate: summaries expose the fitted parameters") {
  MechanismParams pois;
  pois.mechanism = Mechanism::poisson;
  pois.lambda = 34.5;
  CHECK(pois.calibration_summary().find("lambda=34.5") == 0);
  CHECK(*pois.analytic_rmse() == doctest::Approx(std::sqrt(34.5)).epsilon(1e-15));
  pois.B = 4;
  CHECK(pois.expected_extra_messages(1000) == doctest::Approx(4.0 * 34.5 / 1000.0));

  MechanismParams recipe = near_central_params(1.0, 1e-6, 0.25);
  std::string s = recipe.calibration_summary();
  CHECK(s.find("eps1=") != std::string::npos);
  CHECK(s.find("Delta=22") != std::string::npos);

  MechanismParams frag;
  frag.mechanism = Mechanism::frag_rappor;
  frag.p_flip = 0.1;
  frag.B = 10;
  CHECK(frag.expected_extra_messages(12345) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(!frag.analytic_rmse().has_value());

  MechanismParams central;
  central.mechanism = Mechanism::central_dlap;
  central.eps1 = 1.0;
  CHECK(central.calibration_summary().find("dlap_scale=1") == 0);
  CHECK(*central.analytic_rmse() == doctest::Approx(std::sqrt(dlap_var(1.0))).epsilon(1e-12));
  CHECK(central.expected_extra_messages(10) == 0.0);
}

TEST_CASE("calibrate: cached and cold calibrations agree bit for bit") {
  clear_calibration_cache();
  double cold = calibrate_poisson(1.0, 1e-6);
  double warm = calibrate_poisson(1.0, 1e-6);
  CHECK(cold == warm);
  clear_calibration_cache();
  CHECK(calibrate_poisson(1.0, 1e-6) == cold);

  MechanismParams a = calibrate_baseline(Mechanism::binary_rr, 1.0, 1e-6, 10000, 2);
  clear_calibration_cache();
  MechanismParams b = calibrate_baseline(Mechanism::binary_rr, 1.0, 1e-6, 10000, 2);
  CHECK(a.p_flip == b.p_flip);
}
