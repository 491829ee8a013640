#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "shuffledp/divergence.hpp"

namespace shuffledp {

enum class Mechanism {
  poisson,      // divided Poisson noise on one wire
  nb,           // divided negative binomial noise on one wire
  correlated,   // two wires with shared padding noise
  binary_rr,    // randomized response on bits
  b_rr,         // randomized response over B buckets
  rappor,       // per-bucket bit flips, whole bit-vector sent
  frag_rappor,  // per-bucket bit flips, set bits sent individually
  central_dlap, // central-model reference: exact sum + discrete Laplace
};

std::string mechanism_name(Mechanism m);
Mechanism mechanism_from_name(const std::string& name);

// Everything a simulator or report needs to run one calibrated mechanism.
// Fields are populated per mechanism; `calibration_summary()` renders the
// populated ones compactly for CSV output.
struct MechanismParams {
  Mechanism mechanism = Mechanism::poisson;
  double epsilon = 0.0;
  double delta = 0.0;
  double gamma = 0.0;
  long long sensitivity = 1;
  std::uint64_t n = 0;
  std::uint64_t B = 1;

  double lambda = 0.0;                 // poisson (per-bucket, undivided)
  double nb_r = 0.0, nb_p = 0.0;       // nb
  std::optional<NoiseTriple> triple;   // correlated (undivided components)
  double p_flip = 0.0;                 // baselines
  bool optimistic = false;             // calibrated against a lower bound only

  // Bookkeeping for the analytic correlated recipes.
  double eps1 = 0.0, eps2 = 0.0;
  double delta2 = 0.0, delta3 = 0.0;
  long long tail_bound = 0;  // magnitude cap Delta used by the recipe

  std::string calibration_summary() const;

  // Expected noise messages per user beyond the mandatory signal, from the
  // noise means (per-bucket means times B for histogram tasks).
  double expected_extra_messages(std::uint64_t n_users) const;

  // Analytic per-coordinate RMSE of the debiased estimate where one exists
  // (noise-only; sampling error of baselines is handled by the simulator).
  std::optional<double> analytic_rmse() const;
};

// lambda = 16 log(10/delta) / (1 - e^{-eps/Delta})^2 + 2 Delta / (1 - e^{-eps/Delta});
// sufficient (never tight) for Delta-summation at (eps, delta).
double poisson_lambda_closed_form(double eps, double delta, long long sensitivity);

// (r, p) with p = e^{-0.2 eps / Delta}, r = 3 (1 + log(1/delta)); sufficient
// for Delta-summation at (eps, delta) when eps, delta are in (0, 1).
std::pair<double, double> nb_params_closed_form(double eps, double delta, long long sensitivity);

// Smallest lambda passing delta_summation_divergence, by bisection to 1e-4
// relative, starting from the closed form as a feasible upper end. Throws
// BracketFailure if nothing at or below 10x the closed form works.
double calibrate_poisson(double eps, double delta, long long sensitivity = 1);

// Smallest lambda passing the two-coordinate Poisson histogram condition.
double calibrate_poisson_histogram(double eps, double delta);

// The eps1 whose discrete Laplace variance is factor^2 times that of
// DLap(eps): the noise level at which the correlated mechanism's RMSE lands
// exactly factor times the central reference. Closed form via the quadratic
// in e^{-eps1}.
double rmse_matched_eps1(double eps, double factor = 1.2);

// Fixes D1 = D2 = Geometric(e^{-eps1}) with eps1 = rmse_matched_eps1(eps,
// factor), then searches D3 = NB(r, p): golden section on log r with an
// inner bisection for the smallest feasible p at each r, minimizing expected
// messages E[D1] + E[D2] + 2 E[D3].
MechanismParams calibrate_correlated(double eps, double delta, std::uint64_t n,
                                     double factor = 1.2);

// Analytic (eps, delta) split for summation: eps1 = (1-gamma) eps,
// eps2 = min(1/2, gamma eps), delta2 = delta3 = delta / (e^{eps1} + 2 e^{2 eps1}),
// Delta = ceil(log(1/delta2) / eps1), D1 = D2 = Geometric(e^{-eps1}),
// D3 = NB from the closed form at (eps2, delta2, Delta). The per-coordinate
// error is exactly DLap(eps1) plus a Pr <= delta3 tail event.
MechanismParams near_central_params(double eps, double delta, double gamma);

// Histogram variant: the recipe at (eps/2, delta/2), since one user moving
// buckets changes two coordinates by one each. Per-bucket error follows
// DLap((1-gamma) eps / 2).
MechanismParams histogram_params(double eps, double delta, double gamma, std::uint64_t B);

// Smallest flip probability whose transcript divergence bound passes
// (eps, delta) at population size n. Protocols other than binary_rr are
// calibrated against a lower bound and come back flagged optimistic.
MechanismParams calibrate_baseline(Mechanism mechanism, double eps, double delta,
                                   std::uint64_t n, std::uint64_t B);

// Calibrations cache their results (keyed by mechanism and privacy
// parameters; population size enters only for baselines, whose transcript
// law depends on it). clear wipes it, e.g. to time cold runs.
void clear_calibration_cache();

}  // namespace shuffledp
