#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "shuffledp/calibrate.hpp"
#include "shuffledp/divergence.hpp"
#include "shuffledp/harness.hpp"
#include "shuffledp/shuffler.hpp"

namespace {

using namespace shuffledp;
using ordered_json = nlohmann::ordered_json;

void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

struct CalibrateArgs {
  std::string mechanism;
  double eps = 0.0, delta = 0.0, gamma = 0.25, factor = 1.2;
  long long sensitivity = 1;
  std::uint64_t n = 10000, buckets = 1;
  std::string format = "json";
};

void run_calibrate(const CalibrateArgs& a) {
  bool hist = a.buckets >= 2;
  MechanismParams params = calibrate_for(a.mechanism, a.eps, a.delta, a.gamma, a.factor,
                                         a.sensitivity, a.n, a.buckets, hist);
  double extra = params.expected_extra_messages(a.n);
  std::optional<double> rmse = params.analytic_rmse();
  if (a.format == "json") {
    ordered_json o;
    o["mechanism"] = a.mechanism;
    o["eps"] = a.eps;
    o["delta"] = a.delta;
    o["n"] = a.n;
    o["B"] = a.buckets;
    o["calibration"] = params.calibration_summary();
    o["optimistic"] = params.optimistic;
    if (rmse) o["analytic_rmse"] = *rmse;
    o["expected_extra_messages"] = extra;
    std::cout << o.dump(2) << "\n";
  } else {
    std::cout << "mechanism,eps,delta,n,B,calibration,optimistic,analytic_rmse,"
                 "expected_extra_messages\n";
    std::cout << a.mechanism << ',' << a.eps << ',' << a.delta << ',' << a.n << ','
              << a.buckets << ',' << params.calibration_summary() << ','
              << (params.optimistic ? "true" : "false") << ',';
    if (rmse) std::cout << *rmse;
    std::cout << ',' << extra << "\n";
  }
}

struct CheckArgs {
  std::string mechanism;
  double eps = 0.0;
  double lambda = -1.0, r = -1.0, p = -1.0, p_flip = -1.0, eps1 = -1.0;
  long long sensitivity = 1;
  std::uint64_t n = 0, buckets = 1;
};

void run_check(const CheckArgs& a) {
  Mechanism m = mechanism_from_name(a.mechanism);
  PrivacyReport rep{};
  switch (m) {
    case Mechanism::poisson:
      if (a.lambda < 0) throw std::invalid_argument("check poisson: --lambda required");
      rep = a.buckets >= 2
                ? poisson_histogram_divergence(a.lambda, a.eps)
                : delta_summation_divergence(IntegerDistribution::poisson(a.lambda),
                                             a.sensitivity, a.eps);
      break;
    case Mechanism::nb:
      if (a.r < 0 || a.p < 0) throw std::invalid_argument("check nb: --r and --p required");
      rep = delta_summation_divergence(IntegerDistribution::neg_binomial(a.r, a.p),
                                       a.sensitivity, a.eps);
      break;
    case Mechanism::correlated: {
      if (a.r < 0 || a.p < 0 || a.eps1 < 0)
        throw std::invalid_argument("check correlated: --r, --p and --eps1 required");
      double q = std::exp(-a.eps1);
      NoiseTriple t{IntegerDistribution::geometric(q), IntegerDistribution::geometric(q),
                    IntegerDistribution::neg_binomial(a.r, a.p)};
      rep = correlated_divergence(t, a.eps);
      break;
    }
    case Mechanism::binary_rr:
    case Mechanism::b_rr:
    case Mechanism::rappor:
    case Mechanism::frag_rappor: {
      if (a.p_flip < 0 || a.n == 0)
        throw std::invalid_argument("check baseline: --p-flip and --n required");
      BaselineProtocol proto = m == Mechanism::binary_rr ? BaselineProtocol::binary_rr
                               : m == Mechanism::b_rr    ? BaselineProtocol::b_rr
                               : m == Mechanism::rappor  ? BaselineProtocol::rappor
                                                         : BaselineProtocol::frag_rappor;
      std::uint64_t B = m == Mechanism::binary_rr ? 2 : a.buckets;
      rep = baseline_delta_lower(proto, a.p_flip, a.eps, a.n, B);
      break;
    }
    case Mechanism::central_dlap:
      throw std::invalid_argument("check: central-dlap has no transcript to check");
  }
  ordered_json o;
  o["eps"] = rep.epsilon;
  o["delta"] = rep.delta;
  o["truncation_error"] = rep.truncation_error;
  o["exact"] = rep.exact;
  std::cout << o.dump(2) << "\n";
}

struct SimulateArgs {
  std::string mechanism, input, synth, out, format = "csv";
  double eps = 0.0, delta = 0.0, gamma = 0.25, factor = 1.2;
  long long sensitivity = 1;
  std::uint64_t n = 0, buckets = 1, trials = 100, seed = 1;
};

void run_simulate(const SimulateArgs& a) {
  if (a.input.empty() == a.synth.empty())
    throw std::invalid_argument("simulate: exactly one of --input or --synth");
  bool hist = a.buckets >= 2;
  std::uint64_t data_B = hist ? a.buckets : 1;

  std::vector<int> inputs;
  if (!a.synth.empty()) {
    inputs = synth_dataset(a.synth, a.n, data_B, derive_seed(a.seed, 1, 0));
  } else {
    inputs = load_dataset(a.input, data_B, std::nullopt, a.sensitivity);
    if (inputs.size() < a.n)
      throw ParseError(a.input + ": dataset smaller than n");
    inputs.resize(a.n);
  }

  MechanismParams params = calibrate_for(a.mechanism, a.eps, a.delta, a.gamma, a.factor,
                                         a.sensitivity, a.n, a.buckets, hist);
  ExperimentAggregate agg = run_experiment(inputs, params, a.trials, derive_seed(a.seed, 2, 0));

  MetricsRow row;
  row.mechanism = a.mechanism;
  row.eps = a.eps;
  row.delta = a.delta;
  row.n = a.n;
  row.B = data_B;
  row.rmse = agg.rmse;
  row.mean_linf = agg.mean_linf;
  row.mean_extra_messages = agg.mean_extra_messages;
  row.bits_per_user = agg.mean_bits / static_cast<double>(a.n);
  row.calibration = params.calibration_summary();
  row.optimistic = params.optimistic;
  std::vector<MetricsRow> rows{row};
  write_output(a.out, a.format == "json" ? rows_to_json(rows) : rows_to_csv(rows));
}

struct SweepArgs {
  std::string config, out, format;
  std::uint64_t scale = 1;
};

void run_sweep_cmd(const SweepArgs& a) {
  ExperimentConfig config = load_config(a.config);
  std::vector<MetricsRow> rows = run_sweep(config, a.scale);
  std::string format = a.format.empty() ? config.format : a.format;
  std::string out = a.out.empty() ? config.output : a.out;
  write_output(out, format == "json" ? rows_to_json(rows) : rows_to_csv(rows));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shuffled-model differential privacy: calibration, divergence checks, simulation"};
  app.require_subcommand(1);

  CalibrateArgs cal;
  CLI::App* c = app.add_subcommand("calibrate", "Calibrate a mechanism's noise for (eps, delta)");
  c->add_option("--mechanism", cal.mechanism, "Mechanism name")->required();
  c->add_option("--eps", cal.eps, "Privacy parameter epsilon")->required();
  c->add_option("--delta", cal.delta, "Privacy parameter delta")->required();
  c->add_option("--gamma", cal.gamma, "Near-central budget split (histogram correlated)");
  c->add_option("--factor", cal.factor, "RMSE multiple vs central (binary correlated)");
  c->add_option("--sensitivity", cal.sensitivity, "Summation sensitivity");
  c->add_option("--n", cal.n, "User count (baselines; overhead reporting)");
  c->add_option("--buckets", cal.buckets, "Bucket count B (>= 2 selects the histogram task)");
  c->add_option("--format", cal.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  c->callback([&cal] { run_calibrate(cal); });

  CheckArgs chk;
  CLI::App* k = app.add_subcommand("check", "Report the privacy divergence of given noise");
  k->add_option("--mechanism", chk.mechanism, "Mechanism name")->required();
  k->add_option("--eps", chk.eps, "Privacy parameter epsilon")->required();
  k->add_option("--lambda", chk.lambda, "Poisson rate");
  k->add_option("--r", chk.r, "Negative binomial r");
  k->add_option("--p", chk.p, "Negative binomial p");
  k->add_option("--p-flip", chk.p_flip, "Baseline flip probability");
  k->add_option("--eps1", chk.eps1, "Geometric scale of the correlated components");
  k->add_option("--sensitivity", chk.sensitivity, "Summation sensitivity");
  k->add_option("--n", chk.n, "User count (baselines)");
  k->add_option("--buckets", chk.buckets, "Bucket count B");
  k->callback([&chk] { run_check(chk); });

  SimulateArgs sim;
  CLI::App* s = app.add_subcommand("simulate", "Run shuffle-pipeline trials for one mechanism");
  s->add_option("--mechanism", sim.mechanism, "Mechanism name")->required();
  s->add_option("--eps", sim.eps, "Privacy parameter epsilon")->required();
  s->add_option("--delta", sim.delta, "Privacy parameter delta")->required();
  s->add_option("--input", sim.input, "Dataset file, one integer per line");
  s->add_option("--synth", sim.synth, "Synthetic dataset spec");
  s->add_option("--n", sim.n, "User count")->required();
  s->add_option("--buckets", sim.buckets, "Bucket count B (>= 2 selects the histogram task)");
  s->add_option("--trials", sim.trials, "Number of independent trials");
  s->add_option("--seed", sim.seed, "Master seed");
  s->add_option("--gamma", sim.gamma, "Near-central budget split (histogram correlated)");
  s->add_option("--factor", sim.factor, "RMSE multiple vs central (binary correlated)");
  s->add_option("--sensitivity", sim.sensitivity, "Summation sensitivity");
  s->add_option("--out", sim.out, "Output path (default stdout)");
  s->add_option("--format", sim.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  s->callback([&sim] { run_simulate(sim); });

  SweepArgs sw;
  CLI::App* w = app.add_subcommand("sweep", "Run the experiment grid from a JSON config");
  w->add_option("--config", sw.config, "Config JSON path")->required();
  w->add_option("--out", sw.out, "Output path (default: config output, else stdout)");
  w->add_option("--format", sw.format, "csv or json (default: config format)")
      ->check(CLI::IsMember({"csv", "json", ""}));
  w->add_option("--scale", sw.scale, "Divide the configured n by this factor");
  w->callback([&sw] { run_sweep_cmd(sw); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
