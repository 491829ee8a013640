#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "shuffledp/calibrate.hpp"
#include "shuffledp/shuffler.hpp"

namespace shuffledp {

// Mapping of raw non-negative values onto bucket indices: [0, range) is
// split into B-1 equal-width buckets and, when overflow_bucket is set,
// values at or above range land in bucket B (otherwise they are an error).
struct BucketizationSpec {
  long long range = 100000;
  bool overflow_bucket = true;
};

// One sweep description. JSON config files mirror these field names
// verbatim; unknown keys are rejected so typos cannot silently change an
// experiment.
struct ExperimentConfig {
  std::string task;                    // "binary" or "histogram"; from B when empty
  std::vector<std::string> mechanisms;
  std::vector<double> eps_grid;
  std::vector<double> delta_grid;
  std::uint64_t n = 0;
  std::uint64_t B = 1;
  std::uint64_t trials = 100;
  std::uint64_t seed = 1;
  double gamma = 0.25;                 // near-central split for histogram calibration
  double factor = 1.2;                 // RMSE target multiple for binary correlated
  long long sensitivity = 1;           // summation range for the binary additive task
  std::string dataset = "synth:uniform";  // file path, or "synth:<spec>"
  std::optional<BucketizationSpec> bucketization;  // raw-value files only
  std::string output;                  // default table path for the CLI
  std::string format = "csv";          // "csv" or "json"
};

ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Reads one non-negative integer per line. With a bucketization spec the
// values are raw and mapped through it; without one they must already be
// bucket indices in [1, B] (or summation values in [0, sensitivity] for the
// binary task, B <= 1). Parse and range errors carry the line number.
std::vector<int> load_dataset(const std::string& path, std::uint64_t B,
                              const std::optional<BucketizationSpec>& bucketization,
                              long long sensitivity = 1);

// Deterministic synthetic inputs. Histogram specs: "uniform", "zipf:<s>",
// "point:<j>", "ones". Binary specs: "uniform", "bernoulli:<q>", "ones",
// "zeros".
std::vector<int> synth_dataset(const std::string& spec, std::uint64_t n, std::uint64_t B,
                               std::uint64_t seed);

// One emitted table row. Metric fields are zero when `error` is non-empty
// (the grid point's calibration or simulation failed; the sweep continues).
struct MetricsRow {
  std::string mechanism;
  double eps = 0.0;
  double delta = 0.0;
  std::uint64_t n = 0;
  std::uint64_t B = 1;
  double rmse = 0.0;
  double mean_linf = 0.0;
  double mean_extra_messages = 0.0;
  double bits_per_user = 0.0;
  std::string calibration;  // semicolon-separated key=value pairs
  bool optimistic = false;
  std::string error;
};

// Calibrates one mechanism for the given task shape. histogram selects the
// B-coordinate task (ignored by mechanisms that fix their own task).
MechanismParams calibrate_for(const std::string& mechanism, double eps, double delta, double gamma,
                              double factor, long long sensitivity, std::uint64_t n,
                              std::uint64_t B, bool histogram);

// Runs the full grid of config, one row per (eps, delta, mechanism) in grid
// order, appending a central reference row per (eps, delta) unless the
// mechanism list already contains it. scale divides n (noise laws and RMSE
// are unchanged by design; per-user overhead scales up accordingly).
std::vector<MetricsRow> run_sweep(const ExperimentConfig& config, std::uint64_t scale = 1);

// CSV with one fixed header row; emitting, parsing, and re-emitting is
// byte-identical (doubles are printed shortest-round-trip).
std::string rows_to_csv(const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> rows_from_csv(const std::string& text);

// JSON array of row objects, same keys as the CSV columns.
std::string rows_to_json(const std::vector<MetricsRow>& rows);

}  // namespace shuffledp
