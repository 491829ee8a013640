#pragma once

#include <cstdint>
#include <vector>

#include "shuffledp/calibrate.hpp"
#include "shuffledp/protocols.hpp"
#include "shuffledp/rng.hpp"

namespace shuffledp {

// Simulation knobs. The analyzer only ever sees per-type message counts, on
// which a uniform permutation acts trivially, so the simulator keeps counts
// as the canonical transcript and additionally materializes and shuffles the
// individual messages when the pool is small enough; both modes produce
// identical metrics and the tests assert so.
struct SimOptions {
  std::uint64_t materialize_cap = 65536;  // materialize + shuffle when total() <= cap
  bool force_materialize = false;         // shuffle regardless of pool size
  bool counts_only = false;               // never materialize
  bool use_efficient_histogram = true;    // parallel-sampling histogram randomizer
};

// Outcome of one end-to-end trial: randomize every user, shuffle, analyze.
struct TrialMetrics {
  std::vector<double> estimates;
  std::vector<double> truth;
  double squared_error = 0.0;        // sum over coordinates
  double linf_error = 0.0;           // max coordinate absolute error
  std::uint64_t messages_sent = 0;   // unit messages through the shuffler
  double bits_sent = 0.0;            // messages_sent times the per-message bit cost
  double extra_per_user = 0.0;       // (messages_sent - mandatory signal) / n
};

// Aggregates over independent trials. rmse follows the per-coordinate
// convention: sqrt(mean over trials of squared_error / coordinate count).
struct ExperimentAggregate {
  double rmse = 0.0;
  double mean_linf = 0.0;
  double mean_extra_messages = 0.0;  // per user
  double mean_bits = 0.0;            // per trial, whole transcript
  double mean_error = 0.0;           // signed, averaged over coordinates and trials
  std::uint64_t trials = 0;
};

// Expands pooled counts into one Message per unit message, in bucket order.
std::vector<Message> materialize(const PooledCounts& pool);

// In-place uniform random permutation.
void fisher_yates(std::vector<Message>& messages, Rng& rng);

// Rebuilds pooled counts from a materialized transcript.
PooledCounts recount(const std::vector<Message>& messages, std::uint64_t B);

// Bits charged per unit message for this mechanism and bucket count: 1 for
// the binary-sum protocols, ceil(log2 B) + 1 for bucket-and-sign messages,
// ceil(log2 B) for a bare category index, B for one bit-vector report.
double message_bits(Mechanism mechanism, std::uint64_t B);

// Runs one trial. The task is a histogram over [1, B] when the params carry
// B >= 2 (except binary randomized response, which is always a binary sum
// transmitted through a two-bucket pool); otherwise inputs are summed.
// inputs.size() is the authoritative user count: the same calibrated noise
// may be re-run at any n (its parameters do not depend on n). The trial
// consumes two derived RNG substreams, one for the users and one for the
// shuffle, so counts-only and materialized runs agree exactly.
TrialMetrics run_trial(const std::vector<int>& inputs, const MechanismParams& params,
                       std::uint64_t trial_seed, const SimOptions& options = {});

// Runs `trials` independent trials with per-trial seeds derived from `seed`
// and aggregates with compensated summation.
ExperimentAggregate run_experiment(const std::vector<int>& inputs, const MechanismParams& params,
                                   std::uint64_t trials, std::uint64_t seed,
                                   const SimOptions& options = {});

}  // namespace shuffledp
