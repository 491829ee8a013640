#include "shuffledp/shuffler.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <utility>

#include "shuffledp/dist.hpp"
#include "shuffledp/errors.hpp"
#include "shuffledp/kernels.hpp"

namespace shuffledp {

namespace {

bool histogram_task(const MechanismParams& params) {
  return params.B >= 2 && params.mechanism != Mechanism::binary_rr;
}

std::uint64_t bucket_bits(std::uint64_t B) {
  std::uint64_t bits = 0;
  while ((1ull << bits) < B) ++bits;
  return bits;
}

void check_input_range(int x, long long lo, long long hi, const char* what) {
  if (x < lo || x > hi)
    throw std::invalid_argument(std::string("run_trial: input out of range for ") + what);
}

// Sends the pooled transcript through an explicit uniform shuffle when the
// configuration asks for it. Counts in equal counts out, so the analyzer
// path is shared; this exercises the permutation step the analyzers are
// proven insensitive to.
void maybe_shuffle(PooledCounts& pool, const SimOptions& options, Rng& shuffle_rng) {
  if (options.counts_only) return;
  if (!options.force_materialize && pool.total() > options.materialize_cap) return;
  std::vector<Message> messages = materialize(pool);
  fisher_yates(messages, shuffle_rng);
  pool = recount(messages, pool.B);
}

}  // namespace

std::vector<Message> materialize(const PooledCounts& pool) {
  std::vector<Message> out;
  out.reserve(pool.total());
  for (std::uint64_t j = 1; j <= pool.B; ++j) {
    for (std::uint64_t c = 0; c < pool.plus[j]; ++c)
      out.push_back(Message{static_cast<std::int32_t>(j), +1});
    for (std::uint64_t c = 0; c < pool.minus[j]; ++c)
      out.push_back(Message{static_cast<std::int32_t>(j), -1});
  }
  return out;
}

void fisher_yates(std::vector<Message>& messages, Rng& rng) {
  for (std::size_t i = messages.size(); i > 1; --i)
    std::swap(messages[i - 1], messages[rng.below(i)]);
}

PooledCounts recount(const std::vector<Message>& messages, std::uint64_t B) {
  PooledCounts pool(B);
  for (const Message& m : messages) pool.add(static_cast<std::uint64_t>(m.bucket), m.sign, 1);
  return pool;
}

double message_bits(Mechanism mechanism, std::uint64_t B) {
  switch (mechanism) {
    case Mechanism::poisson:
    case Mechanism::nb:
    case Mechanism::correlated:
      return B >= 2 ? static_cast<double>(bucket_bits(B) + 1) : 1.0;
    case Mechanism::binary_rr:
      return 1.0;
    case Mechanism::b_rr:
      return static_cast<double>(bucket_bits(B));
    case Mechanism::rappor:
      return static_cast<double>(B);
    case Mechanism::frag_rappor:
      return static_cast<double>(bucket_bits(B) + 1);
    case Mechanism::central_dlap:
      return 0.0;
  }
  return 0.0;
}

TrialMetrics run_trial(const std::vector<int>& inputs, const MechanismParams& params,
                       std::uint64_t trial_seed, const SimOptions& options) {
  const std::uint64_t n = inputs.size();
  if (n == 0) throw std::invalid_argument("run_trial: empty input vector");
  const bool hist = histogram_task(params);
  const std::uint64_t B = hist ? params.B : 1;

  TrialMetrics m;
  if (hist) {
    m.truth.assign(B, 0.0);
    for (int x : inputs) {
      check_input_range(x, 1, static_cast<long long>(B), "histogram bucket");
      m.truth[static_cast<std::size_t>(x) - 1] += 1.0;
    }
  } else {
    long long cap = params.mechanism == Mechanism::poisson || params.mechanism == Mechanism::nb
                        ? params.sensitivity
                        : 1;
    double total = 0.0;
    for (int x : inputs) {
      check_input_range(x, 0, cap, "summation value");
      total += x;
    }
    m.truth.assign(1, total);
  }

  Rng user_rng(derive_seed(trial_seed, 1));
  Rng shuffle_rng(derive_seed(trial_seed, 2));

  // The central reference adds one discrete-Laplace draw per coordinate to
  // the exact answer; nothing crosses a wire.
  if (params.mechanism == Mechanism::central_dlap) {
    IntegerDistribution noise = IntegerDistribution::discrete_laplace(params.eps1);
    m.estimates = m.truth;
    for (double& e : m.estimates) e += static_cast<double>(noise.sample(user_rng));
  } else {
    PooledCounts pool(params.mechanism == Mechanism::binary_rr ? 2 : B);
    double noise_bias = 0.0;  // expected pooled (plus - minus) noise per bucket
    std::uint64_t sent = 0;

    switch (params.mechanism) {
      case Mechanism::poisson:
      case Mechanism::nb: {
        IntegerDistribution noise =
            params.mechanism == Mechanism::poisson
                ? IntegerDistribution::poisson(params.lambda)
                : IntegerDistribution::neg_binomial(params.nb_r, params.nb_p);
        noise_bias = noise.mean();
        DcpSamplerPlan plan(noise.divide(n), B);
        if (!hist) {
          for (int x : inputs) sent += ddist_randomize(x, plan, pool, user_rng);
        } else if (options.use_efficient_histogram) {
          for (int x : inputs) {
            pool.add(static_cast<std::uint64_t>(x), +1, 1);
            sent += 1 + parallel_sampling(plan, +1, false, pool, user_rng);
          }
        } else {
          for (int x : inputs) {
            for (std::uint64_t j = 1; j <= B; ++j) {
              std::uint64_t c = (static_cast<std::uint64_t>(x) == j ? 1 : 0) +
                                static_cast<std::uint64_t>(plan.sample(user_rng));
              pool.add(j, +1, c);
              sent += c;
            }
          }
        }
        break;
      }
      case Mechanism::correlated: {
        if (!params.triple)
          throw std::invalid_argument("run_trial: correlated params carry no noise triple");
        CorrelatedPlans plans{DcpSamplerPlan(params.triple->d1.divide(n), B),
                              DcpSamplerPlan(params.triple->d2.divide(n), B),
                              DcpSamplerPlan(params.triple->d3.divide(n), B)};
        noise_bias = params.triple->d1.mean() - params.triple->d2.mean();
        if (!hist) {
          for (int x : inputs) sent += correlated_randomize(x, plans, pool, user_rng);
        } else if (options.use_efficient_histogram) {
          for (int x : inputs) sent += hist_randomize_efficient(x, plans, pool, user_rng);
        } else {
          for (int x : inputs) sent += hist_randomize(x, plans, pool, user_rng);
        }
        break;
      }
      case Mechanism::binary_rr:
        for (int x : inputs) sent += binary_rr_randomize(x, params.p_flip, pool, user_rng);
        break;
      case Mechanism::b_rr:
        for (int x : inputs) sent += b_rr_randomize(x, B, params.p_flip, pool, user_rng);
        break;
      case Mechanism::rappor:
        for (int x : inputs) sent += rappor_randomize(x, B, params.p_flip, pool, user_rng);
        break;
      case Mechanism::frag_rappor:
        for (int x : inputs) sent += frag_rappor_randomize(x, B, params.p_flip, pool, user_rng);
        break;
      case Mechanism::central_dlap:
        break;  // handled above
    }

    maybe_shuffle(pool, options, shuffle_rng);

    switch (params.mechanism) {
      case Mechanism::binary_rr:
        m.estimates = binary_rr_analyze(pool, n, params.p_flip);
        break;
      case Mechanism::b_rr:
        m.estimates = b_rr_analyze(pool, n, params.p_flip);
        break;
      case Mechanism::rappor:
      case Mechanism::frag_rappor:
        m.estimates = rappor_analyze(pool, n, params.p_flip);
        break;
      default:
        m.estimates = additive_analyze(pool, noise_bias);
        break;
    }

    m.messages_sent = sent;
    m.bits_sent = static_cast<double>(sent) * message_bits(params.mechanism, B);
    // Mandatory signal: the input units themselves for the binary additive
    // protocols, one message per user for everything else.
    double mandatory = hist || params.mechanism == Mechanism::binary_rr ||
                               params.mechanism == Mechanism::b_rr ||
                               params.mechanism == Mechanism::rappor ||
                               params.mechanism == Mechanism::frag_rappor
                           ? static_cast<double>(n)
                           : m.truth[0];
    m.extra_per_user = (static_cast<double>(sent) - mandatory) / static_cast<double>(n);
  }

  for (std::size_t i = 0; i < m.estimates.size(); ++i) {
    double e = m.estimates[i] - m.truth[i];
    m.squared_error += e * e;
    m.linf_error = std::max(m.linf_error, std::abs(e));
  }
  return m;
}

ExperimentAggregate run_experiment(const std::vector<int>& inputs, const MechanismParams& params,
                                   std::uint64_t trials, std::uint64_t seed,
                                   const SimOptions& options) {
  if (trials == 0) throw std::invalid_argument("run_experiment: trials must be >= 1");
  std::vector<double> sq(trials), linf(trials), extra(trials), bits(trials), err(trials);
  std::size_t coords = 0;
  for (std::uint64_t t = 0; t < trials; ++t) {
    TrialMetrics m = run_trial(inputs, params, derive_seed(seed, t), options);
    coords = m.estimates.size();
    sq[t] = m.squared_error / static_cast<double>(coords);
    linf[t] = m.linf_error;
    extra[t] = m.extra_per_user;
    bits[t] = m.bits_sent;
    double signed_err = 0.0;
    for (std::size_t i = 0; i < m.estimates.size(); ++i) signed_err += m.estimates[i] - m.truth[i];
    err[t] = signed_err / static_cast<double>(coords);
  }
  double tn = static_cast<double>(trials);
  ExperimentAggregate agg;
  agg.rmse = std::sqrt(kernels::sum(sq.data(), trials) / tn);
  agg.mean_linf = kernels::sum(linf.data(), trials) / tn;
  agg.mean_extra_messages = kernels::sum(extra.data(), trials) / tn;
  agg.mean_bits = kernels::sum(bits.data(), trials) / tn;
  agg.mean_error = kernels::sum(err.data(), trials) / tn;
  agg.trials = trials;
  return agg;
}

}  // namespace shuffledp
