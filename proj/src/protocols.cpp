#include "shuffledp/protocols.hpp"

#include <cmath>
#include <stdexcept>

#include "shuffledp/errors.hpp"

namespace shuffledp {

namespace {
// Above this rate the single-chunk Poisson sampler's running product would
// underflow, so sampling falls back to the chunked variant.
constexpr double kOneChunkRate = 400.0;
}  // namespace

DcpSamplerPlan::DcpSamplerPlan(const IntegerDistribution& divided_share, std::uint64_t fanout) {
  if (fanout < 1) throw std::invalid_argument("DcpSamplerPlan: fanout must be >= 1");
  DcpForm form = divided_share.to_dcp();
  rate_ = form.rate;
  if (rate_ <= kOneChunkRate) exp_neg_rate_ = std::exp(-rate_);
  mean_ = divided_share.mean();
  fanout_ = fanout;
  pooled_rate_ = rate_ * static_cast<double>(fanout);
  if (pooled_rate_ <= kOneChunkRate) pooled_exp_neg_ = std::exp(-pooled_rate_);
  if (rate_ == 0.0) return;
  const IntegerDistribution& atom = *form.atom;
  if (atom.kind() == DistKind::point_mass && atom.offset() == 1) {
    unit_atoms_ = true;
  } else if (atom.kind() == DistKind::logarithmic) {
    unit_atoms_ = false;
    p_ = atom.p();
    c1_ = -1.0 / std::log1p(-p_);
  } else {
    unit_atoms_ = false;
    atom_ = form.atom;
  }
}

long long DcpSamplerPlan::sample(Rng& rng) const {
  if (rate_ == 0.0) return 0;
  long long events = rate_ <= kOneChunkRate ? detail::sample_poisson_pre(exp_neg_rate_, rng)
                                            : detail::sample_poisson(rate_, rng);
  if (unit_atoms_) return events;
  long long total = 0;
  for (long long i = 0; i < events; ++i) total += atom_draw(rng);
  return total;
}

long long DcpSamplerPlan::atom_draw(Rng& rng) const {
  if (unit_atoms_) return 1;
  if (!atom_) return detail::sample_logarithmic(p_, c1_, rng);
  return atom_->sample(rng);
}

long long DcpSamplerPlan::pooled_event_count(Rng& rng) const {
  if (pooled_rate_ == 0.0) return 0;
  return pooled_rate_ <= kOneChunkRate ? detail::sample_poisson_pre(pooled_exp_neg_, rng)
                                       : detail::sample_poisson(pooled_rate_, rng);
}

std::uint64_t ddist_randomize(int x, const DcpSamplerPlan& noise, PooledCounts& pool, Rng& rng) {
  long long z = noise.sample(rng);
  std::uint64_t count = static_cast<std::uint64_t>(x) + static_cast<std::uint64_t>(z);
  pool.add(1, +1, count);
  return count;
}

std::uint64_t correlated_randomize(int x, const CorrelatedPlans& plans, PooledCounts& pool,
                                   Rng& rng) {
  long long z1 = plans.d1.sample(rng);
  long long z2 = plans.d2.sample(rng);
  long long z3 = plans.d3.sample(rng);
  std::uint64_t up = static_cast<std::uint64_t>(x + z1 + z3);
  std::uint64_t dn = static_cast<std::uint64_t>(z2 + z3);
  pool.add(1, +1, up);
  pool.add(1, -1, dn);
  return up + dn;
}

std::uint64_t hist_randomize(int x, const CorrelatedPlans& plans, PooledCounts& pool, Rng& rng) {
  std::uint64_t sent = 0;
  for (std::uint64_t j = 1; j <= pool.B; ++j) {
    long long z1 = plans.d1.sample(rng);
    long long z2 = plans.d2.sample(rng);
    long long z3 = plans.d3.sample(rng);
    std::uint64_t up =
        static_cast<std::uint64_t>((static_cast<std::uint64_t>(x) == j ? 1 : 0) + z1 + z3);
    std::uint64_t dn = static_cast<std::uint64_t>(z2 + z3);
    pool.add(j, +1, up);
    pool.add(j, -1, dn);
    sent += up + dn;
  }
  return sent;
}

std::uint64_t parallel_sampling(const DcpSamplerPlan& plan, int sign, bool both_signs,
                                PooledCounts& pool, Rng& rng) {
  // A Poisson process over fanout independent slots is one process at fanout
  // times the rate with uniform slot labels.
  long long events = plan.pooled_event_count(rng);
  std::uint64_t sent = 0;
  for (long long e = 0; e < events; ++e) {
    std::uint64_t j = 1 + rng.below(plan.fanout());
    std::uint64_t count = static_cast<std::uint64_t>(plan.atom_draw(rng));
    pool.add(j, sign, count);
    sent += count;
    if (both_signs) {
      pool.add(j, -sign, count);
      sent += count;
    }
  }
  return sent;
}

std::uint64_t hist_randomize_efficient(int x, const CorrelatedPlans& plans, PooledCounts& pool,
                                       Rng& rng) {
  pool.add(static_cast<std::uint64_t>(x), +1, 1);
  std::uint64_t sent = 1;
  sent += parallel_sampling(plans.d1, +1, false, pool, rng);
  sent += parallel_sampling(plans.d2, -1, false, pool, rng);
  sent += parallel_sampling(plans.d3, +1, true, pool, rng);
  return sent;
}

std::uint64_t binary_rr_randomize(int x, double p_flip, PooledCounts& pool, Rng& rng) {
  int bit = x;
  if (rng.uniform() < p_flip) bit = 1 - bit;
  pool.add(static_cast<std::uint64_t>(1 + bit), +1, 1);
  return 1;
}

std::uint64_t b_rr_randomize(int x, std::uint64_t B, double p_flip, PooledCounts& pool, Rng& rng) {
  std::uint64_t report = static_cast<std::uint64_t>(x);
  if (rng.uniform() < p_flip) report = 1 + rng.below(B);
  pool.add(report, +1, 1);
  return 1;
}

std::uint64_t rappor_randomize(int x, std::uint64_t B, double p_flip, PooledCounts& pool,
                               Rng& rng) {
  for (std::uint64_t j = 1; j <= B; ++j) {
    bool bit = (j == static_cast<std::uint64_t>(x));
    if (rng.uniform() < p_flip) bit = !bit;
    if (bit) pool.add(j, +1, 1);
  }
  return 1;
}

std::uint64_t frag_rappor_randomize(int x, std::uint64_t B, double p_flip, PooledCounts& pool,
                                    Rng& rng) {
  std::uint64_t sent = 0;
  for (std::uint64_t j = 1; j <= B; ++j) {
    bool bit = (j == static_cast<std::uint64_t>(x));
    if (rng.uniform() < p_flip) bit = !bit;
    if (bit) {
      pool.add(j, +1, 1);
      ++sent;
    }
  }
  return sent;
}

std::vector<double> additive_analyze(const PooledCounts& pool, double noise_bias) {
  std::vector<double> out(pool.B);
  for (std::uint64_t j = 1; j <= pool.B; ++j)
    out[j - 1] = static_cast<double>(pool.plus[j]) - static_cast<double>(pool.minus[j]) -
                 noise_bias;
  return out;
}

std::vector<double> binary_rr_analyze(const PooledCounts& pool, std::uint64_t n, double p_flip) {
  double ones = static_cast<double>(pool.plus[2]);
  return {(ones - static_cast<double>(n) * p_flip) / (1.0 - 2.0 * p_flip)};
}

std::vector<double> b_rr_analyze(const PooledCounts& pool, std::uint64_t n, double p_flip) {
  std::vector<double> out(pool.B);
  double base = static_cast<double>(n) * p_flip / static_cast<double>(pool.B);
  for (std::uint64_t j = 1; j <= pool.B; ++j)
    out[j - 1] = (static_cast<double>(pool.plus[j]) - base) / (1.0 - p_flip);
  return out;
}

std::vector<double> rappor_analyze(const PooledCounts& pool, std::uint64_t n, double p_flip) {
  std::vector<double> out(pool.B);
  double base = static_cast<double>(n) * p_flip;
  for (std::uint64_t j = 1; j <= pool.B; ++j)
    out[j - 1] = (static_cast<double>(pool.plus[j]) - base) / (1.0 - 2.0 * p_flip);
  return out;
}

}  // namespace shuffledp
