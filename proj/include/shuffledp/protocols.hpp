#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "shuffledp/dist.hpp"
#include "shuffledp/rng.hpp"

namespace shuffledp {

// One shuffled unit message: a bucket index in [1, B] and an additive sign.
// Binary-sum protocols use bucket 1 only (randomized response uses 1 and 2
// to carry the transmitted bit); histogram protocols use the full range.
struct Message {
  std::int32_t bucket;
  std::int8_t sign;

  friend bool operator==(const Message& a, const Message& b) {
    return a.bucket == b.bucket && a.sign == b.sign;
  }
  friend bool operator<(const Message& a, const Message& b) {
    return a.bucket != b.bucket ? a.bucket < b.bucket : a.sign < b.sign;
  }
};

// The multiset of messages after shuffling, kept as per-bucket counts. The
// multiset is exactly what an analyzer may observe, so counts are the
// canonical transcript; materializing and permuting individual messages
// yields the same counts back.
struct PooledCounts {
  std::uint64_t B = 1;
  std::vector<std::uint64_t> plus, minus;  // indexed 1..B; slot 0 unused

  explicit PooledCounts(std::uint64_t buckets)
      : B(buckets), plus(buckets + 1, 0), minus(buckets + 1, 0) {}

  void add(std::uint64_t bucket, int sign, std::uint64_t count = 1) {
    (sign > 0 ? plus : minus)[bucket] += count;
  }
  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (std::uint64_t j = 1; j <= B; ++j) t += plus[j] + minus[j];
    return t;
  }
};

// Per-user sampling plan for one noise share, precomputed from the divided
// distribution's compound-Poisson form so the per-draw work is a Poisson
// event count (usually 0) plus that many atom draws.
class DcpSamplerPlan {
 public:
  DcpSamplerPlan() = default;  // zero noise
  // fanout is the number of parallel slots the plan will be pooled over by
  // parallel_sampling; 1 for plain per-slot use.
  explicit DcpSamplerPlan(const IntegerDistribution& divided_share, std::uint64_t fanout = 1);

  long long sample(Rng& rng) const;
  // One draw from the atom distribution alone (for callers that pool the
  // Poisson event counts across slots themselves).
  long long atom_draw(Rng& rng) const;
  // Total event count across all fanout slots: Poisson(fanout * rate).
  long long pooled_event_count(Rng& rng) const;
  double rate() const { return rate_; }
  double mean() const { return mean_; }
  std::uint64_t fanout() const { return fanout_; }

 private:
  double rate_ = 0.0;
  double exp_neg_rate_ = 1.0;  // used when rate_ is small enough for one chunk
  double mean_ = 0.0;
  std::uint64_t fanout_ = 1;
  double pooled_rate_ = 0.0;
  double pooled_exp_neg_ = 1.0;
  bool unit_atoms_ = true;     // atom is a unit point mass: share is pure Poisson
  double p_ = 0.0, c1_ = 0.0;  // logarithmic atom constants
  std::shared_ptr<const IntegerDistribution> atom_;  // fallback for other atoms
};

// Noise plans for the three-component correlated randomizer. d3 is the
// shared component added to both wires of the same user.
struct CorrelatedPlans {
  DcpSamplerPlan d1, d2, d3;
};

// --- Randomizers -----------------------------------------------------------
// Each appends this user's messages to `pool` and returns how many unit
// messages the user sent (the rappor vector counts as one message).

// Binary sum with a single divisible noise share: x plus-signed unit
// messages in bucket 1, plus a noise draw of further unit messages.
std::uint64_t ddist_randomize(int x, const DcpSamplerPlan& noise, PooledCounts& pool, Rng& rng);

// Binary sum with correlated noise: bucket 1 carries x + z1 + z3 plus-signed
// and z2 + z3 minus-signed unit messages, with the same z3 draw on both
// wires so it cancels exactly in the difference.
std::uint64_t correlated_randomize(int x, const CorrelatedPlans& plans, PooledCounts& pool,
                                   Rng& rng);

// Histogram randomizer, direct form: runs the correlated binary randomizer
// independently for every bucket j of the pool on the indicator 1[x == j].
std::uint64_t hist_randomize(int x, const CorrelatedPlans& plans, PooledCounts& pool, Rng& rng);

// Draws the pooled noise of all buckets at once: a single Poisson event
// count at fanout times the per-bucket rate, each event landing in a uniform
// bucket with an atom-sized batch of messages. Distributionally identical to
// running `plan` once per bucket, at cost proportional to the events that
// exist. The plan must have been constructed with fanout equal to the bucket
// count. With both_signs set, each batch goes to both wires (the shared
// component). Returns the number of unit messages appended.
std::uint64_t parallel_sampling(const DcpSamplerPlan& plan, int sign, bool both_signs,
                                PooledCounts& pool, Rng& rng);

// Histogram randomizer, message-efficient form: one mandatory message for
// the user's own bucket, then parallel sampling of the three noise
// components across buckets (plans must carry fanout = B). Same output
// distribution as hist_randomize.
std::uint64_t hist_randomize_efficient(int x, const CorrelatedPlans& plans, PooledCounts& pool,
                                       Rng& rng);

// Randomized response on one bit: transmits x xor Bernoulli(p_flip) as a
// single message in bucket 1 + bit (pool must have B = 2).
std::uint64_t binary_rr_randomize(int x, double p_flip, PooledCounts& pool, Rng& rng);

// B-ary randomized response: with probability p_flip the report is uniform
// over all B buckets (own bucket included), otherwise it is the true bucket.
std::uint64_t b_rr_randomize(int x, std::uint64_t B, double p_flip, PooledCounts& pool, Rng& rng);

// Bit-vector response: bit j of the indicator vector of x is flipped
// independently with probability p_flip; the whole vector is one message and
// the pool records the set bits.
std::uint64_t rappor_randomize(int x, std::uint64_t B, double p_flip, PooledCounts& pool,
                               Rng& rng);

// Same bit flips, but each set bit travels as its own (bucket, +1) unit
// message; zero bits are not sent. Returns the number of set bits.
std::uint64_t frag_rappor_randomize(int x, std::uint64_t B, double p_flip, PooledCounts& pool,
                                    Rng& rng);

// --- Analyzers --------------------------------------------------------------
// Debiased per-bucket estimates, index j-1 holding bucket j. Binary-sum
// protocols return a single entry.

// Additive-noise protocols: estimate_j = plus_j - minus_j - noise_bias,
// where noise_bias is the expected pooled (plus - minus) noise per bucket.
std::vector<double> additive_analyze(const PooledCounts& pool, double noise_bias);

// (count of transmitted ones - n p) / (1 - 2p).
std::vector<double> binary_rr_analyze(const PooledCounts& pool, std::uint64_t n, double p_flip);

// (count_j - n p / B) / (1 - p).
std::vector<double> b_rr_analyze(const PooledCounts& pool, std::uint64_t n, double p_flip);

// (count_j - n p) / (1 - 2p), for both bit-vector variants.
std::vector<double> rappor_analyze(const PooledCounts& pool, std::uint64_t n, double p_flip);

}  // namespace shuffledp
