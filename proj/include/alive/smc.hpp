#ifndef ALIVE_SMC_HPP
#define ALIVE_SMC_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "alive/abc.hpp"
#include "alive/error.hpp"
#include "alive/models.hpp"
#include "alive/rng.hpp"

namespace alive {

/// Sentinel ancestor for generation 0, whose particles start from the prior.
inline constexpr std::size_t kNoAncestor = static_cast<std::size_t>(-1);

/// Default trial cap for one alive step.
inline constexpr std::size_t kDefaultCap = 1'000'000;

/// One time step of an alive filter: every particle drawn before N acceptances
/// accumulated. All indices are 0-based; the last particle (index T-1) always
/// has weight 1 and is excluded from resampling and from the estimator sums.
struct ParticleGeneration {
  std::vector<double> states;
  std::vector<double> pseudo_obs;
  std::vector<std::uint8_t> weights;
  std::vector<std::size_t> ancestors;
  std::size_t stopping_time = 0;
  std::optional<std::size_t> twisted_index;

  std::size_t accepted() const;
};

/// Log-domain accumulator for the normalising-constant estimate.
struct NormConstEstimate {
  std::vector<double> log_factors;
  double log_total = 0.0;

  void add(double log_factor) {
    log_factors.push_back(log_factor);
    log_total += log_factor;
  }
};

/// Per-step bookkeeping of the twisted filters (logs of the raw sums).
struct TwistStepStats {
  std::size_t twisted_index = 0;
  double log_qh_sum = 0.0;  ///< log sum_j W_j Q(h)(k_j) over the previous pool
  double log_wh_sum = 0.0;  ///< log sum_i W_i h(k_i) over the first T-1 new particles
  double log_h_sum = 0.0;   ///< log sum_i h(k_i) over the first T-1 new particles
};

struct AliveResult {
  std::vector<ParticleGeneration> generations;
  NormConstEstimate estimate;
  std::vector<TwistStepStats> twist_stats;  ///< empty for the untwisted filter
};

/// Bootstrap generation: N particles with log weights log g(y | k).
struct WeightedGeneration {
  std::vector<double> states;
  std::vector<double> log_weights;
  std::vector<std::size_t> ancestors;
};

struct BootstrapResult {
  std::vector<WeightedGeneration> generations;
  NormConstEstimate estimate;
  std::vector<TwistStepStats> twist_stats;
};

/// Categorical sampler over a fixed weight vector (inverse CDF with binary
/// search), for drawing many indices from one pool.
class DiscreteSampler {
 public:
  explicit DiscreteSampler(std::span<const double> weights);
  std::size_t operator()(Stream& stream) const;
  std::size_t size() const { return cumulative_.size(); }

 private:
  std::vector<double> cumulative_;
  std::size_t last_positive_ = 0;
};

std::vector<std::size_t> multinomial_resample(Stream& stream, std::span<const double> weights,
                                              std::size_t count);

/// A freshly proposed alive particle before weighting.
struct Proposal {
  double state = 0.0;
  double pseudo_obs = 0.0;
  std::size_t ancestor = kNoAncestor;
};

/// Keeps drawing from `propose` and appending to `pool` until the pool holds N
/// unit weights. Particles already in the pool count towards N. Throws
/// CapExceeded when the pool would grow beyond `cap` particles.
template <typename Propose>
void fill_until_alive(ParticleGeneration& pool, Propose&& propose, const AbcKernel& kernel, double y,
                      std::size_t N, std::size_t cap, std::size_t step) {
  std::size_t accepted = pool.accepted();
  while (accepted < N) {
    if (pool.states.size() >= cap) throw CapExceeded(step, pool.states.size(), accepted);
    const Proposal p = propose();
    const std::uint8_t w = static_cast<std::uint8_t>(kernel.weight(p.pseudo_obs, y));
    pool.states.push_back(p.state);
    pool.pseudo_obs.push_back(p.pseudo_obs);
    pool.weights.push_back(w);
    pool.ancestors.push_back(p.ancestor);
    accepted += w;
  }
  pool.stopping_time = pool.states.size();
}

/// Draws until N acceptances: T = inf{p >= N : sum_{i<=p} W_i = N}.
ParticleGeneration sample_until_alive(const std::function<Proposal(Stream&)>& propose,
                                      const AbcKernel& kernel, double y, std::size_t N,
                                      std::size_t cap, Stream& stream, std::size_t step = 0);

/// Bootstrap particle filter with multinomial resampling. Needs the model's
/// observation density. Throws ParticleDeath when a generation has no weight.
BootstrapResult bootstrap_filter(const HmmModel& model, std::span<const double> observations,
                                 std::size_t N, Stream& stream);

/// Alive particle filter. Each step resamples ancestors from the first T-1
/// particles of the previous generation in proportion to their weights and
/// contributes log((N-1)/(T-1)) to the estimate.
AliveResult alive_filter(const HmmModel& model, const AbcKernel& kernel,
                         std::span<const double> observations, std::size_t N, std::size_t cap,
                         Stream& stream);

/// Index into the final generation, drawn in proportion to the weights of its
/// first T-1 particles.
std::size_t select_final_index(const ParticleGeneration& last, Stream& stream);

/// Latent path k_{1:T} ending at `index` of the final generation.
std::vector<double> trace_path(const std::vector<ParticleGeneration>& generations, std::size_t index);

double log_sum_exp(std::span<const double> values);

}  // namespace alive

#endif  // ALIVE_SMC_HPP
