#include "alive/smc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace alive {

std::size_t ParticleGeneration::accepted() const {
  std::size_t total = 0;
  for (auto w : weights) total += w;
  return total;
}

double log_sum_exp(std::span<const double> values) {
  double top = -std::numeric_limits<double>::infinity();
  for (double v : values) top = std::max(top, v);
  if (!std::isfinite(top)) return top;
  double total = 0.0;
  for (double v : values) total += std::exp(v - top);
  return top + std::log(total);
}

DiscreteSampler::DiscreteSampler(std::span<const double> weights) {
  check_categorical_weights(weights);
  cumulative_.reserve(weights.size());
  double running = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    running += weights[i];
    cumulative_.push_back(running);
    if (weights[i] > 0.0) last_positive_ = i;
  }
}

std::size_t DiscreteSampler::operator()(Stream& stream) const {
  const double target = stream.uniform() * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
  // Rounding can put target on the total; fall back to the last positive weight.
  if (it == cumulative_.end()) return last_positive_;
  return static_cast<std::size_t>(it - cumulative_.begin());
}

std::vector<std::size_t> multinomial_resample(Stream& stream, std::span<const double> weights,
                                              std::size_t count) {
  if (count == 0) return {};
  const DiscreteSampler sampler(weights);
  std::vector<std::size_t> indices(count);
  for (auto& i : indices) i = sampler(stream);
  return indices;
}

ParticleGeneration sample_until_alive(const std::function<Proposal(Stream&)>& propose,
                                      const AbcKernel& kernel, double y, std::size_t N,
                                      std::size_t cap, Stream& stream, std::size_t step) {
  if (N < 2) throw InvalidArgument("alive sampling needs N >= 2");
  if (cap < N) throw InvalidArgument("trial cap must be at least N");
  ParticleGeneration pool;
  fill_until_alive(pool, [&] { return propose(stream); }, kernel, y, N, cap, step);
  return pool;
}

BootstrapResult bootstrap_filter(const HmmModel& model, std::span<const double> observations,
                                 std::size_t N, Stream& stream) {
  if (!model.log_observation_density) {
    throw InvalidArgument("bootstrap filter needs an observation density");
  }
  if (N < 2) throw InvalidArgument("bootstrap filter needs N >= 2");
  if (observations.empty()) throw InvalidArgument("no observations");

  BootstrapResult result;
  result.generations.reserve(observations.size());
  const double log_n = std::log(static_cast<double>(N));
  std::vector<double> resampling_weights(N);

  for (std::size_t step = 0; step < observations.size(); ++step) {
    WeightedGeneration gen;
    gen.states.resize(N);
    gen.log_weights.resize(N);
    if (step == 0) {
      gen.ancestors.assign(N, kNoAncestor);
      for (std::size_t i = 0; i < N; ++i) gen.states[i] = model.sample_first(stream);
    } else {
      const WeightedGeneration& prev = result.generations.back();
      const double top = *std::max_element(prev.log_weights.begin(), prev.log_weights.end());
      for (std::size_t j = 0; j < N; ++j) resampling_weights[j] = std::exp(prev.log_weights[j] - top);
      gen.ancestors = multinomial_resample(stream, resampling_weights, N);
      for (std::size_t i = 0; i < N; ++i) {
        gen.states[i] = model.sample_transition(prev.states[gen.ancestors[i]], stream);
      }
    }
    for (std::size_t i = 0; i < N; ++i) {
      gen.log_weights[i] = model.log_observation_density(observations[step], gen.states[i]);
    }
    const double log_mean = log_sum_exp(gen.log_weights) - log_n;
    if (!std::isfinite(log_mean)) throw ParticleDeath(step);
    result.estimate.add(log_mean);
    result.generations.push_back(std::move(gen));
  }
  return result;
}

AliveResult alive_filter(const HmmModel& model, const AbcKernel& kernel,
                         std::span<const double> observations, std::size_t N, std::size_t cap,
                         Stream& stream) {
  kernel.validate();
  if (N < 2) throw InvalidArgument("alive filter needs N >= 2");
  if (cap < N) throw InvalidArgument("trial cap must be at least N");
  if (observations.empty()) throw InvalidArgument("no observations");

  AliveResult result;
  result.generations.reserve(observations.size());
  const double log_n_minus_1 = std::log(static_cast<double>(N - 1));
  std::vector<double> pool_weights;

  for (std::size_t step = 0; step < observations.size(); ++step) {
    ParticleGeneration gen;
    const double y = observations[step];
    if (step == 0) {
      fill_until_alive(
          gen,
          [&] {
            Proposal p;
            p.state = model.sample_first(stream);
            p.pseudo_obs = model.sample_observation(p.state, stream);
            return p;
          },
          kernel, y, N, cap, step);
    } else {
      const ParticleGeneration& prev = result.generations.back();
      // The last particle of the previous generation is never resampled.
      pool_weights.assign(prev.weights.begin(), prev.weights.end() - 1);
      const DiscreteSampler ancestor(pool_weights);
      fill_until_alive(
          gen,
          [&] {
            Proposal p;
            p.ancestor = ancestor(stream);
            p.state = model.sample_transition(prev.states[p.ancestor], stream);
            p.pseudo_obs = model.sample_observation(p.state, stream);
            return p;
          },
          kernel, y, N, cap, step);
    }
    result.estimate.add(log_n_minus_1 - std::log(static_cast<double>(gen.stopping_time - 1)));
    result.generations.push_back(std::move(gen));
  }
  return result;
}

std::size_t select_final_index(const ParticleGeneration& last, Stream& stream) {
  std::vector<double> w(last.weights.begin(), last.weights.end() - 1);
  return stream.categorical(w);
}

std::vector<double> trace_path(const std::vector<ParticleGeneration>& generations, std::size_t index) {
  std::vector<double> path(generations.size());
  for (std::size_t n = generations.size(); n-- > 0;) {
    const ParticleGeneration& gen = generations[n];
    path[n] = gen.states.at(index);
    index = gen.ancestors[index];
  }
  return path;
}

}  // namespace alive
