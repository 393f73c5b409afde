#ifndef ALIVE_MODELS_HPP
#define ALIVE_MODELS_HPP

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "alive/abc.hpp"
#include "alive/rng.hpp"

namespace alive {

/// K_0 ~ N(0, nu2), K_n | k ~ N(phi k, nu2), Y_n | k ~ N(k, tau2).
struct LinearGaussianParams {
  double phi = 0.9;
  double nu2 = 1.0;
  double tau2 = 1.0;

  void validate() const;
};

/// K_0 ~ N(0, nu2), K_n | k ~ N(F k, nu2), Y_n = exp(k_n / 2) * S(alpha, beta, gamma, delta).
struct StochVolParams {
  double F = 0.9;
  double nu2 = 0.01;
  double alpha = 1.95;
  double beta = 0.05;
  double gamma = 1.0;
  double delta = 0.0;

  void validate() const;
};

/// Finite-state HMM with finite observation alphabet. Latent states and
/// symbols are 0-based and carried through the filters as doubles.
///
/// ball[y][u] is true when simulated symbol u is accepted against observed
/// symbol y.
struct DiscreteHmmParams {
  std::vector<double> initial;
  std::vector<std::vector<double>> transition;
  std::vector<std::vector<double>> emission;
  std::vector<std::vector<bool>> ball;

  std::size_t num_states() const { return initial.size(); }
  std::size_t num_symbols() const { return emission.empty() ? 0 : emission.front().size(); }
  void validate() const;
};

/// Acceptance sets induced by an ABC kernel on the symbol alphabet {0..O-1}.
std::vector<std::vector<bool>> ball_from_kernel(const AbcKernel& kernel, std::size_t num_symbols);

/// Sampler bundle for a hidden Markov model. Densities are optional and are
/// left empty when the model's observation density is intractable.
struct HmmModel {
  std::function<double(Stream&)> sample_initial;
  std::function<double(double, Stream&)> sample_transition;
  std::function<double(double, Stream&)> sample_observation;
  /// log g(y | k)
  std::function<double(double, double)> log_observation_density;
  /// log p(y_{n+lag} | k_n), lag >= 1
  std::function<double(double, double, int)> log_lookahead_predictive;

  /// K_1 drawn by sampling K_0 and applying one transition.
  double sample_first(Stream& stream) const {
    return sample_transition(sample_initial(stream), stream);
  }
};

HmmModel lg_model(const LinearGaussianParams& params);
HmmModel sv_model(const StochVolParams& params);
HmmModel discrete_model(const DiscreteHmmParams& params);

/// One draw from the stable law S(alpha, beta, gamma, delta) via the
/// Chambers-Mallows-Stuck transformation, in the parameterisation where delta
/// is the mean whenever alpha > 1. S(2, 0, gamma, delta) is N(delta, 2 gamma^2).
double stable_sample(Stream& stream, double alpha, double beta, double gamma, double delta);

struct SimulatedPath {
  std::vector<double> latent;
  std::vector<double> observations;
};

SimulatedPath simulate(const HmmModel& model, std::size_t T, Stream& stream);

/// Sufficient statistics of the Kalman recursion after `steps` observations:
/// the filtering mean/variance of K_steps and the accumulated log marginal.
struct KalmanState {
  double mean = 0.0;
  double variance = 0.0;
  double log_marginal = 0.0;
  std::size_t steps = 0;
};

KalmanState kalman_start(const LinearGaussianParams& params);
KalmanState kalman_advance(const LinearGaussianParams& params, KalmanState state,
                           std::span<const double> observations);
double kalman_log_marginal(const LinearGaussianParams& params, std::span<const double> observations);

/// Exact log normalising constant of the ABC approximation of a discrete HMM,
/// by the forward recursion with emission mass summed over each acceptance set.
double discrete_abc_log_marginal(const DiscreteHmmParams& params, std::span<const double> observations);

double log_normal_density(double x, double mean, double variance);

/// log N(y; delta e^{m/2}, 2 gamma^2 e^m), the Gaussian surrogate of the
/// stochastic volatility observation law at log-variance m.
double sv_surrogate_log_density(double y, double m, double gamma, double delta);

}  // namespace alive

#endif  // ALIVE_MODELS_HPP
