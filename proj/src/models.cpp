#include "alive/models.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <string>

#include "alive/error.hpp"

namespace alive {

namespace {

void check_probability_row(std::span<const double> row, const std::string& what) {
  double total = 0.0;
  for (double p : row) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidArgument(what + " has an invalid entry");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw InvalidArgument(what + " does not sum to 1");
}

std::size_t symbol_index(double y, std::size_t num_symbols) {
  const double r = std::round(y);
  if (std::abs(r - y) > 1e-9 || r < 0.0 || r >= static_cast<double>(num_symbols)) {
    throw InvalidArgument("observation " + std::to_string(y) + " is not a valid symbol");
  }
  return static_cast<std::size_t>(r);
}

}  // namespace

double log_normal_density(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + d * d / variance);
}

void LinearGaussianParams::validate() const {
  if (!(nu2 > 0.0)) throw InvalidArgument("nu2 must be positive");
  if (!(tau2 > 0.0)) throw InvalidArgument("tau2 must be positive");
  if (!std::isfinite(phi)) throw InvalidArgument("phi must be finite");
}

void StochVolParams::validate() const {
  if (!(nu2 > 0.0) || !std::isfinite(nu2)) throw InvalidArgument("nu2 must be positive");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgument("gamma must be positive");
  if (!(alpha > 0.0 && alpha <= 2.0)) throw InvalidArgument("alpha must lie in (0, 2]");
  if (!(beta >= -1.0 && beta <= 1.0)) throw InvalidArgument("beta must lie in [-1, 1]");
  if (!std::isfinite(F) || !std::isfinite(delta)) throw InvalidArgument("F and delta must be finite");
}

void DiscreteHmmParams::validate() const {
  const std::size_t S = num_states();
  if (S == 0) throw InvalidArgument("discrete HMM needs at least one state");
  check_probability_row(initial, "initial distribution");
  if (transition.size() != S || emission.size() != S) {
    throw InvalidArgument("transition/emission must have one row per state");
  }
  const std::size_t O = num_symbols();
  if (O == 0) throw InvalidArgument("discrete HMM needs at least one symbol");
  for (std::size_t s = 0; s < S; ++s) {
    if (transition[s].size() != S) throw InvalidArgument("transition matrix must be square");
    if (emission[s].size() != O) throw InvalidArgument("emission rows must have equal length");
    check_probability_row(transition[s], "transition row " + std::to_string(s));
    check_probability_row(emission[s], "emission row " + std::to_string(s));
  }
  if (ball.size() != O) throw InvalidArgument("ball needs one acceptance set per symbol");
  for (const auto& set : ball) {
    if (set.size() != O) throw InvalidArgument("acceptance set has wrong length");
    bool any = false;
    for (bool b : set) any = any || b;
    if (!any) throw InvalidArgument("acceptance sets must be nonempty");
  }
}

std::vector<std::vector<bool>> ball_from_kernel(const AbcKernel& kernel, std::size_t num_symbols) {
  std::vector<std::vector<bool>> ball(num_symbols, std::vector<bool>(num_symbols, false));
  for (std::size_t y = 0; y < num_symbols; ++y) {
    for (std::size_t u = 0; u < num_symbols; ++u) {
      ball[y][u] = kernel.weight(static_cast<double>(u), static_cast<double>(y)) == 1;
    }
  }
  return ball;
}

HmmModel lg_model(const LinearGaussianParams& params) {
  params.validate();
  const auto p = params;
  HmmModel model;
  model.sample_initial = [p](Stream& s) { return s.gaussian(0.0, p.nu2); };
  model.sample_transition = [p](double k, Stream& s) { return s.gaussian(p.phi * k, p.nu2); };
  model.sample_observation = [p](double k, Stream& s) { return s.gaussian(k, p.tau2); };
  model.log_observation_density = [p](double y, double k) { return log_normal_density(y, k, p.tau2); };
  model.log_lookahead_predictive = [p](double y, double k, int lag) {
    // K_{n+lag} | k ~ N(phi^lag k, nu2 * sum_{j<lag} phi^{2j}), then add tau2.
    double mean = k;
    double variance = 0.0;
    for (int j = 0; j < lag; ++j) {
      mean *= p.phi;
      variance = p.phi * p.phi * variance + p.nu2;
    }
    return log_normal_density(y, mean, variance + p.tau2);
  };
  return model;
}

double sv_surrogate_log_density(double y, double m, double gamma, double delta) {
  // N(y; delta e^{m/2}, c e^m) written through y e^{-m/2} so that extreme m
  // gives a finite log density or -inf instead of inf/inf.
  const double c = 2.0 * gamma * gamma;
  const double w = y == 0.0 ? 0.0 : y * std::exp(-0.5 * m);
  const double z = w - delta;
  return -0.5 * std::log(2.0 * std::numbers::pi * c) - 0.5 * m - z * z / (2.0 * c);
}

HmmModel sv_model(const StochVolParams& params) {
  params.validate();
  const auto p = params;
  HmmModel model;
  model.sample_initial = [p](Stream& s) { return s.gaussian(0.0, p.nu2); };
  model.sample_transition = [p](double k, Stream& s) { return s.gaussian(p.F * k, p.nu2); };
  model.sample_observation = [p](double k, Stream& s) {
    return std::exp(0.5 * k) * stable_sample(s, p.alpha, p.beta, p.gamma, p.delta);
  };
  // Gaussian surrogate for the lookahead: the stable draw is replaced by its
  // alpha = 2 counterpart N(delta, 2 gamma^2) and the future log-volatility by
  // its propagated mean F^lag k.
  model.log_lookahead_predictive = [p](double y, double k, int lag) {
    return sv_surrogate_log_density(y, std::pow(p.F, lag) * k, p.gamma, p.delta);
  };
  return model;
}

HmmModel discrete_model(const DiscreteHmmParams& params) {
  params.validate();
  auto p = std::make_shared<const DiscreteHmmParams>(params);
  HmmModel model;
  model.sample_initial = [p](Stream& s) { return static_cast<double>(s.categorical(p->initial)); };
  model.sample_transition = [p](double k, Stream& s) {
    return static_cast<double>(s.categorical(p->transition[symbol_index(k, p->num_states())]));
  };
  model.sample_observation = [p](double k, Stream& s) {
    return static_cast<double>(s.categorical(p->emission[symbol_index(k, p->num_states())]));
  };
  model.log_observation_density = [p](double y, double k) {
    return std::log(p->emission[symbol_index(k, p->num_states())][symbol_index(y, p->num_symbols())]);
  };
  return model;
}

double stable_sample(Stream& stream, double alpha, double beta, double gamma, double delta) {
  if (!(alpha > 0.0 && alpha <= 2.0)) throw InvalidArgument("stable alpha must lie in (0, 2]");
  if (!(beta >= -1.0 && beta <= 1.0)) throw InvalidArgument("stable beta must lie in [-1, 1]");
  if (!(gamma > 0.0)) throw InvalidArgument("stable gamma must be positive");

  constexpr double half_pi = std::numbers::pi / 2.0;
  const double v = std::numbers::pi * (stream.uniform() - 0.5);
  const double w = stream.exponential();

  if (alpha == 1.0) {
    const double a = half_pi + beta * v;
    const double x = (a * std::tan(v) - beta * std::log(half_pi * w * std::cos(v) / a)) / half_pi;
    return gamma * x + beta * gamma * std::log(gamma) / half_pi + delta;
  }

  const double zeta = -beta * std::tan(half_pi * alpha);
  const double xi = std::atan(-zeta) / alpha;
  const double scale = std::pow(1.0 + zeta * zeta, 0.5 / alpha);
  const double x = scale * std::sin(alpha * (v + xi)) / std::pow(std::cos(v), 1.0 / alpha) *
                   std::pow(std::cos(v - alpha * (v + xi)) / w, (1.0 - alpha) / alpha);
  return gamma * x + delta;
}

SimulatedPath simulate(const HmmModel& model, std::size_t T, Stream& stream) {
  if (T == 0) throw InvalidArgument("simulate needs T >= 1");
  SimulatedPath path;
  path.latent.reserve(T);
  path.observations.reserve(T);
  double k = model.sample_initial(stream);
  for (std::size_t n = 0; n < T; ++n) {
    k = model.sample_transition(k, stream);
    path.latent.push_back(k);
    path.observations.push_back(model.sample_observation(k, stream));
  }
  return path;
}

KalmanState kalman_start(const LinearGaussianParams& params) {
  params.validate();
  return {0.0, params.nu2, 0.0, 0};
}

KalmanState kalman_advance(const LinearGaussianParams& params, KalmanState state,
                           std::span<const double> observations) {
  for (double y : observations) {
    const double pred_mean = params.phi * state.mean;
    const double pred_var = params.phi * params.phi * state.variance + params.nu2;
    const double innovation_var = pred_var + params.tau2;
    state.log_marginal += log_normal_density(y, pred_mean, innovation_var);
    const double gain = pred_var / innovation_var;
    state.mean = pred_mean + gain * (y - pred_mean);
    state.variance = (1.0 - gain) * pred_var;
    ++state.steps;
  }
  return state;
}

double kalman_log_marginal(const LinearGaussianParams& params, std::span<const double> observations) {
  if (observations.empty()) throw InvalidArgument("kalman_log_marginal needs T >= 1");
  return kalman_advance(params, kalman_start(params), observations).log_marginal;
}

double discrete_abc_log_marginal(const DiscreteHmmParams& params, std::span<const double> observations) {
  params.validate();
  const std::size_t S = params.num_states();
  const std::size_t O = params.num_symbols();

  std::vector<double> accept(S);
  auto acceptance_mass = [&](double y) {
    const auto& set = params.ball[symbol_index(y, O)];
    for (std::size_t s = 0; s < S; ++s) {
      double mass = 0.0;
      for (std::size_t u = 0; u < O; ++u) {
        if (set[u]) mass += params.emission[s][u];
      }
      accept[s] = mass;
    }
  };

  // filter holds P(K_n = s | accepted so far); starts at the law of K_0.
  std::vector<double> filter = params.initial;
  std::vector<double> next(S);
  double log_z = 0.0;
  for (double y : observations) {
    acceptance_mass(y);
    double total = 0.0;
    for (std::size_t j = 0; j < S; ++j) {
      double predicted = 0.0;
      for (std::size_t i = 0; i < S; ++i) predicted += filter[i] * params.transition[i][j];
      next[j] = predicted * accept[j];
      total += next[j];
    }
    if (total <= 0.0) return -std::numeric_limits<double>::infinity();
    log_z += std::log(total);
    for (std::size_t j = 0; j < S; ++j) filter[j] = next[j] / total;
  }
  return log_z;
}

}  // namespace alive
