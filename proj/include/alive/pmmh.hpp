#ifndef ALIVE_PMMH_HPP
#define ALIVE_PMMH_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "alive/abc.hpp"
#include "alive/error.hpp"
#include "alive/models.hpp"
#include "alive/rng.hpp"
#include "alive/smc.hpp"
#include "alive/twist.hpp"

namespace alive {

/// Output of one filter run as PMMH consumes it.
struct FilterOutput {
  double log_zhat = 0.0;
  std::vector<double> path;
};

template <typename Param>
struct Proposed {
  Param value;
  double log_correction = 0.0;  ///< log q(theta | theta*) - log q(theta* | theta)
};

/// Everything PMMH needs about one inference problem. `estimate` runs a filter
/// at the given parameter; it may throw CapExceeded or DegenerateTwist, which
/// the chain turns into a rejection.
template <typename Param>
struct PmmhProblem {
  std::function<double(const Param&)> log_prior;
  std::function<Proposed<Param>(const Param&, Stream&)> propose;
  std::function<Param(Stream&)> sample_prior;
  std::function<FilterOutput(const Param&, Stream&)> estimate;
};

template <typename Param>
struct PmmhState {
  Param theta{};
  double log_prior = 0.0;
  double log_zhat = 0.0;
  std::vector<double> selected_path;
  std::size_t accept_count = 0;
  std::size_t iteration = 0;
  std::size_t cap_events = 0;
  std::size_t degenerate_events = 0;
  bool last_accepted = false;
};

/// log of pi(theta*) q(theta | theta*) Z*(theta*) / (pi(theta) q(theta* | theta) Z(theta)).
inline double log_acceptance_ratio(double log_prior_new, double log_prior_old, double log_correction,
                                   double log_zhat_new, double log_zhat_old) {
  if (log_prior_new == -std::numeric_limits<double>::infinity() ||
      log_zhat_new == -std::numeric_limits<double>::infinity()) {
    return -std::numeric_limits<double>::infinity();
  }
  return (log_prior_new - log_prior_old) + log_correction + (log_zhat_new - log_zhat_old);
}

/// Accepts with probability min(1, exp(log_ratio)). Draws a uniform only when
/// log_ratio < 0, so a certain acceptance consumes no randomness.
inline bool accept_move(double log_ratio, Stream& stream) {
  if (std::isnan(log_ratio)) return false;
  if (log_ratio >= 0.0) return true;
  return std::log(stream.uniform()) < log_ratio;
}

template <typename Param>
PmmhState<Param> pmmh_step(const PmmhState<Param>& state, const PmmhProblem<Param>& problem,
                           Stream& stream) {
  PmmhState<Param> next = state;
  ++next.iteration;
  next.last_accepted = false;

  const Proposed<Param> proposal = problem.propose(state.theta, stream);
  const double log_prior = problem.log_prior(proposal.value);
  if (log_prior == -std::numeric_limits<double>::infinity()) return next;

  FilterOutput out;
  try {
    out = problem.estimate(proposal.value, stream);
  } catch (const CapExceeded&) {
    ++next.cap_events;
    return next;
  } catch (const DegenerateTwist&) {
    ++next.degenerate_events;
    return next;
  }

  const double log_ratio =
      log_acceptance_ratio(log_prior, state.log_prior, proposal.log_correction, out.log_zhat, state.log_zhat);
  if (accept_move(log_ratio, stream)) {
    next.theta = proposal.value;
    next.log_prior = log_prior;
    next.log_zhat = out.log_zhat;
    next.selected_path = std::move(out.path);
    ++next.accept_count;
    next.last_accepted = true;
  }
  return next;
}

/// Draws theta from the prior until the filter returns a finite estimate.
template <typename Param>
PmmhState<Param> initial_state(const PmmhProblem<Param>& problem, Stream& stream,
                               std::size_t max_attempts = 1000) {
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    PmmhState<Param> state;
    state.theta = problem.sample_prior(stream);
    state.log_prior = problem.log_prior(state.theta);
    if (!std::isfinite(state.log_prior)) continue;
    try {
      FilterOutput out = problem.estimate(state.theta, stream);
      if (!std::isfinite(out.log_zhat)) continue;
      state.log_zhat = out.log_zhat;
      state.selected_path = std::move(out.path);
      return state;
    } catch (const CapExceeded&) {
    } catch (const DegenerateTwist&) {
    }
  }
  throw Error("could not find an initial parameter with a finite likelihood estimate");
}

template <typename Param>
struct ChainRecord {
  std::vector<Param> theta;  ///< theta[0] is the initial state; theta[m] follows iteration m
  std::vector<double> log_zhat;
  std::vector<std::uint8_t> accepted;
  std::size_t cap_events = 0;
  std::size_t degenerate_events = 0;

  std::size_t iterations() const { return theta.empty() ? 0 : theta.size() - 1; }
  double acceptance_rate() const {
    if (iterations() == 0) return 0.0;
    std::size_t total = 0;
    for (std::size_t m = 1; m < accepted.size(); ++m) total += accepted[m];
    return static_cast<double>(total) / static_cast<double>(iterations());
  }
};

template <typename Param>
ChainRecord<Param> run_chain(const PmmhProblem<Param>& problem, std::size_t iterations, Stream& stream) {
  ChainRecord<Param> record;
  record.theta.reserve(iterations + 1);
  record.log_zhat.reserve(iterations + 1);
  record.accepted.reserve(iterations + 1);

  PmmhState<Param> state = initial_state(problem, stream);
  record.theta.push_back(state.theta);
  record.log_zhat.push_back(state.log_zhat);
  record.accepted.push_back(0);
  for (std::size_t m = 0; m < iterations; ++m) {
    state = pmmh_step(state, problem, stream);
    record.theta.push_back(state.theta);
    record.log_zhat.push_back(state.log_zhat);
    record.accepted.push_back(state.last_accepted ? 1 : 0);
  }
  record.cap_events = state.cap_events;
  record.degenerate_events = state.degenerate_events;
  return record;
}

/// Sample autocorrelations at lags 0..max_lag, with overall-mean centering and
/// the biased (1/n) covariance estimator.
std::vector<double> acf(std::span<const double> series, std::size_t max_lag);

enum class FilterAlgo { alive, bootstrap, alive_twisted, twisted_bootstrap };

FilterAlgo parse_filter_algo(const std::string& name);
std::string to_string(FilterAlgo algo);

/// Runs an alive (twist == nullptr) or alive twisted filter and returns log Z
/// with a latent path whose final index is drawn in proportion to the weights
/// of the first T-1 particles of the last generation.
FilterOutput alive_estimate(const HmmModel& model, const AbcKernel& kernel, const TwistFunction* twist,
                            std::span<const double> observations, std::size_t N, std::size_t cap,
                            Stream& stream);

// Stochastic volatility study.

struct SvTheta {
  double F = 0.0;
  double nu2 = 0.0;
  double gamma = 0.0;
};

/// F ~ N(F_mean, F_variance), nu^-2 ~ Ga(shape, scale), gamma^-1 ~ Ga(shape, scale).
struct SvPrior {
  double F_mean = 0.0;
  double F_variance = 0.15;
  double nu_shape = 2.0;
  double nu_scale = 100.0;
  double gamma_shape = 2.0;
  double gamma_scale = 1.0;

  void validate() const;
};

/// Normal walk on F; log-normal walks on nu2 and gamma.
struct SvProposal {
  double F_variance = 1.0;
  double log_nu2_variance = 0.5;
  double log_gamma_variance = 0.5;

  void validate() const;
};

/// Log prior density of (F, nu2, gamma) on the stored scale, including the
/// Jacobians of nu2 -> 1/nu2 and gamma -> 1/gamma.
double sv_log_prior(const SvPrior& prior, const SvTheta& theta);
Proposed<SvTheta> sv_propose(const SvProposal& proposal, const SvTheta& theta, Stream& stream);
SvTheta sv_sample_prior(const SvPrior& prior, Stream& stream);

/// Log density of Ga(shape, scale) at x (-inf off the support).
double log_gamma_density(double x, double shape, double scale);

struct SvStudy {
  StochVolParams fixed;  ///< alpha, beta, delta are taken from here
  SvPrior prior;
  SvProposal proposal;
  AbcKernel kernel;
  std::size_t N = 100;
  std::size_t cap = kDefaultCap;
  int lag = 5;
  bool twisted = false;
};

PmmhProblem<SvTheta> sv_problem(const SvStudy& study, std::span<const double> observations);

}  // namespace alive

#endif  // ALIVE_PMMH_HPP
