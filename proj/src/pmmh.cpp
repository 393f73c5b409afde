#include "alive/pmmh.hpp"

#include <cmath>
#include <memory>
#include <random>

namespace alive {

std::vector<double> acf(std::span<const double> series, std::size_t max_lag) {
  if (series.size() <= max_lag) throw InvalidArgument("acf needs more observations than max_lag");
  const double n = static_cast<double>(series.size());
  double mean = 0.0;
  for (double x : series) mean += x;
  mean /= n;
  double c0 = 0.0;
  for (double x : series) c0 += (x - mean) * (x - mean);
  if (!(c0 > 0.0)) throw InvalidArgument("zero variance");

  std::vector<double> out(max_lag + 1);
  for (std::size_t k = 0; k <= max_lag; ++k) {
    double ck = 0.0;
    for (std::size_t t = k; t < series.size(); ++t) ck += (series[t] - mean) * (series[t - k] - mean);
    out[k] = ck / c0;
  }
  return out;
}

FilterAlgo parse_filter_algo(const std::string& name) {
  if (name == "alive") return FilterAlgo::alive;
  if (name == "bootstrap") return FilterAlgo::bootstrap;
  if (name == "alive-twisted") return FilterAlgo::alive_twisted;
  if (name == "twisted-bootstrap") return FilterAlgo::twisted_bootstrap;
  throw InvalidArgument("unknown algorithm '" + name + "'");
}

std::string to_string(FilterAlgo algo) {
  switch (algo) {
    case FilterAlgo::alive: return "alive";
    case FilterAlgo::bootstrap: return "bootstrap";
    case FilterAlgo::alive_twisted: return "alive-twisted";
    case FilterAlgo::twisted_bootstrap: return "twisted-bootstrap";
  }
  return "alive";
}

FilterOutput alive_estimate(const HmmModel& model, const AbcKernel& kernel, const TwistFunction* twist,
                            std::span<const double> observations, std::size_t N, std::size_t cap,
                            Stream& stream) {
  AliveResult result = twist ? alive_twisted_filter(model, kernel, *twist, observations, N, cap, stream)
                             : alive_filter(model, kernel, observations, N, cap, stream);
  const std::size_t d = select_final_index(result.generations.back(), stream);
  return {result.estimate.log_total, trace_path(result.generations, d)};
}

void SvPrior::validate() const {
  if (!(F_variance > 0.0)) throw InvalidArgument("prior variance of F must be positive");
  if (!(nu_shape > 0.0 && nu_scale > 0.0 && gamma_shape > 0.0 && gamma_scale > 0.0)) {
    throw InvalidArgument("gamma prior shapes and scales must be positive");
  }
}

void SvProposal::validate() const {
  if (!(F_variance >= 0.0 && log_nu2_variance >= 0.0 && log_gamma_variance >= 0.0)) {
    throw InvalidArgument("random-walk variances must be non-negative");
  }
}

double log_gamma_density(double x, double shape, double scale) {
  if (!(x > 0.0) || !std::isfinite(x)) return -std::numeric_limits<double>::infinity();
  return (shape - 1.0) * std::log(x) - x / scale - std::lgamma(shape) - shape * std::log(scale);
}

double sv_log_prior(const SvPrior& prior, const SvTheta& theta) {
  if (!(theta.nu2 > 0.0) || !(theta.gamma > 0.0) || !std::isfinite(theta.F)) {
    return -std::numeric_limits<double>::infinity();
  }
  // For x = 1/y the density of y is p_x(1/y) / y^2.
  return log_normal_density(theta.F, prior.F_mean, prior.F_variance) +
         log_gamma_density(1.0 / theta.nu2, prior.nu_shape, prior.nu_scale) - 2.0 * std::log(theta.nu2) +
         log_gamma_density(1.0 / theta.gamma, prior.gamma_shape, prior.gamma_scale) -
         2.0 * std::log(theta.gamma);
}

Proposed<SvTheta> sv_propose(const SvProposal& proposal, const SvTheta& theta, Stream& stream) {
  Proposed<SvTheta> out;
  out.value.F = stream.gaussian(theta.F, proposal.F_variance);
  out.value.nu2 = std::exp(stream.gaussian(std::log(theta.nu2), proposal.log_nu2_variance));
  out.value.gamma = std::exp(stream.gaussian(std::log(theta.gamma), proposal.log_gamma_variance));
  // A log-normal walk has q(a | b) proportional to 1/a, so the ratio is a*/a.
  out.log_correction = (std::log(out.value.nu2) - std::log(theta.nu2)) +
                       (std::log(out.value.gamma) - std::log(theta.gamma));
  return out;
}

SvTheta sv_sample_prior(const SvPrior& prior, Stream& stream) {
  SvTheta theta;
  theta.F = stream.gaussian(prior.F_mean, prior.F_variance);
  std::gamma_distribution<double> precision(prior.nu_shape, prior.nu_scale);
  std::gamma_distribution<double> inverse_scale(prior.gamma_shape, prior.gamma_scale);
  theta.nu2 = 1.0 / precision(stream);
  theta.gamma = 1.0 / inverse_scale(stream);
  return theta;
}

PmmhProblem<SvTheta> sv_problem(const SvStudy& study, std::span<const double> observations) {
  study.prior.validate();
  study.proposal.validate();
  study.kernel.validate();
  if (study.twisted && study.lag < 1) throw InvalidArgument("twisted PMMH needs lag >= 1");
  auto data = std::make_shared<const std::vector<double>>(observations.begin(), observations.end());

  PmmhProblem<SvTheta> problem;
  problem.log_prior = [prior = study.prior](const SvTheta& t) { return sv_log_prior(prior, t); };
  problem.propose = [proposal = study.proposal](const SvTheta& t, Stream& s) {
    return sv_propose(proposal, t, s);
  };
  problem.sample_prior = [prior = study.prior](Stream& s) { return sv_sample_prior(prior, s); };
  problem.estimate = [study, data](const SvTheta& t, Stream& s) {
    StochVolParams params = study.fixed;
    params.F = t.F;
    params.nu2 = t.nu2;
    params.gamma = t.gamma;
    const HmmModel model = sv_model(params);
    if (!study.twisted) return alive_estimate(model, study.kernel, nullptr, *data, study.N, study.cap, s);
    const TwistPtr twist = sv_twist(params, study.lag);
    return alive_estimate(model, study.kernel, twist.get(), *data, study.N, study.cap, s);
  };
  return problem;
}

}  // namespace alive
