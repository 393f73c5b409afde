#ifndef ALIVE_SELFTEST_HPP
#define ALIVE_SELFTEST_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "alive/models.hpp"

namespace alive {

enum class SelftestLevel { quick, full };

SelftestLevel parse_selftest_level(const std::string& name);

struct CriterionResult {
  std::string id;
  std::string title;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Three-state, three-symbol HMM whose acceptance sets are exact symbol matches.
DiscreteHmmParams oracle_discrete_params();
/// Fixed length-5 observation sequence for the discrete oracle.
std::vector<double> oracle_discrete_observations();

struct SelftestOptions {
  SelftestLevel level = SelftestLevel::full;
  std::uint64_t seed = 20240601;
  std::size_t threads = 1;
};

/// Mean of (N-1)/(T-1) under i.i.d. Bernoulli weights against p.
CriterionResult check_negative_binomial(const SelftestOptions& options);
/// Alive and alive twisted estimates against the discrete forward recursion.
CriterionResult check_alive_exactness(const SelftestOptions& options);
/// Bootstrap and twisted bootstrap estimates against the Kalman marginal.
CriterionResult check_kalman(const SelftestOptions& options);
/// Two-sample KS test of log Z from the alive filter and the constant-twist alive twisted filter.
CriterionResult check_constant_twist_reduction(const SelftestOptions& options);
/// Variance of the alive estimate against the alive twisted estimate on the linear Gaussian model.
CriterionResult check_variance_reduction(const SelftestOptions& options);
/// PMMH occupancy on a two-point parameter grid against the exact posterior.
CriterionResult check_pmmh_grid(const SelftestOptions& options);
/// Stochastic volatility PMMH with both filters: acceptance rates and ACF of F.
CriterionResult check_sv_pipeline(const SelftestOptions& options);

/// quick: negative binomial, discrete oracle, Kalman and constant-twist
/// reduction at reduced scale. full: every check at full scale.
std::vector<CriterionResult> run_selftest(const SelftestOptions& options);

/// Results as JSON, leaving out wall-clock times so reruns compare equal.
std::string selftest_report_json(const std::vector<CriterionResult>& results);

}  // namespace alive

#endif  // ALIVE_SELFTEST_HPP
