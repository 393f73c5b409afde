#ifndef ALIVE_STATS_HPP
#define ALIVE_STATS_HPP

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace alive {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_and_se(std::span<const double> values);

/// Mean and unbiased sample variance of exp(log_values), returned as logs and
/// computed after shifting by the largest value. log_variance is -inf when all
/// values coincide.
struct LogMoments {
  double log_mean = 0.0;
  double log_variance = 0.0;
};

LogMoments log_moments(std::span<const double> log_values);

/// Mean and standard error of exp(log_values) scaled by exp(-log_scale), so
/// estimates of very small constants can be compared on a unit scale.
MeanSe scaled_mean_and_se(std::span<const double> log_values, double log_scale);

/// Kolmogorov-Smirnov statistic of a sample against a continuous CDF.
double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf);

/// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b);

/// Asymptotic critical value of the KS statistic at the given level for
/// effective sample size n (n*m/(n+m) in the two-sample case).
double ks_critical(double effective_n, double alpha);

double chi_square_statistic(std::span<const double> observed, std::span<const double> expected);
double chi_square_critical(double degrees_of_freedom, double alpha);

}  // namespace alive

#endif  // ALIVE_STATS_HPP
