#include "alive/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <limits>

#include "alive/error.hpp"

namespace alive {

MeanSe mean_and_se(std::span<const double> values) {
  if (values.size() < 2) throw InvalidArgument("mean_and_se needs at least two values");
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

LogMoments log_moments(std::span<const double> log_values) {
  if (log_values.size() < 2) throw InvalidArgument("variance needs at least two values");
  const double shift = *std::max_element(log_values.begin(), log_values.end());
  if (!std::isfinite(shift)) throw InvalidArgument("log values must be finite");
  std::vector<double> scaled(log_values.size());
  for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] = std::exp(log_values[i] - shift);
  const MeanSe m = mean_and_se(scaled);
  const double n = static_cast<double>(scaled.size());
  const double variance = m.se * m.se * n;
  return {shift + std::log(m.mean),
          variance > 0.0 ? 2.0 * shift + std::log(variance) : -std::numeric_limits<double>::infinity()};
}

MeanSe scaled_mean_and_se(std::span<const double> log_values, double log_scale) {
  std::vector<double> scaled(log_values.size());
  for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] = std::exp(log_values[i] - log_scale);
  return mean_and_se(scaled);
}

double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw InvalidArgument("empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw InvalidArgument("empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double ks_critical(double effective_n, double alpha) {
  return std::sqrt(-0.5 * std::log(alpha / 2.0)) / std::sqrt(effective_n);
}

double chi_square_statistic(std::span<const double> observed, std::span<const double> expected) {
  if (observed.size() != expected.size()) throw InvalidArgument("chi-square bins differ in length");
  double stat = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (!(expected[i] > 0.0)) throw InvalidArgument("chi-square expected counts must be positive");
    const double d = observed[i] - expected[i];
    stat += d * d / expected[i];
  }
  return stat;
}

double chi_square_critical(double degrees_of_freedom, double alpha) {
  const boost::math::chi_squared dist(degrees_of_freedom);
  return boost::math::quantile(boost::math::complement(dist, alpha));
}

}  // namespace alive
