#include "oracles.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>

namespace oracle {

namespace {

double acceptance(const alive::DiscreteHmmParams& p, std::size_t s, double y) {
  const auto& set = p.ball[static_cast<std::size_t>(y)];
  double mass = 0.0;
  for (std::size_t u = 0; u < set.size(); ++u) {
    if (set[u]) mass += p.emission[s][u];
  }
  return mass;
}

// Sum over latent paths k_from..k_last of prod transition * acceptance, starting from `start`.
double enumerate(const alive::DiscreteHmmParams& p, std::span<const double> y, std::size_t start, std::size_t from) {
  if (from == y.size()) return 1.0;
  double total = 0.0;
  for (std::size_t s = 0; s < p.num_states(); ++s) {
    total += p.transition[start][s] * acceptance(p, s, y[from]) * enumerate(p, y, s, from + 1);
  }
  return total;
}

std::vector<double> random_row(std::size_t n, alive::Stream& stream) {
  std::vector<double> row(n);
  double total = 0.0;
  for (auto& v : row) total += v = 0.05 + stream.uniform();
  for (auto& v : row) v /= total;
  // Put the rounding residue on the last entry so the row sums to 1 within 1e-12.
  double partial = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) partial += row[i];
  row.back() = 1.0 - partial;
  return row;
}

}  // namespace

double brute_force_discrete_log_marginal(const alive::DiscreteHmmParams& p, std::span<const double> y) {
  double total = 0.0;
  for (std::size_t k0 = 0; k0 < p.num_states(); ++k0) total += p.initial[k0] * enumerate(p, y, k0, 0);
  return std::log(total);
}

std::vector<std::vector<double>> brute_force_future_acceptance(const alive::DiscreteHmmParams& p,
                                                               std::span<const double> y) {
  std::vector<std::vector<double>> out(y.size(), std::vector<double>(p.num_states()));
  for (std::size_t n = 0; n < y.size(); ++n) {
    for (std::size_t s = 0; s < p.num_states(); ++s) out[n][s] = enumerate(p, y, s, n + 1);
  }
  return out;
}

double integrate(const std::function<double(double)>& f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-13);
}

alive::DiscreteHmmParams random_discrete(std::size_t states, std::size_t symbols, alive::Stream& stream) {
  alive::DiscreteHmmParams p;
  p.initial = random_row(states, stream);
  for (std::size_t s = 0; s < states; ++s) {
    p.transition.push_back(random_row(states, stream));
    p.emission.push_back(random_row(symbols, stream));
  }
  p.ball.assign(symbols, std::vector<bool>(symbols, false));
  for (std::size_t y = 0; y < symbols; ++y) {
    p.ball[y][y] = true;
    for (std::size_t u = 0; u < symbols; ++u) {
      if (u != y && stream.uniform() < 0.3) p.ball[y][u] = true;
    }
  }
  return p;
}

double normal_cdf(double x, double mean, double variance) {
  return boost::math::cdf(boost::math::normal(mean, std::sqrt(variance)), x);
}

}  // namespace oracle
