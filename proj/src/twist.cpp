#include "alive/twist.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/tools/roots.hpp>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "alive/error.hpp"

namespace alive {

namespace {

// Floor for h and Q(h): lookahead densities far in the tails underflow.
const double kLogFloor = std::log(1e-300);

double floored(double log_value) { return std::max(log_value, kLogFloor); }

void check_twist_value(double log_value, const char* what) {
  if (std::isnan(log_value) || log_value == std::numeric_limits<double>::infinity()) {
    throw DegenerateTwist(std::string(what) + " is not finite");
  }
}

void check_twist_sum(double log_sum, const char* what) {
  if (!std::isfinite(log_sum)) throw DegenerateTwist(std::string(what) + " is zero or not finite");
}

/// Exact draw from a log-concave density exp(l) by rejection from the
/// piecewise-exponential hull of its tangents at `points`, which must straddle
/// the mode (first slope > 0, last slope < 0).
template <typename Log, typename Slope>
double sample_log_concave(const Log& l, const Slope& dl, const std::vector<double>& points, Stream& stream,
                          int max_attempts) {
  std::vector<double> x = points;
  x.erase(std::unique(x.begin(), x.end()), x.end());
  const std::size_t m = x.size();
  std::vector<double> value(m), slope(m), lo(m), hi(m), log_mass(m);
  for (std::size_t j = 0; j < m; ++j) {
    value[j] = l(x[j]);
    slope[j] = dl(x[j]);
  }
  // Points closer than the law's width collapse in floating point; the law is
  // then a point mass at working precision.
  if (m < 2 || !(slope.front() > 0.0) || !(slope.back() < 0.0)) return x[m / 2];
  auto tangent = [&](std::size_t j, double k) { return value[j] + slope[j] * (k - x[j]); };
  lo[0] = -std::numeric_limits<double>::infinity();
  hi[m - 1] = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j + 1 < m; ++j) {
    const double z = slope[j] == slope[j + 1]
                         ? 0.5 * (x[j] + x[j + 1])
                         : (value[j + 1] - value[j] - slope[j + 1] * x[j + 1] + slope[j] * x[j]) /
                               (slope[j] - slope[j + 1]);
    hi[j] = lo[j + 1] = std::clamp(z, x[j], x[j + 1]);
  }
  for (std::size_t j = 0; j < m; ++j) {
    const double d = slope[j];
    const double width = hi[j] - lo[j];
    if (std::abs(d) < 1e-300) {
      log_mass[j] = value[j] + std::log(width);
    } else if (d > 0.0) {
      log_mass[j] = tangent(j, hi[j]) + std::log(-std::expm1(-d * width)) - std::log(d);
    } else {
      log_mass[j] = tangent(j, lo[j]) + std::log(-std::expm1(d * width)) - std::log(-d);
    }
  }
  const double top = *std::max_element(log_mass.begin(), log_mass.end());
  if (!std::isfinite(top)) return x[m / 2];
  std::vector<double> mass(m);
  for (std::size_t j = 0; j < m; ++j) mass[j] = std::exp(log_mass[j] - top);

  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    const std::size_t j = stream.categorical(mass);
    const double d = slope[j];
    const double width = hi[j] - lo[j];
    const double u = stream.uniform();
    double k;
    if (std::abs(d) < 1e-300) {
      k = lo[j] + u * width;
    } else if (d > 0.0) {
      k = hi[j] + std::log1p(u * std::expm1(-d * width)) / d;
    } else {
      k = lo[j] + std::log1p(u * std::expm1(d * width)) / d;
    }
    if (std::log(stream.uniform()) < l(k) - tangent(j, k)) return k;
  }
  throw DegenerateTwist("twisted transition rejection sampler did not accept");
}

/// Gauss-Hermite rule for integrals against exp(-x^2), by Golub-Welsch.
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> log_weights;

  explicit GaussHermite(int n) {
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) {
      jacobi(i, i - 1) = jacobi(i - 1, i) = std::sqrt(0.5 * i);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
    for (int i = 0; i < n; ++i) {
      nodes.push_back(solver.eigenvalues()(i));
      const double v = solver.eigenvectors()(0, i);
      log_weights.push_back(std::log(std::sqrt(std::numbers::pi) * v * v));
    }
  }
};

const GaussHermite& hermite_rule() {
  static const GaussHermite rule(20);
  return rule;
}

// Gaussian lookahead machinery shared by the LG twist: given k' ~ N(mean, var)
// and h(k') = N(y; slope k', obs_var), Q(h) and the conjugate update are exact.
struct LinearLookahead {
  double slope = 1.0;
  double obs_var = 1.0;
};

class LinearGaussianTwist final : public TwistFunction {
 public:
  LinearGaussianTwist(const LinearGaussianParams& p, int lag) : p_(p), lag_(lag) {
    p_.validate();
    if (lag < 1) throw InvalidArgument("twist lag must be >= 1");
  }

  int lag() const override { return lag_; }
  std::string description() const override {
    std::ostringstream out;
    out << "linear-gaussian lookahead, lag " << lag_;
    return out.str();
  }

  double log_h(std::span<const double> y, std::size_t step, double k) const override {
    const int L = effective_lag(lag_, step, y.size());
    if (L == 0) return 0.0;
    const LinearLookahead la = lookahead(L);
    return floored(log_normal_density(y[step + L], la.slope * k, la.obs_var));
  }

  double log_qh(std::span<const double> y, std::size_t step, double k_prev) const override {
    return log_integral(y, step, p_.phi * k_prev, p_.nu2);
  }

  double sample_twisted(std::span<const double> y, std::size_t step, double k_prev,
                        Stream& stream) const override {
    return sample(y, step, p_.phi * k_prev, p_.nu2, stream);
  }

  double log_qh_initial(std::span<const double> y) const override {
    return log_integral(y, 0, 0.0, first_variance());
  }

  double sample_twisted_initial(std::span<const double> y, Stream& stream) const override {
    return sample(y, 0, 0.0, first_variance(), stream);
  }

 private:
  double first_variance() const { return p_.nu2 * (1.0 + p_.phi * p_.phi); }

  LinearLookahead lookahead(int L) const {
    LinearLookahead la{1.0, 0.0};
    for (int j = 0; j < L; ++j) {
      la.slope *= p_.phi;
      la.obs_var = p_.phi * p_.phi * la.obs_var + p_.nu2;
    }
    // The recursion above adds nu2 L times starting from the observed state,
    // giving nu2 * sum_{j<L} phi^{2j}.
    la.obs_var += p_.tau2;
    return la;
  }

  double log_integral(std::span<const double> y, std::size_t step, double mean, double var) const {
    const int L = effective_lag(lag_, step, y.size());
    if (L == 0) return 0.0;
    const LinearLookahead la = lookahead(L);
    return floored(log_normal_density(y[step + L], la.slope * mean, la.obs_var + la.slope * la.slope * var));
  }

  double sample(std::span<const double> y, std::size_t step, double mean, double var,
                Stream& stream) const {
    const int L = effective_lag(lag_, step, y.size());
    if (L == 0) return stream.gaussian(mean, var);
    const LinearLookahead la = lookahead(L);
    const double precision = 1.0 / var + la.slope * la.slope / la.obs_var;
    const double post_mean = (mean / var + la.slope * y[step + L] / la.obs_var) / precision;
    return stream.gaussian(post_mean, 1.0 / precision);
  }

  LinearGaussianParams p_;
  int lag_;
};

class StochVolTwist final : public TwistFunction {
 public:
  StochVolTwist(const StochVolParams& p, int lag) : p_(p), lag_(lag) {
    p_.validate();
    if (lag < 1) throw InvalidArgument("twist lag must be >= 1");
    c_ = 2.0 * p_.gamma * p_.gamma;
    log_norm_ = -0.5 * std::log(2.0 * std::numbers::pi * c_);
    for (int l = 0; l <= lag; ++l) slopes_.push_back(std::pow(p_.F, l));
  }

  int lag() const override { return lag_; }
  std::string description() const override {
    std::ostringstream out;
    out << "stochastic-volatility lookahead, lag " << lag_
        << ", gaussian surrogate N(delta e^{m/2}, 2 gamma^2 e^m) at m = F^lag k";
    return out.str();
  }

  double log_h(std::span<const double> y, std::size_t step, double k) const override {
    const int L = effective_lag(lag_, step, y.size());
    if (L == 0) return 0.0;
    return floored(surrogate(y[step + L], slopes_[L] * k));
  }

  double log_qh(std::span<const double> y, std::size_t step, double k_prev) const override {
    return log_integral(y, step, p_.F * k_prev, p_.nu2);
  }

  double sample_twisted(std::span<const double> y, std::size_t step, double k_prev,
                        Stream& stream) const override {
    return sample(y, step, p_.F * k_prev, p_.nu2, stream);
  }

  double log_qh_initial(std::span<const double> y) const override {
    return log_integral(y, 0, 0.0, first_variance());
  }

  double sample_twisted_initial(std::span<const double> y, Stream& stream) const override {
    return sample(y, 0, 0.0, first_variance(), stream);
  }

 private:
  double first_variance() const { return p_.nu2 * (1.0 + p_.F * p_.F); }

  // Same value as sv_surrogate_log_density with the constants precomputed.
  double surrogate(double y, double m) const {
    const double w = y == 0.0 ? 0.0 : y * std::exp(-0.5 * m);
    const double z = w - p_.delta;
    return log_norm_ - 0.5 * m - z * z / (2.0 * c_);
  }

  // log f(k) + log h(k) for f = N(mean, var): the unnormalised twisted density.
  double log_joint(double target, double slope, double mean, double var, double k) const {
    const double d = k - mean;
    return -0.5 * std::log(2.0 * std::numbers::pi * var) - d * d / (2.0 * var) + surrogate(target, slope * k);
  }

  struct Peak {
    double mode = 0.0;
    double scale = 1.0;  ///< (-d2/dk2 log f h)^{-1/2} at the mode
  };

  // With delta = 0, log h = -s k / 2 - A e^{-s k} + const is concave, so f h
  // has a unique mode where its decreasing derivative vanishes.
  Peak peak(double target, double slope, double mean, double var) const {
    Peak pk;
    if (p_.delta == 0.0) {
      const double A = target * target / (4.0 * p_.gamma * p_.gamma);
      // A s e^{-s k}; may overflow to +-inf far from the mode, where only the sign is used.
      const double log_a = A == 0.0 ? 0.0 : std::log(A);
      auto tail = [&](double k) { return A == 0.0 ? 0.0 : slope * std::exp(log_a - slope * k); };
      auto derivative = [&](double k) { return tail(k) - (k - mean) / var - 0.5 * slope; };
      const double sd = std::sqrt(var);
      double lo = mean, hi = mean;
      const double d0 = derivative(mean);
      if (d0 > 0.0) {
        for (double step = sd; derivative(hi) > 0.0; step *= 2.0) {
          lo = hi;
          hi = mean + step;
        }
      } else if (d0 < 0.0) {
        for (double step = sd; derivative(lo) < 0.0; step *= 2.0) {
          hi = lo;
          lo = mean - step;
        }
      }
      // Bisect until the derivative is finite at both ends, then Newton.
      while (lo < hi && !(std::isfinite(derivative(lo)) && std::isfinite(derivative(hi)))) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (derivative(mid) > 0.0 ? lo : hi) = mid;
      }
      if (lo == hi) {
        pk.mode = lo;
      } else {
        std::uintmax_t iterations = 100;
        pk.mode = boost::math::tools::newton_raphson_iterate(
            [&](double k) {
              const double t = tail(k);
              return std::make_pair(t - (k - mean) / var - 0.5 * slope, -1.0 / var - slope * t);
            },
            0.5 * (lo + hi),
            lo, hi, 45, iterations);
      }
      const double curvature = 1.0 / var + slope * tail(pk.mode);
      pk.scale = 1.0 / std::sqrt(curvature);
      return pk;
    }
    // General delta: grid maximum over mean +- 10 sd and a finite-difference curvature.
    constexpr int kGrid = 512;
    const double sd = std::sqrt(var);
    const double step = 20.0 * sd / kGrid;
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= kGrid; ++i) {
      const double k = mean - 10.0 * sd + step * i;
      const double v = log_joint(target, slope, mean, var, k);
      if (v > best) {
        best = v;
        pk.mode = k;
      }
    }
    const double d = 0.25 * step;
    const double second = (log_joint(target, slope, mean, var, pk.mode + d) - 2.0 * best +
                           log_joint(target, slope, mean, var, pk.mode - d)) / (d * d);
    pk.scale = second < 0.0 && std::isfinite(second) ? std::min(1.0 / std::sqrt(-second), sd) : sd;
    return pk;
  }

  // Gauss-Hermite rule centred on the mode of f h and scaled by its curvature.
  double log_integral(std::span<const double> y, std::size_t step, double mean, double var) const {
    const int L = effective_lag(lag_, step, y.size());
    if (L == 0) return 0.0;
    const double slope = slopes_[L];
    const double target = y[step + L];
    if (slope == 0.0) return floored(surrogate(target, 0.0));
    const Peak pk = peak(target, slope, mean, var);
    const GaussHermite& rule = hermite_rule();
    const double spread = std::sqrt(2.0) * pk.scale;
    double top = -std::numeric_limits<double>::infinity();
    double terms[64];
    const std::size_t n = rule.nodes.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double x = rule.nodes[i];
      const double k = pk.mode + spread * x;
      const double d = k - mean;
      terms[i] = rule.log_weights[i] + x * x - d * d / (2.0 * var) + surrogate(target, slope * k);
      top = std::max(top, terms[i]);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += std::exp(terms[i] - top);
    return floored(top + std::log(total) + std::log(spread) - 0.5 * std::log(2.0 * std::numbers::pi * var));
  }

  // Upper bound of the surrogate over m in [lo, hi], for delta != 0.
  double log_envelope(double target, double lo, double hi) const {
    double best = -std::numeric_limits<double>::infinity();
    constexpr int kGrid = 512;
    for (int i = 0; i <= kGrid; ++i) {
      best = std::max(best, surrogate(target, lo + (hi - lo) * i / kGrid));
    }
    return best + std::log(1.05);
  }

  double sample(std::span<const double> y, std::size_t step, double mean, double var,
                Stream& stream) const {
    const int L = effective_lag(lag_, step, y.size());
    if (L == 0) return stream.gaussian(mean, var);
    const double slope = slopes_[L];
    const double target = y[step + L];
    if (slope == 0.0) return stream.gaussian(mean, var);
    constexpr int kMaxAttempts = 1'000'000;

    if (p_.delta == 0.0) {
      // f h is log-concave here: reject from its tangent hull around the mode.
      const Peak pk = peak(target, slope, mean, var);
      const double A = target * target / (4.0 * p_.gamma * p_.gamma);
      auto log_density = [&](double k) { return log_joint(target, slope, mean, var, k); };
      auto log_slope = [&](double k) {
        const double tail = A == 0.0 ? 0.0 : slope * std::exp(std::log(A) - slope * k);
        return tail - (k - mean) / var - 0.5 * slope;
      };
      std::vector<double> points;
      for (double c : {-3.0, -1.0, 0.0, 1.0, 3.0}) points.push_back(pk.mode + c * pk.scale);
      return sample_log_concave(log_density, log_slope, points, stream, kMaxAttempts);
    }

    // Rejection from f with the envelope taken over mean +- 10 sd, where f
    // puts all but ~1e-23 of its mass.
    const double sd = std::sqrt(var);
    const double a = slope * (mean - 10.0 * sd);
    const double b = slope * (mean + 10.0 * sd);
    const double envelope = log_envelope(target, std::min(a, b), std::max(a, b));
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
      const double k = stream.gaussian(mean, var);
      const double log_ratio = surrogate(target, slope * k) - envelope;
      if (std::log(stream.uniform()) < std::min(0.0, log_ratio)) return k;
    }
    throw DegenerateTwist("twisted transition rejection sampler did not accept");
  }

  StochVolParams p_;
  int lag_;
  double c_ = 0.0;
  double log_norm_ = 0.0;
  std::vector<double> slopes_;  ///< F^l for l = 0..lag
};

class ConstantTwist final : public TwistFunction {
 public:
  ConstantTwist(HmmModel model, double value) : model_(std::move(model)), log_value_(std::log(value)) {
    if (!(value > 0.0) || !std::isfinite(value)) throw InvalidArgument("constant twist must be positive");
  }

  std::string description() const override { return "constant"; }
  double log_h(std::span<const double>, std::size_t, double) const override { return log_value_; }
  double log_qh(std::span<const double>, std::size_t, double) const override { return log_value_; }
  double sample_twisted(std::span<const double>, std::size_t, double k_prev,
                        Stream& stream) const override {
    return model_.sample_transition(k_prev, stream);
  }
  double log_qh_initial(std::span<const double>) const override { return log_value_; }
  double sample_twisted_initial(std::span<const double>, Stream& stream) const override {
    return model_.sample_first(stream);
  }

 private:
  HmmModel model_;
  double log_value_;
};

class DiscreteTableTwist final : public TwistFunction {
 public:
  DiscreteTableTwist(const DiscreteHmmParams& p, std::vector<std::vector<double>> table)
      : p_(p), table_(std::move(table)) {
    p_.validate();
    const std::size_t S = p_.num_states();
    for (const auto& row : table_) {
      if (row.size() != S) throw InvalidArgument("twist table rows need one entry per state");
      for (double v : row) {
        if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("twist table entries must be positive");
      }
    }
    first_law_.assign(S, 0.0);
    for (std::size_t i = 0; i < S; ++i) {
      for (std::size_t j = 0; j < S; ++j) first_law_[j] += p_.initial[i] * p_.transition[i][j];
    }
  }

  std::string description() const override { return "discrete table"; }

  double log_h(std::span<const double>, std::size_t step, double k) const override {
    return std::log(row(step)[state(k)]);
  }

  double log_qh(std::span<const double>, std::size_t step, double k_prev) const override {
    return log_expectation(p_.transition[state(k_prev)], row(step));
  }

  double sample_twisted(std::span<const double>, std::size_t step, double k_prev,
                        Stream& stream) const override {
    return draw(p_.transition[state(k_prev)], row(step), stream);
  }

  double log_qh_initial(std::span<const double>) const override {
    return log_expectation(first_law_, row(0));
  }

  double sample_twisted_initial(std::span<const double>, Stream& stream) const override {
    return draw(first_law_, row(0), stream);
  }

 private:
  const std::vector<double>& row(std::size_t step) const {
    if (step >= table_.size()) throw InvalidArgument("twist table shorter than the observation sequence");
    return table_[step];
  }

  std::size_t state(double k) const { return static_cast<std::size_t>(std::lround(k)); }

  static double log_expectation(std::span<const double> law, std::span<const double> h) {
    double total = 0.0;
    for (std::size_t s = 0; s < law.size(); ++s) total += law[s] * h[s];
    return std::log(total);
  }

  static double draw(std::span<const double> law, std::span<const double> h, Stream& stream) {
    std::vector<double> w(law.size());
    for (std::size_t s = 0; s < law.size(); ++s) w[s] = law[s] * h[s];
    return static_cast<double>(stream.categorical(w));
  }

  DiscreteHmmParams p_;
  std::vector<std::vector<double>> table_;
  std::vector<double> first_law_;
};

void swap_particles(ParticleGeneration& gen, std::size_t a, std::size_t b) {
  std::swap(gen.states[a], gen.states[b]);
  std::swap(gen.pseudo_obs[a], gen.pseudo_obs[b]);
  std::swap(gen.weights[a], gen.weights[b]);
  std::swap(gen.ancestors[a], gen.ancestors[b]);
}

}  // namespace

int effective_lag(int lag, std::size_t step, std::size_t T) {
  if (step >= T) return 0;
  const std::size_t remaining = T - 1 - step;
  return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(std::max(lag, 0)), remaining));
}

TwistPtr lg_twist(const LinearGaussianParams& params, int lag) {
  return std::make_shared<LinearGaussianTwist>(params, lag);
}

TwistPtr sv_twist(const StochVolParams& params, int lag) {
  return std::make_shared<StochVolTwist>(params, lag);
}

TwistPtr constant_twist(const HmmModel& model, double value) {
  return std::make_shared<ConstantTwist>(model, value);
}

TwistPtr discrete_table_twist(const DiscreteHmmParams& params, std::vector<std::vector<double>> table) {
  return std::make_shared<DiscreteTableTwist>(params, std::move(table));
}

std::vector<std::vector<double>> discrete_oracle_table(const DiscreteHmmParams& params,
                                                       std::span<const double> observations) {
  params.validate();
  const std::size_t S = params.num_states();
  const std::size_t O = params.num_symbols();
  const std::size_t T = observations.size();
  std::vector<std::vector<double>> table(T, std::vector<double>(S, 1.0));
  for (std::size_t n = T; n-- > 1;) {
    const auto& set = params.ball[static_cast<std::size_t>(std::lround(observations[n]))];
    std::vector<double> accept(S, 0.0);
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t u = 0; u < O; ++u) {
        if (set[u]) accept[s] += params.emission[s][u];
      }
    }
    for (std::size_t s = 0; s < S; ++s) {
      double total = 0.0;
      for (std::size_t t = 0; t < S; ++t) total += params.transition[s][t] * accept[t] * table[n][t];
      table[n - 1][s] = total;
    }
    // Rescale each row; a constant factor per step does not change the twist.
    const double top = *std::max_element(table[n - 1].begin(), table[n - 1].end());
    for (auto& v : table[n - 1]) v = std::max(v / top, 1e-300);
  }
  return table;
}

BootstrapResult twisted_bootstrap_filter(const HmmModel& model, const TwistFunction& twist,
                                         std::span<const double> observations, std::size_t N,
                                         Stream& stream) {
  if (!model.log_observation_density) {
    throw InvalidArgument("twisted bootstrap filter needs an observation density");
  }
  if (N < 2) throw InvalidArgument("twisted bootstrap filter needs N >= 2");
  if (observations.empty()) throw InvalidArgument("no observations");

  BootstrapResult result;
  const double log_n = std::log(static_cast<double>(N));
  std::vector<double> log_qh(N), plain(N), tilted(N), log_h(N), log_wh(N);

  for (std::size_t step = 0; step < observations.size(); ++step) {
    WeightedGeneration gen;
    gen.states.resize(N);
    gen.log_weights.resize(N);
    TwistStepStats stats;
    double log_phi_h = 0.0;  // log Phi(h): Q(h) averaged over the W-weighted previous generation

    const std::size_t u = stream.uniform_int(N);
    stats.twisted_index = u;
    if (step == 0) {
      log_phi_h = twist.log_qh_initial(observations);
      check_twist_value(log_phi_h, "Q(h)");
      stats.log_qh_sum = log_phi_h + log_n;
      gen.ancestors.assign(N, kNoAncestor);
      for (std::size_t i = 0; i < N; ++i) {
        gen.states[i] = i == u ? twist.sample_twisted_initial(observations, stream) : model.sample_first(stream);
      }
    } else {
      const WeightedGeneration& prev = result.generations.back();
      for (std::size_t j = 0; j < N; ++j) {
        log_qh[j] = twist.log_qh(observations, step, prev.states[j]);
        check_twist_value(log_qh[j], "Q(h)");
        tilted[j] = prev.log_weights[j] + log_qh[j];
      }
      const double log_w_total = log_sum_exp(prev.log_weights);
      const double log_tilted_total = log_sum_exp(tilted);
      check_twist_sum(log_tilted_total, "sum of W Q(h)");
      stats.log_qh_sum = log_tilted_total;
      log_phi_h = log_tilted_total - log_w_total;
      for (std::size_t j = 0; j < N; ++j) {
        plain[j] = std::exp(prev.log_weights[j] - log_w_total);
        tilted[j] = std::exp(tilted[j] - log_tilted_total);
      }
      const DiscreteSampler plain_sampler(plain);
      const DiscreteSampler tilted_sampler(tilted);
      gen.ancestors.resize(N);
      for (std::size_t i = 0; i < N; ++i) {
        gen.ancestors[i] = i == u ? tilted_sampler(stream) : plain_sampler(stream);
      }
      for (std::size_t i = 0; i < N; ++i) {
        const double k_prev = prev.states[gen.ancestors[i]];
        gen.states[i] = i == u ? twist.sample_twisted(observations, step, k_prev, stream)
                               : model.sample_transition(k_prev, stream);
      }
    }

    for (std::size_t i = 0; i < N; ++i) {
      gen.log_weights[i] = model.log_observation_density(observations[step], gen.states[i]);
      log_h[i] = twist.log_h(observations, step, gen.states[i]);
      check_twist_value(log_h[i], "h");
      log_wh[i] = gen.log_weights[i] + log_h[i];
    }
    const double log_mean_w = log_sum_exp(gen.log_weights) - log_n;
    if (!std::isfinite(log_mean_w)) throw ParticleDeath(step);
    stats.log_h_sum = log_sum_exp(log_h);
    check_twist_sum(stats.log_h_sum, "sum of h");
    stats.log_wh_sum = log_sum_exp(log_wh);

    result.estimate.add(log_mean_w + log_phi_h - (stats.log_h_sum - log_n));
    result.twist_stats.push_back(stats);
    result.generations.push_back(std::move(gen));
  }
  return result;
}

AliveResult alive_twisted_filter(const HmmModel& model, const AbcKernel& kernel,
                                 const TwistFunction& twist, std::span<const double> observations,
                                 std::size_t N, std::size_t cap, Stream& stream) {
  kernel.validate();
  if (N < 2) throw InvalidArgument("alive twisted filter needs N >= 2");
  if (cap < N) throw InvalidArgument("trial cap must be at least N");
  if (observations.empty()) throw InvalidArgument("no observations");

  AliveResult result;
  result.generations.reserve(observations.size());
  const double log_n_minus_1 = std::log(static_cast<double>(N - 1));
  std::vector<double> pool_weights, log_qh, log_h, log_wh;
  std::vector<std::size_t> pool;

  for (std::size_t step = 0; step < observations.size(); ++step) {
    const double y = observations[step];
    ParticleGeneration gen;
    TwistStepStats stats;

    // Step 1: the twisted particle.
    Proposal twisted;
    if (step == 0) {
      const double log_first = twist.log_qh_initial(observations);
      check_twist_value(log_first, "Q(h)");
      stats.log_qh_sum = log_first + log_n_minus_1;
      twisted.state = twist.sample_twisted_initial(observations, stream);
    } else {
      const ParticleGeneration& prev = result.generations.back();
      pool.clear();
      log_qh.clear();
      for (std::size_t j = 0; j + 1 < prev.stopping_time; ++j) {
        if (prev.weights[j] == 0) continue;
        pool.push_back(j);
        log_qh.push_back(twist.log_qh(observations, step, prev.states[j]));
        check_twist_value(log_qh.back(), "Q(h)");
      }
      stats.log_qh_sum = log_sum_exp(log_qh);
      check_twist_sum(stats.log_qh_sum, "sum of W Q(h)");
      std::vector<double> w(log_qh.size());
      for (std::size_t j = 0; j < w.size(); ++j) w[j] = std::exp(log_qh[j] - stats.log_qh_sum);
      twisted.ancestor = pool[stream.categorical(w)];
      twisted.state = twist.sample_twisted(observations, step, prev.states[twisted.ancestor], stream);
    }
    twisted.pseudo_obs = model.sample_observation(twisted.state, stream);
    gen.states.push_back(twisted.state);
    gen.pseudo_obs.push_back(twisted.pseudo_obs);
    gen.weights.push_back(static_cast<std::uint8_t>(kernel.weight(twisted.pseudo_obs, y)));
    gen.ancestors.push_back(twisted.ancestor);

    // Steps 2-3: untwisted particles until N acceptances.
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

    // Step 4: the twisted particle takes a uniform slot among the first T-1.
    const std::size_t T = gen.stopping_time;
    const std::size_t slot = stream.uniform_int(T - 1);
    swap_particles(gen, 0, slot);
    gen.twisted_index = slot;
    stats.twisted_index = slot;

    log_h.resize(T - 1);
    log_wh.clear();
    for (std::size_t i = 0; i + 1 < T; ++i) {
      log_h[i] = twist.log_h(observations, step, gen.states[i]);
      check_twist_value(log_h[i], "h");
      if (gen.weights[i] == 1) log_wh.push_back(log_h[i]);
    }
    stats.log_h_sum = log_sum_exp(log_h);
    check_twist_sum(stats.log_h_sum, "sum of h");
    stats.log_wh_sum = log_sum_exp(log_wh);

    // log[(N-1)/(T-1)] + log Phi(h) - log mean h, with Phi(h) = qh_sum / (N-1).
    const double log_t_minus_1 = std::log(static_cast<double>(T - 1));
    const double log_phi_h = stats.log_qh_sum - log_n_minus_1;
    result.estimate.add(log_n_minus_1 - log_t_minus_1 + log_phi_h - (stats.log_h_sum - log_t_minus_1));
    result.twist_stats.push_back(stats);
    result.generations.push_back(std::move(gen));
  }
  return result;
}

}  // namespace alive
