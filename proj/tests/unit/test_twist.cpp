#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "alive/error.hpp"
#include "alive/models.hpp"
#include "alive/selftest.hpp"
#include "alive/stats.hpp"
#include "alive/twist.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace alive;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

std::vector<double> lg_data(const LinearGaussianParams& p, std::size_t T, std::uint64_t seed) {
  Stream s({seed, 0});
  return simulate(lg_model(p), T, s).observations;
}

// Q(h)(k_prev) = integral f(k | k_prev) h(k) dk by adaptive quadrature.
double quadrature_qh(const TwistFunction& twist, std::span<const double> y, std::size_t step, double mean,
                     double var) {
  return std::log(oracle::integrate(
      [&](double k) { return std::exp(log_normal_density(k, mean, var) + twist.log_h(y, step, k)); }, -kInf, kInf));
}

// CDF of the twisted law f(. | k_prev) h / Q(h) at x.
double twisted_cdf(const TwistFunction& twist, std::span<const double> y, std::size_t step, double mean,
                   double var, double x) {
  const double log_norm = quadrature_qh(twist, y, step, mean, var);
  return oracle::integrate(
      [&](double k) { return std::exp(log_normal_density(k, mean, var) + twist.log_h(y, step, k) - log_norm); },
      -kInf, x);
}

class NanTwist final : public TwistFunction {
 public:
  std::string description() const override { return "nan"; }
  double log_h(std::span<const double>, std::size_t, double) const override {
    return std::numeric_limits<double>::quiet_NaN();
  }
  double log_qh(std::span<const double>, std::size_t, double) const override { return 0.0; }
  double sample_twisted(std::span<const double>, std::size_t, double k, Stream&) const override { return k; }
  double log_qh_initial(std::span<const double>) const override { return 0.0; }
  double sample_twisted_initial(std::span<const double>, Stream&) const override { return 0.0; }
};

}  // namespace

TEST_CASE("effective lag shrinks near the end") {
  CHECK(effective_lag(3, 0, 10) == 3);
  CHECK(effective_lag(3, 6, 10) == 3);
  CHECK(effective_lag(3, 7, 10) == 2);
  CHECK(effective_lag(3, 9, 10) == 0);
  CHECK(effective_lag(0, 0, 10) == 0);
  CHECK(effective_lag(5, 0, 1) == 0);
}

TEST_CASE("linear gaussian twist against the lookahead density and quadrature") {
  const LinearGaussianParams p{0.8, 0.7, 1.3};
  const HmmModel m = lg_model(p);
  const auto y = lg_data(p, 12, 1);
  for (int lag : {1, 2, 5}) {
    CAPTURE(lag);
    const TwistPtr h = lg_twist(p, lag);
    for (double k : {-2.0, 0.0, 1.5}) {
      CHECK(h->log_h(y, 3, k) == doctest::Approx(m.log_lookahead_predictive(y[3 + lag], k, lag)).epsilon(1e-12));
    }
    for (double k_prev : {-1.0, 0.4, 2.5}) {
      CHECK(h->log_qh(y, 3, k_prev) == doctest::Approx(quadrature_qh(*h, y, 3, p.phi * k_prev, p.nu2)).epsilon(1e-8));
    }
    const double var0 = p.nu2 * (1 + p.phi * p.phi);
    CHECK(h->log_qh_initial(y) == doctest::Approx(quadrature_qh(*h, y, 0, 0.0, var0)).epsilon(1e-8));
    // At the last step h is one.
    CHECK(h->log_h(y, 11, 0.3) == 0.0);
    CHECK(h->log_qh(y, 11, 0.3) == 0.0);
  }
}

TEST_CASE("linear gaussian Q(h) matches Monte Carlo") {
  const LinearGaussianParams p{0.9, 1.0, 1.0};
  const auto y = lg_data(p, 6, 2);
  const TwistPtr h = lg_twist(p, 2);
  Stream s({3, 0});
  const int n = 1000000;
  std::vector<double> values(n);
  for (int i = 0; i < n; ++i) values[i] = std::exp(h->log_h(y, 1, s.gaussian(p.phi * 0.7, p.nu2)));
  const MeanSe ms = mean_and_se(values);
  CHECK(std::abs(ms.mean - std::exp(h->log_qh(y, 1, 0.7))) < 4.0 * ms.se);
}

TEST_CASE("linear gaussian twisted sampler follows f h") {
  const LinearGaussianParams p{0.9, 1.0, 0.5};
  const auto y = lg_data(p, 8, 4);
  const TwistPtr h = lg_twist(p, 2);
  Stream s({5, 0});
  std::vector<double> draws(4000);
  for (auto& d : draws) d = h->sample_twisted(y, 2, 0.5, s);
  const double D = ks_statistic(draws, [&](double x) { return twisted_cdf(*h, y, 2, p.phi * 0.5, p.nu2, x); });
  CHECK(D < ks_critical(draws.size(), 0.001));
}

TEST_CASE("phi = 0 leaves the twisted transition equal to f") {
  const LinearGaussianParams p{0.0, 1.0, 1.0};
  const auto y = lg_data(p, 5, 6);
  const TwistPtr h = lg_twist(p, 1);
  Stream a({7, 0}), b({7, 0});
  for (int i = 0; i < 20; ++i) CHECK(h->sample_twisted(y, 1, 3.0, a) == b.gaussian(0.0, 1.0));
}

TEST_CASE("stochastic volatility twist") {
  const StochVolParams p{0.9, 0.1, 1.95, 0.05, 1.0, 0.0};
  const HmmModel m = sv_model(p);
  const std::vector<double> y{0.3, -1.2, 0.8, 2.1, -0.4, 0.05};
  const TwistPtr h = sv_twist(p, 2);

  SUBCASE("h is the surrogate lookahead") {
    for (double k : {-1.0, 0.0, 0.7}) {
      CHECK(h->log_h(y, 1, k) == doctest::Approx(m.log_lookahead_predictive(y[3], k, 2)).epsilon(1e-12));
    }
    CHECK(h->log_h(y, 5, 1.0) == 0.0);
  }
  SUBCASE("h integrates to one in y") {
    StochVolParams q = p;
    for (double k : {-0.5, 1.2}) {
      const double mass = oracle::integrate(
          [&](double v) {
            const std::vector<double> z{0.0, v};
            return std::exp(sv_twist(q, 1)->log_h(z, 0, k));
          },
          -kInf, kInf);
      CHECK(mass == doctest::Approx(1.0).epsilon(1e-8));
    }
  }
  SUBCASE("large gamma: the ratio of h tends to exp(F^L (k_hi - k_lo) / 2)") {
    // With delta = 0 the surrogate is N(y; 0, 2 gamma^2 e^m); once gamma dominates
    // |y| the exponent vanishes and only the e^{-m/2} prefactor is left.
    StochVolParams q = p;
    q.gamma = 1e4;
    const TwistPtr wide = sv_twist(q, 1);
    const double lo = -1.5, hi = 1.5;
    const double log_ratio = wide->log_h(y, 0, lo) - wide->log_h(y, 0, hi);
    CHECK(log_ratio == doctest::Approx(0.5 * q.F * (hi - lo)).epsilon(1e-6));
  }
  SUBCASE("Q(h) against adaptive quadrature") {
    for (double k_prev : {-2.0, 0.0, 1.0}) {
      CHECK(h->log_qh(y, 1, k_prev) == doctest::Approx(quadrature_qh(*h, y, 1, p.F * k_prev, p.nu2)).epsilon(1e-9));
    }
    const double var0 = p.nu2 * (1 + p.F * p.F);
    CHECK(h->log_qh_initial(y) == doctest::Approx(quadrature_qh(*h, y, 0, 0.0, var0)).epsilon(1e-9));
  }
  SUBCASE("rejection sampler, delta = 0") {
    Stream s({8, 0});
    std::vector<double> draws(4000);
    for (auto& d : draws) d = h->sample_twisted(y, 0, 0.4, s);
    const double D = ks_statistic(draws, [&](double x) { return twisted_cdf(*h, y, 0, p.F * 0.4, p.nu2, x); });
    CHECK(D < ks_critical(draws.size(), 0.001));
  }
  SUBCASE("rejection sampler, delta != 0 and a wide transition") {
    StochVolParams q = p;
    q.delta = 0.6;
    q.nu2 = 1.5;
    const TwistPtr hq = sv_twist(q, 1);
    Stream s({9, 0});
    std::vector<double> draws(4000);
    for (auto& d : draws) d = hq->sample_twisted(y, 2, -0.3, s);
    const double D = ks_statistic(draws, [&](double x) { return twisted_cdf(*hq, y, 2, q.F * -0.3, q.nu2, x); });
    CHECK(D < ks_critical(draws.size(), 0.001));
  }
}

TEST_CASE("discrete table twist") {
  const DiscreteHmmParams p = oracle_discrete_params();
  const std::vector<std::vector<double>> table{{1.0, 2.0, 0.5}, {0.1, 1.0, 3.0}};
  const TwistPtr h = discrete_table_twist(p, table);
  const std::vector<double> y{0, 1};
  double expected = 0.0;
  for (std::size_t s = 0; s < 3; ++s) expected += p.transition[2][s] * table[1][s];
  CHECK(h->log_qh(y, 1, 2.0) == doctest::Approx(std::log(expected)));
  CHECK(h->log_h(y, 1, 2.0) == doctest::Approx(std::log(3.0)));

  Stream s({10, 0});
  const int n = 60000;
  std::vector<double> counts(3, 0.0), want(3);
  for (int i = 0; i < n; ++i) counts[static_cast<std::size_t>(h->sample_twisted(y, 1, 2.0, s))] += 1.0;
  for (std::size_t k = 0; k < 3; ++k) want[k] = n * p.transition[2][k] * table[1][k] / expected;
  CHECK(chi_square_statistic(counts, want) < chi_square_critical(2, 0.001));

  CHECK_THROWS_AS(discrete_table_twist(p, {{1.0, 0.0, 1.0}}), InvalidArgument);
  CHECK_THROWS_AS(discrete_table_twist(p, {{1.0, 1.0}}), InvalidArgument);
  CHECK_THROWS_AS(h->log_h(std::vector<double>{0, 1, 2}, 2, 0.0), InvalidArgument);
}

TEST_CASE("oracle table equals the future acceptance probability up to row scale") {
  Stream gen({11, 0});
  for (int rep = 0; rep < 3; ++rep) {
    const DiscreteHmmParams p = oracle::random_discrete(3, 3, gen);
    const std::vector<double> y{0, 2, 1, 1};
    const auto table = discrete_oracle_table(p, y);
    const auto exact = oracle::brute_force_future_acceptance(p, y);
    REQUIRE(table.size() == y.size());
    for (std::size_t n = 0; n < y.size(); ++n) {
      const double scale = exact[n][0] / table[n][0];
      for (std::size_t s = 0; s < 3; ++s) CHECK(table[n][s] * scale == doctest::Approx(exact[n][s]).epsilon(1e-12));
    }
  }
}

TEST_CASE("constant twist reduces the alive twisted filter") {
  const HmmModel m = lg_model({0.9, 1.0, 1.0});
  const auto y = lg_data({0.9, 1.0, 1.0}, 25, 12);
  const TwistPtr one = constant_twist(m, 2.5);

  SUBCASE("accept-everything kernel gives log Z = 0") {
    Stream s({13, 0});
    const auto r = alive_twisted_filter(m, AbcKernel{1e300, BallMode::absolute}, *one, y, 6, 1000, s);
    for (double f : r.estimate.log_factors) CHECK(std::abs(f) < 1e-12);
  }
  SUBCASE("every factor is log((N-1)/(T-1))") {
    Stream s({14, 0});
    const auto r = alive_twisted_filter(m, AbcKernel{1.0, BallMode::relative}, *one, y, 15, kDefaultCap, s);
    for (std::size_t n = 0; n < y.size(); ++n) {
      const double T1 = static_cast<double>(r.generations[n].stopping_time - 1);
      CHECK(r.estimate.log_factors[n] == doctest::Approx(std::log(14.0 / T1)).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(constant_twist(m, 0.0), InvalidArgument);
}

TEST_CASE("alive twisted filter bookkeeping") {
  const LinearGaussianParams p{0.9, 1.0, 1.0};
  const HmmModel m = lg_model(p);
  const auto y = lg_data(p, 30, 15);
  const TwistPtr h = lg_twist(p, 3);
  Stream s({16, 0});
  const std::size_t N = 20;
  const auto r = alive_twisted_filter(m, AbcKernel{1.0, BallMode::relative}, *h, y, N, kDefaultCap, s);
  REQUIRE(r.twist_stats.size() == y.size());
  for (std::size_t n = 0; n < y.size(); ++n) {
    const auto& g = r.generations[n];
    const auto& st = r.twist_stats[n];
    const std::size_t T = g.stopping_time;
    REQUIRE(g.twisted_index.has_value());
    CHECK(*g.twisted_index == st.twisted_index);
    CHECK(st.twisted_index + 1 < T);
    CHECK(g.accepted() == N);
    CHECK(g.weights.back() == 1);

    std::vector<double> lh, lwh;
    for (std::size_t i = 0; i + 1 < T; ++i) {
      lh.push_back(h->log_h(y, n, g.states[i]));
      if (g.weights[i]) lwh.push_back(lh.back());
    }
    CHECK(st.log_h_sum == doctest::Approx(log_sum_exp(lh)).epsilon(1e-12));
    CHECK(st.log_wh_sum == doctest::Approx(log_sum_exp(lwh)).epsilon(1e-12));
    double lqh = std::log(static_cast<double>(N - 1)) + h->log_qh_initial(y);
    if (n > 0) {
      const auto& prev = r.generations[n - 1];
      std::vector<double> terms;
      for (std::size_t j = 0; j + 1 < prev.stopping_time; ++j) {
        if (prev.weights[j]) terms.push_back(h->log_qh(y, n, prev.states[j]));
      }
      lqh = log_sum_exp(terms);
      for (auto a : g.ancestors) {
        REQUIRE(a + 1 < prev.stopping_time);
        CHECK(prev.weights[a] == 1);
      }
    }
    CHECK(st.log_qh_sum == doctest::Approx(lqh).epsilon(1e-12));

    // Two ways of writing the same factor.
    const double T1 = static_cast<double>(T - 1);
    const double long_form = std::log((N - 1) / T1) + (st.log_qh_sum - std::log(N - 1.0)) - (st.log_h_sum - std::log(T1));
    CHECK(std::abs(r.estimate.log_factors[n] - long_form) < 1e-10);
    CHECK(std::abs(r.estimate.log_factors[n] - (st.log_qh_sum - st.log_h_sum)) < 1e-10);
  }
}

TEST_CASE("the twisted particle lands on a uniform slot") {
  const HmmModel m = lg_model({0.9, 1.0, 1.0});
  const std::vector<double> y{0.1};
  const TwistPtr one = constant_twist(m);
  const std::size_t N = 6;  // accept-all gives T = N, slots 0..N-2
  std::vector<double> counts(N - 1, 0.0);
  const int reps = 20000;
  for (int i = 0; i < reps; ++i) {
    Stream s({17, static_cast<std::uint64_t>(i)});
    const auto r = alive_twisted_filter(m, AbcKernel{1e300, BallMode::absolute}, *one, y, N, 100, s);
    counts[*r.generations[0].twisted_index] += 1.0;
  }
  const std::vector<double> want(N - 1, static_cast<double>(reps) / (N - 1));
  CHECK(chi_square_statistic(counts, want) < chi_square_critical(N - 2, 0.001));
}

TEST_CASE("alive twisted filter is unbiased on random discrete models") {
  Stream gen({18, 0});
  const std::vector<double> y{0, 1, 1, 0};
  for (int model_rep = 0; model_rep < 3; ++model_rep) {
    CAPTURE(model_rep);
    const AbcKernel kernel{0.5, BallMode::absolute};
    DiscreteHmmParams p = oracle::random_discrete(3, 2, gen);
    // The filter accepts through the kernel, so the exact marginal must too.
    p.ball = ball_from_kernel(kernel, 2);
    const HmmModel m = discrete_model(p);
    std::vector<std::vector<double>> table(y.size(), std::vector<double>(3));
    for (auto& row : table) {
      for (auto& v : row) v = 0.2 + gen.uniform();
    }
    const TwistPtr h = discrete_table_twist(p, table);
    std::vector<double> log_z(4000);
    for (std::size_t r = 0; r < log_z.size(); ++r) {
      Stream s({19 + static_cast<std::uint64_t>(model_rep), r});
      log_z[r] = alive_twisted_filter(m, kernel, *h, y, 8, kDefaultCap, s).estimate.log_total;
    }
    const double exact = oracle::brute_force_discrete_log_marginal(p, y);
    CHECK(discrete_abc_log_marginal(p, y) == doctest::Approx(exact).epsilon(1e-12));
    const MeanSe ms = scaled_mean_and_se(log_z, exact);
    CHECK(std::abs(ms.mean - 1.0) < 3.5 * ms.se);
  }
}

TEST_CASE("constant twist draws the same law of log Z as the alive filter") {
  const DiscreteHmmParams p = oracle_discrete_params();
  const HmmModel m = discrete_model(p);
  const auto y = oracle_discrete_observations();
  const AbcKernel kernel{0.5, BallMode::absolute};
  const TwistPtr one = constant_twist(m);
  std::vector<double> a(2000), b(2000);
  for (std::size_t r = 0; r < a.size(); ++r) {
    Stream s1({20, r}), s2({21, r});
    a[r] = alive_filter(m, kernel, y, 10, kDefaultCap, s1).estimate.log_total;
    b[r] = alive_twisted_filter(m, kernel, *one, y, 10, kDefaultCap, s2).estimate.log_total;
  }
  // The statistic is discrete, so compare with a generous critical value.
  CHECK(ks_statistic(a, b) < 1.5 * ks_critical(a.size() * 0.5, 0.001));
}

TEST_CASE("twisted bootstrap filter") {
  const LinearGaussianParams p{0.9, 1.0, 1.0};
  const HmmModel m = lg_model(p);
  const auto y = lg_data(p, 15, 22);

  SUBCASE("constant twist gives the bootstrap factor mean W") {
    const TwistPtr one = constant_twist(m, 0.3);
    Stream s({23, 0});
    const auto r = twisted_bootstrap_filter(m, *one, y, 40, s);
    for (std::size_t n = 0; n < y.size(); ++n) {
      const auto& g = r.generations[n];
      const double mean_w = log_sum_exp(g.log_weights) - std::log(40.0);
      CHECK(r.estimate.log_factors[n] == doctest::Approx(mean_w).epsilon(1e-12));
    }
  }
  SUBCASE("unbiased for the Kalman marginal") {
    const TwistPtr h = lg_twist(p, 2);
    std::vector<double> log_z(150);
    for (std::size_t r = 0; r < log_z.size(); ++r) {
      Stream s({24, r});
      log_z[r] = twisted_bootstrap_filter(m, *h, y, 200, s).estimate.log_total;
    }
    const MeanSe ms = scaled_mean_and_se(log_z, kalman_log_marginal(p, y));
    CHECK(std::abs(ms.mean - 1.0) < 3.0 * ms.se);
  }
  SUBCASE("two particles, one observation") {
    const TwistPtr h = lg_twist(p, 1);
    const std::vector<double> z{0.5, -0.2};
    Stream s({25, 0});
    const auto r = twisted_bootstrap_filter(m, *h, z, 2, s);
    const auto& g = r.generations[0];
    const auto& st = r.twist_stats[0];
    const double w = log_sum_exp(g.log_weights) - std::log(2.0);
    const double lh = log_sum_exp(std::vector<double>{h->log_h(z, 0, g.states[0]), h->log_h(z, 0, g.states[1])});
    CHECK(st.log_h_sum == doctest::Approx(lh));
    CHECK(r.estimate.log_factors[0] == doctest::Approx(w + h->log_qh_initial(z) - (lh - std::log(2.0))).epsilon(1e-12));
  }
}

TEST_CASE("non-finite twist values raise DegenerateTwist") {
  const HmmModel m = lg_model({0.9, 1.0, 1.0});
  const NanTwist bad;
  const std::vector<double> y{0.1, 0.2};
  Stream s({26, 0});
  CHECK_THROWS_AS(alive_twisted_filter(m, AbcKernel{1.5, BallMode::relative}, bad, y, 5, kDefaultCap, s),
                  DegenerateTwist);
  CHECK_THROWS_AS(twisted_bootstrap_filter(m, bad, y, 5, s), DegenerateTwist);
}

TEST_CASE("far-off observations floor h instead of underflowing") {
  const LinearGaussianParams p{0.9, 1.0, 0.01};
  const TwistPtr h = lg_twist(p, 1);
  const std::vector<double> y{0.0, 1e6};
  CHECK(h->log_h(y, 0, 0.0) == doctest::Approx(std::log(1e-300)));
  CHECK(std::isfinite(h->log_qh(y, 0, 0.0)));
}
