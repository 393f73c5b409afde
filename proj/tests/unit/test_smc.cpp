#include <boost/math/special_functions/binomial.hpp>
#include <cmath>
#include <limits>
#include <vector>

#include "alive/error.hpp"
#include "alive/models.hpp"
#include "alive/selftest.hpp"
#include "alive/smc.hpp"
#include "alive/stats.hpp"
#include "doctest.h"

using namespace alive;

namespace {

const AbcKernel kExact{0.5, BallMode::absolute, 0.0};

// Proposals whose pseudo-observation is 0 (accepted against y = 0) with probability p.
auto bernoulli(double p) {
  return [p](Stream& s) {
    Proposal q;
    q.pseudo_obs = s.uniform() < p ? 0.0 : 1.0;
    return q;
  };
}

void check_generation(const ParticleGeneration& g, std::size_t N, const ParticleGeneration* prev) {
  const std::size_t T = g.stopping_time;
  REQUIRE(T >= N);
  REQUIRE(g.states.size() == T);
  REQUIRE(g.weights.size() == T);
  REQUIRE(g.pseudo_obs.size() == T);
  REQUIRE(g.ancestors.size() == T);
  CHECK(g.accepted() == N);
  CHECK(g.weights.back() == 1);
  std::size_t head = 0;
  for (std::size_t i = 0; i + 1 < T; ++i) head += g.weights[i];
  CHECK(head == N - 1);
  if (prev) {
    for (auto a : g.ancestors) {
      REQUIRE(a + 1 < prev->stopping_time);
      CHECK(prev->weights[a] == 1);
    }
  }
}

}  // namespace

TEST_CASE("constant observation density gives T log c") {
  HmmModel m = lg_model({0.9, 1.0, 1.0});
  m.log_observation_density = [](double, double) { return std::log(0.25); };
  Stream s({1, 0});
  const auto r = bootstrap_filter(m, std::vector<double>(7, 0.0), 30, s);
  CHECK(r.estimate.log_total == doctest::Approx(7 * std::log(0.25)).epsilon(1e-12));
}

TEST_CASE("bootstrap with two particles and one observation") {
  const HmmModel m = lg_model({0.9, 1.0, 1.0});
  const std::vector<double> y{0.4};
  Stream s({5, 0});
  const auto r = bootstrap_filter(m, y, 2, s);
  Stream replay({5, 0});
  const double k1 = m.sample_first(replay);
  const double k2 = m.sample_first(replay);
  const double expected = std::log(0.5 * (std::exp(m.log_observation_density(0.4, k1)) +
                                          std::exp(m.log_observation_density(0.4, k2))));
  CHECK(r.estimate.log_total == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("bootstrap reports particle death") {
  HmmModel m = lg_model({0.9, 1.0, 1.0});
  m.log_observation_density = [](double, double) { return -std::numeric_limits<double>::infinity(); };
  Stream s({1, 0});
  CHECK_THROWS_AS(bootstrap_filter(m, std::vector<double>{1.0}, 10, s), ParticleDeath);
  CHECK_THROWS_AS(bootstrap_filter(sv_model({}), std::vector<double>{1.0}, 10, s), InvalidArgument);
  CHECK_THROWS_AS(bootstrap_filter(m, std::vector<double>{1.0}, 1, s), InvalidArgument);
}

TEST_CASE("bootstrap estimate is unbiased for the Kalman marginal") {
  const LinearGaussianParams p{0.9, 1.0, 1.0};
  const HmmModel m = lg_model(p);
  Stream data({40, 0});
  const auto y = simulate(m, 20, data).observations;
  std::vector<double> log_z(150);
  for (std::size_t r = 0; r < log_z.size(); ++r) {
    Stream s({41, r});
    log_z[r] = bootstrap_filter(m, y, 500, s).estimate.log_total;
  }
  const MeanSe ms = scaled_mean_and_se(log_z, kalman_log_marginal(p, y));
  CHECK(std::abs(ms.mean - 1.0) < 3.0 * ms.se);
}

TEST_CASE("sample_until_alive stops at the N-th acceptance") {
  Stream s({1, 0});
  SUBCASE("everything accepted") {
    const auto pool = sample_until_alive(bernoulli(1.0), kExact, 0.0, 7, 100, s);
    CHECK(pool.stopping_time == 7);
    CHECK(pool.weights == std::vector<std::uint8_t>(7, 1));
  }
  SUBCASE("hand trace 1,0,1,0,1") {
    int call = 0;
    const auto pool = sample_until_alive(
        [&](Stream&) {
          Proposal q;
          q.pseudo_obs = call++ % 2 == 0 ? 0.0 : 1.0;
          return q;
        },
        kExact, 0.0, 3, 100, s);
    CHECK(pool.stopping_time == 5);
    CHECK(pool.weights == std::vector<std::uint8_t>{1, 0, 1, 0, 1});
  }
  SUBCASE("cap") {
    try {
      sample_until_alive(bernoulli(0.0), kExact, 0.0, 3, 50, s, 4);
      FAIL("expected CapExceeded");
    } catch (const CapExceeded& e) {
      CHECK(e.step() == 4);
      CHECK(e.draws() == 50);
      CHECK(e.accepted() == 0);
      CHECK(std::string(e.what()).find("stopping-time cap exceeded") != std::string::npos);
    }
  }
  SUBCASE("preconditions") {
    CHECK_THROWS_AS(sample_until_alive(bernoulli(1.0), kExact, 0.0, 1, 50, s), InvalidArgument);
    CHECK_THROWS_AS(sample_until_alive(bernoulli(1.0), kExact, 0.0, 10, 5, s), InvalidArgument);
  }
}

TEST_CASE("(N-1)/(T-1) is unbiased for the acceptance probability") {
  const std::size_t N = 10;
  const int reps = 20000;
  std::vector<double> ratio(reps);
  for (int i = 0; i < reps; ++i) {
    Stream s({60, static_cast<std::uint64_t>(i)});
    ratio[i] = 9.0 / static_cast<double>(sample_until_alive(bernoulli(0.3), kExact, 0.0, N, kDefaultCap, s).stopping_time - 1);
  }
  const MeanSe ms = mean_and_se(ratio);
  CHECK(std::abs(ms.mean - 0.3) < 3.0 * ms.se);
}

TEST_CASE("stopping time follows the negative binomial law") {
  // P(T = N + j) = C(N - 1 + j, j) p^N (1 - p)^j
  const std::size_t N = 5;
  const double p = 0.5;
  const int reps = 100000;
  const std::size_t bins = 12;  // j = 0..10 and a tail bin
  std::vector<double> observed(bins, 0.0), expected(bins, 0.0);
  for (int i = 0; i < reps; ++i) {
    Stream s({61, static_cast<std::uint64_t>(i)});
    const std::size_t j = sample_until_alive(bernoulli(p), kExact, 0.0, N, kDefaultCap, s).stopping_time - N;
    observed[std::min(j, bins - 1)] += 1.0;
  }
  double head = 0.0;
  for (std::size_t j = 0; j + 1 < bins; ++j) {
    const double prob = boost::math::binomial_coefficient<double>(static_cast<unsigned>(N - 1 + j), static_cast<unsigned>(j)) *
                        std::pow(p, N) * std::pow(1 - p, static_cast<double>(j));
    expected[j] = prob * reps;
    head += prob;
  }
  expected.back() = (1.0 - head) * reps;
  CHECK(chi_square_statistic(observed, expected) < chi_square_critical(bins - 1, 0.001));
}

TEST_CASE("alive filter with an accept-everything kernel has log Z = 0") {
  const HmmModel m = lg_model({0.9, 1.0, 1.0});
  const AbcKernel everything{1e300, BallMode::absolute};
  Stream s({2, 0});
  const auto r = alive_filter(m, everything, std::vector<double>(10, 0.3), 8, 1000, s);
  CHECK(r.estimate.log_total == 0.0);
  for (const auto& g : r.generations) CHECK(g.stopping_time == 8);
}

TEST_CASE("alive filter generation invariants and the two estimator forms") {
  const HmmModel m = lg_model({0.9, 1.0, 1.0});
  Stream data({3, 0});
  const auto y = simulate(m, 40, data).observations;
  Stream s({4, 0});
  const std::size_t N = 25;
  const auto r = alive_filter(m, AbcKernel{0.5, BallMode::relative}, y, N, kDefaultCap, s);
  REQUIRE(r.generations.size() == y.size());
  double total = 0.0;
  for (std::size_t n = 0; n < y.size(); ++n) {
    const auto& g = r.generations[n];
    check_generation(g, N, n ? &r.generations[n - 1] : nullptr);
    if (n == 0) {
      for (auto a : g.ancestors) CHECK(a == kNoAncestor);
    }
    CHECK_FALSE(g.twisted_index.has_value());
    double head = 0.0;
    for (std::size_t i = 0; i + 1 < g.stopping_time; ++i) head += g.weights[i];
    const double T1 = static_cast<double>(g.stopping_time - 1);
    CHECK(std::exp(r.estimate.log_factors[n]) == doctest::Approx(head / T1).epsilon(1e-14));
    CHECK(r.estimate.log_factors[n] == doctest::Approx(std::log((N - 1) / T1)).epsilon(1e-14));
    total += r.estimate.log_factors[n];
  }
  CHECK(std::abs(r.estimate.log_total - total) < 1e-12);
  // Pseudo-observations decide the weights.
  const auto& last = r.generations.back();
  for (std::size_t i = 0; i < last.stopping_time; ++i) {
    CHECK(last.weights[i] == AbcKernel{0.5, BallMode::relative}.weight(last.pseudo_obs[i], y.back()));
  }
}

TEST_CASE("alive filter is unbiased on the discrete oracle") {
  const DiscreteHmmParams p = oracle_discrete_params();
  const HmmModel m = discrete_model(p);
  const auto y = oracle_discrete_observations();
  std::vector<double> log_z(3000);
  for (std::size_t r = 0; r < log_z.size(); ++r) {
    Stream s({70, r});
    log_z[r] = alive_filter(m, kExact, y, 20, kDefaultCap, s).estimate.log_total;
  }
  const MeanSe ms = scaled_mean_and_se(log_z, discrete_abc_log_marginal(p, y));
  CHECK(std::abs(ms.mean - 1.0) < 3.0 * ms.se);
}

TEST_CASE("alive filter stays finite over a thousand steps") {
  const HmmModel m = lg_model({0.9, 1.0, 1.0});
  Stream data({5, 0});
  const auto y = simulate(m, 1000, data).observations;
  Stream s({6, 0});
  const auto r = alive_filter(m, AbcKernel{1.5, BallMode::relative}, y, 10, kDefaultCap, s);
  CHECK(std::isfinite(r.estimate.log_total));
  CHECK(r.estimate.log_total < 0.0);
}

TEST_CASE("alive filter propagates the cap") {
  const HmmModel m = lg_model({0.9, 1.0, 1.0});
  Stream s({7, 0});
  CHECK_THROWS_AS(alive_filter(m, AbcKernel{1e-12, BallMode::absolute}, std::vector<double>{0.5}, 5, 200, s),
                  CapExceeded);
}

TEST_CASE("multinomial resampling") {
  Stream s({8, 0});
  const auto idx = multinomial_resample(s, std::vector<double>{1, 0, 0}, 50);
  for (auto i : idx) CHECK(i == 0);
  CHECK(multinomial_resample(s, std::vector<double>{1, 2}, 0).empty());
  CHECK_THROWS_AS(multinomial_resample(s, std::vector<double>{0, 0}, 3), InvalidArgument);
  const auto many = multinomial_resample(s, std::vector<double>{1, 1}, 100000);
  double first = 0;
  for (auto i : many) first += i == 0;
  CHECK(std::abs(first / 1e5 - 0.5) < 3.0 * std::sqrt(0.25 / 1e5));
}

TEST_CASE("discrete sampler never returns a zero-weight index") {
  const std::vector<double> w{0.0, 1e-300, 0.0, 2.0, 0.0};
  const DiscreteSampler sampler(w);
  Stream s({9, 0});
  for (int i = 0; i < 10000; ++i) {
    const auto k = sampler(s);
    CHECK((k == 1 || k == 3));
  }
}

TEST_CASE("final index selection and path tracing") {
  const HmmModel m = lg_model({0.9, 1.0, 1.0});
  Stream data({10, 0});
  const auto y = simulate(m, 15, data).observations;
  Stream s({11, 0});
  const auto r = alive_filter(m, AbcKernel{1.0, BallMode::relative}, y, 12, kDefaultCap, s);
  const auto& last = r.generations.back();
  for (int i = 0; i < 200; ++i) {
    const auto d = select_final_index(last, s);
    REQUIRE(d + 1 < last.stopping_time);
    CHECK(last.weights[d] == 1);
  }
  const auto d = select_final_index(last, s);
  const auto path = trace_path(r.generations, d);
  REQUIRE(path.size() == y.size());
  std::size_t index = d;
  for (std::size_t n = y.size(); n-- > 0;) {
    CHECK(path[n] == r.generations[n].states[index]);
    index = r.generations[n].ancestors[index];
  }
}

TEST_CASE("log_sum_exp") {
  CHECK(log_sum_exp(std::vector<double>{std::log(1.0), std::log(3.0)}) == doctest::Approx(std::log(4.0)));
  CHECK(log_sum_exp(std::vector<double>{-1000.0, -1000.0}) == doctest::Approx(-1000.0 + std::log(2.0)));
  CHECK(log_sum_exp(std::vector<double>{}) == -std::numeric_limits<double>::infinity());
}
