#include "alive/selftest.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include "alive/error.hpp"
#include "alive/experiment.hpp"
#include "alive/pmmh.hpp"
#include "alive/smc.hpp"
#include "alive/stats.hpp"
#include "alive/twist.hpp"
#include "json.hpp"

namespace alive {

namespace {

bool full(const SelftestOptions& o) { return o.level == SelftestLevel::full; }

CriterionResult timed(const std::string& id, const std::string& title,
                      const std::function<void(CriterionResult&)>& body) {
  CriterionResult result;
  result.id = id;
  result.title = title;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(result);
  } catch (const std::exception& e) {
    result.passed = false;
    result.detail += std::string(result.detail.empty() ? "" : "; ") + "error: " + e.what();
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
  char buffer[160];
  std::snprintf(buffer, sizeof buffer, format, a, b, c);
  return buffer;
}

void append(CriterionResult& r, const std::string& text) {
  if (!r.detail.empty()) r.detail += "; ";
  r.detail += text;
}

// Checks that exp(log_z - log_exact) has mean 1 within 3 standard errors.
bool ratio_check(CriterionResult& r, const std::string& label, const std::vector<double>& log_z, double log_exact) {
  const MeanSe m = scaled_mean_and_se(log_z, log_exact);
  const bool ok = std::abs(m.mean - 1.0) <= 3.0 * m.se;
  append(r, label + fmt(" Z/Zexact %.4f +- %.4f", m.mean, m.se) + (ok ? "" : " FAIL"));
  return ok;
}

}  // namespace

SelftestLevel parse_selftest_level(const std::string& name) {
  if (name == "quick") return SelftestLevel::quick;
  if (name == "full") return SelftestLevel::full;
  throw InvalidArgument("unknown selftest level '" + name + "'");
}

DiscreteHmmParams oracle_discrete_params() {
  DiscreteHmmParams p;
  p.initial = {0.5, 0.3, 0.2};
  p.transition = {{0.8, 0.15, 0.05}, {0.1, 0.8, 0.1}, {0.05, 0.15, 0.8}};
  p.emission = {{0.7, 0.2, 0.1}, {0.2, 0.6, 0.2}, {0.1, 0.2, 0.7}};
  p.ball = ball_from_kernel(AbcKernel{0.5, BallMode::absolute, 0.0}, 3);
  return p;
}

std::vector<double> oracle_discrete_observations() { return {0, 0, 1, 2, 2}; }

CriterionResult check_negative_binomial(const SelftestOptions& options) {
  return timed("A1", "negative-binomial unbiasedness of (N-1)/(T-1)", [&](CriterionResult& r) {
    const std::size_t reps = full(options) ? 100000 : 10000;
    const std::size_t N = 10;
    const AbcKernel kernel{0.5, BallMode::absolute, 0.0};
    r.passed = true;
    const SeedSpec base{options.seed, 0};
    for (double p : {0.1, 0.3, 0.7}) {
      std::vector<double> ratio(reps);
      const SeedSpec family = base.child(static_cast<std::uint64_t>(p * 1000));
      parallel_for(reps, options.threads, [&](std::size_t i) {
        Stream s = derive_stream(family.with_stream(i));
        const auto pool = sample_until_alive(
            [p](Stream& st) {
              Proposal q;
              q.pseudo_obs = st.uniform() < p ? 0.0 : 1.0;
              return q;
            },
            kernel, 0.0, N, kDefaultCap, s);
        ratio[i] = static_cast<double>(N - 1) / static_cast<double>(pool.stopping_time - 1);
      });
      const MeanSe m = mean_and_se(ratio);
      const bool ok = std::abs(m.mean - p) <= 3.0 * m.se;
      r.passed = r.passed && ok;
      append(r, fmt("p=%.1f mean %.5f se %.5f", p, m.mean, m.se) + (ok ? "" : " FAIL"));
    }
  });
}

CriterionResult check_alive_exactness(const SelftestOptions& options) {
  return timed("A2", "alive and alive twisted estimates match the discrete forward recursion",
               [&](CriterionResult& r) {
    const std::size_t reps = full(options) ? 10000 : 2000;
    const std::size_t N = 20;
    const DiscreteHmmParams params = oracle_discrete_params();
    const std::vector<double> y = oracle_discrete_observations();
    const HmmModel model = discrete_model(params);
    const AbcKernel kernel{0.5, BallMode::absolute, 0.0};
    const double log_exact = discrete_abc_log_marginal(params, y);

    Stream table_stream = derive_stream(SeedSpec{options.seed, 0}.child(77));
    std::vector<std::vector<double>> random_table(y.size(), std::vector<double>(3));
    for (auto& row : random_table) {
      for (auto& v : row) v = 0.1 + 0.9 * table_stream.uniform();
    }
    const TwistPtr twists[] = {nullptr, constant_twist(model, 1.0), discrete_table_twist(params, random_table),
                               discrete_table_twist(params, discrete_oracle_table(params, y))};
    const char* labels[] = {"alive", "twisted/constant", "twisted/random", "twisted/oracle"};

    r.passed = true;
    for (std::size_t k = 0; k < 4; ++k) {
      std::vector<double> log_z(reps);
      const SeedSpec family = SeedSpec{options.seed, 0}.child(200 + k);
      parallel_for(reps, options.threads, [&](std::size_t i) {
        Stream s = derive_stream(family.with_stream(i));
        log_z[i] = twists[k] ? alive_twisted_filter(model, kernel, *twists[k], y, N, kDefaultCap, s).estimate.log_total
                             : alive_filter(model, kernel, y, N, kDefaultCap, s).estimate.log_total;
      });
      r.passed = ratio_check(r, labels[k], log_z, log_exact) && r.passed;
    }
  });
}

CriterionResult check_kalman(const SelftestOptions& options) {
  return timed("A3", "bootstrap and twisted bootstrap estimates match the Kalman marginal", [&](CriterionResult& r) {
    const LinearGaussianParams params{0.9, 1.0, 1.0};
    const HmmModel model = lg_model(params);
    Stream data = derive_stream(SeedSpec{options.seed, 0}.child(300));
    const std::vector<double> y = simulate(model, 20, data).observations;
    const double log_exact = kalman_log_marginal(params, y);

    const std::size_t boot_reps = full(options) ? 200 : 100;
    const std::size_t twist_reps = full(options) ? 500 : 200;
    std::vector<double> boot(boot_reps), twisted(twist_reps);
    const SeedSpec boot_seed = SeedSpec{options.seed, 0}.child(301);
    const SeedSpec twist_seed = SeedSpec{options.seed, 0}.child(302);
    parallel_for(boot_reps, options.threads, [&](std::size_t i) {
      Stream s = derive_stream(boot_seed.with_stream(i));
      boot[i] = bootstrap_filter(model, y, 2000, s).estimate.log_total;
    });
    const TwistPtr twist = lg_twist(params, 5);
    parallel_for(twist_reps, options.threads, [&](std::size_t i) {
      Stream s = derive_stream(twist_seed.with_stream(i));
      twisted[i] = twisted_bootstrap_filter(model, *twist, y, 100, s).estimate.log_total;
    });
    const bool a = ratio_check(r, "bootstrap N=2000", boot, log_exact);
    const bool b = ratio_check(r, "twisted bootstrap N=100 lag=5", twisted, log_exact);
    r.passed = a && b;
  });
}

CriterionResult check_constant_twist_reduction(const SelftestOptions& options) {
  return timed("R1", "constant twist reproduces the alive filter's estimate law", [&](CriterionResult& r) {
    const std::size_t reps = full(options) ? 10000 : 2000;
    const DiscreteHmmParams params = oracle_discrete_params();
    const std::vector<double> y = oracle_discrete_observations();
    const HmmModel model = discrete_model(params);
    const AbcKernel kernel{0.5, BallMode::absolute, 0.0};
    const TwistPtr twist = constant_twist(model, 2.5);
    std::vector<double> plain(reps), twisted(reps);
    const SeedSpec a = SeedSpec{options.seed, 0}.child(400);
    const SeedSpec b = SeedSpec{options.seed, 0}.child(401);
    parallel_for(reps, options.threads, [&](std::size_t i) {
      Stream s = derive_stream(a.with_stream(i));
      plain[i] = alive_filter(model, kernel, y, 10, kDefaultCap, s).estimate.log_total;
      Stream t = derive_stream(b.with_stream(i));
      twisted[i] = alive_twisted_filter(model, kernel, *twist, y, 10, kDefaultCap, t).estimate.log_total;
    });
    const double d = ks_statistic(plain, twisted);
    const double n = static_cast<double>(reps);
    const double critical = ks_critical(n * n / (2.0 * n), 0.001);
    r.passed = d <= critical;
    r.detail = fmt("KS D %.5f, critical %.5f at 0.001", d, critical);
  });
}

CriterionResult check_variance_reduction(const SelftestOptions& options) {
  return timed("A4", "alive twisted estimate has lower variance at nu = tau = 1", [&](CriterionResult& r) {
    ExperimentConfig config;
    config.lg = {0.9, 1.0, 1.0};
    config.kernel = {1.5, BallMode::relative, 1e-8};
    config.lag = 5;
    config.T = 50;
    config.N = 200;
    config.replicates = full(options) ? 100 : 20;
    const std::size_t repetitions = full(options) ? 10 : 3;
    std::size_t wins = 0;
    std::ostringstream diffs;
    for (std::size_t k = 0; k < repetitions; ++k) {
      const CellSeeds seeds = cell_seeds(SeedSpec{options.seed, 0}.child(500 + k), 0, 0);
      const GridCell cell = variance_cell(config, 1.0, 1.0, seeds, options.threads);
      if (cell.ok && cell.difference > 0.0) ++wins;
      diffs << (k ? " " : "") << (cell.ok ? fmt("%.3f", cell.difference) : "missing");
    }
    const std::size_t needed = full(options) ? 9 : 2;
    r.passed = wins >= needed;
    r.detail = "log var(alive) - log var(twisted) > 0 in " + std::to_string(wins) + "/" +
               std::to_string(repetitions) + " (need " + std::to_string(needed) + "): " + diffs.str();
  });
}

CriterionResult check_pmmh_grid(const SelftestOptions& options) {
  return timed("A5", "PMMH occupancy on a two-point grid matches the exact posterior", [&](CriterionResult& r) {
    const std::size_t iterations = full(options) ? 100000 : 20000;
    const std::vector<double> y = oracle_discrete_observations();
    DiscreteHmmParams sticky = oracle_discrete_params();
    DiscreteHmmParams mixing = sticky;
    mixing.transition = {{0.2, 0.4, 0.4}, {0.4, 0.2, 0.4}, {0.4, 0.4, 0.2}};
    const DiscreteHmmParams grid[] = {sticky, mixing};
    const HmmModel models[] = {discrete_model(sticky), discrete_model(mixing)};
    const double log_prior[] = {std::log(0.4), std::log(0.6)};
    const AbcKernel kernel{0.5, BallMode::absolute, 0.0};

    double post[2];
    for (int i = 0; i < 2; ++i) post[i] = log_prior[i] + discrete_abc_log_marginal(grid[i], y);
    const double top = std::max(post[0], post[1]);
    const double norm = std::exp(post[0] - top) + std::exp(post[1] - top);
    const double exact0 = std::exp(post[0] - top) / norm;

    PmmhProblem<int> problem;
    problem.log_prior = [&](const int& t) { return log_prior[t]; };
    problem.propose = [](const int& t, Stream&) { return Proposed<int>{1 - t, 0.0}; };
    problem.sample_prior = [](Stream& s) { return s.uniform() < 0.4 ? 0 : 1; };
    problem.estimate = [&](const int& t, Stream& s) {
      return alive_estimate(models[t], kernel, nullptr, y, 20, kDefaultCap, s);
    };
    Stream stream = derive_stream(SeedSpec{options.seed, 0}.child(600));
    const ChainRecord<int> chain = run_chain(problem, iterations, stream);
    double zero = 0.0;
    for (std::size_t m = 1; m < chain.theta.size(); ++m) zero += chain.theta[m] == 0 ? 1.0 : 0.0;
    const double occupancy = zero / static_cast<double>(iterations);
    const double tv = std::abs(occupancy - exact0);
    r.passed = tv <= 0.05;
    r.detail = fmt("exact P(theta=0) %.4f, chain %.4f, TV %.4f", exact0, occupancy, tv) +
               fmt(", acceptance %.3f", chain.acceptance_rate());
  });
}

CriterionResult check_sv_pipeline(const SelftestOptions& options) {
  return timed("A6", "stochastic volatility PMMH with both filters", [&](CriterionResult& r) {
    ExperimentConfig config;
    config.model = ModelKind::stochastic_volatility;
    config.sv = StochVolParams{0.9, 0.01, 1.95, 0.05, 1.0, 0.0};
    config.kernel = {3.5, BallMode::relative, 1e-8};
    config.N = 50;
    config.lag = 5;
    config.iterations = full(options) ? 5000 : 500;
    config.burn_in_fraction = 0.1;
    config.max_lag = 50;
    config.cap = 100000;
    const std::size_t seeds = full(options) ? 5 : 2;

    Stream data = derive_stream(SeedSpec{options.seed, 0}.child(700));
    const std::vector<double> y = simulate(sv_model(config.sv), 200, data).observations;

    r.passed = true;
    double mean_acf[2] = {0.0, 0.0};
    for (int twisted = 0; twisted < 2; ++twisted) {
      std::vector<ChainSummary> chains(seeds);
      parallel_for(seeds, options.threads, [&](std::size_t k) {
        chains[k] = run_sv_pmmh(config, twisted == 1, y, SeedSpec{options.seed, 0}.child(710 + k), 1, 1).front();
      });
      std::ostringstream rates;
      std::size_t lags = 0;
      for (std::size_t k = 0; k < seeds; ++k) {
        const double rate = chains[k].record.acceptance_rate();
        rates << (k ? " " : "") << fmt("%.3f", rate);
        if (!(rate > 0.01 && rate < 0.9)) r.passed = false;
        const auto& f = chains[k].acf.empty() ? std::vector<double>{} : chains[k].acf[0];
        if (f.size() < 2) {
          r.passed = false;
          continue;
        }
        for (std::size_t l = 1; l < f.size(); ++l) {
          mean_acf[twisted] += f[l];
          ++lags;
        }
      }
      if (lags) mean_acf[twisted] /= static_cast<double>(lags);
      append(r, std::string(twisted ? "twisted" : "alive") + " acceptance " + rates.str() +
                    fmt(", mean ACF(F) lags 1-50 %.4f", mean_acf[twisted]));
    }
    const bool mixing = mean_acf[1] <= mean_acf[0] + 0.05;
    if (!mixing) append(r, "twisted ACF exceeds alive ACF + 0.05");
    r.passed = r.passed && mixing;
  });
}

std::vector<CriterionResult> run_selftest(const SelftestOptions& options) {
  std::vector<CriterionResult> out;
  out.push_back(check_negative_binomial(options));
  out.push_back(check_alive_exactness(options));
  out.push_back(check_kalman(options));
  out.push_back(check_constant_twist_reduction(options));
  if (full(options)) {
    out.push_back(check_variance_reduction(options));
    out.push_back(check_pmmh_grid(options));
    out.push_back(check_sv_pipeline(options));
  }
  return out;
}

std::string selftest_report_json(const std::vector<CriterionResult>& results) {
  nlohmann::json list = nlohmann::json::array();
  bool all = true;
  for (const auto& r : results) {
    list.push_back({{"id", r.id}, {"title", r.title}, {"passed", r.passed}, {"detail", r.detail}});
    all = all && r.passed;
  }
  nlohmann::json doc;
  doc["passed"] = all;
  doc["criteria"] = list;
  return doc.dump(2) + "\n";
}

}  // namespace alive
