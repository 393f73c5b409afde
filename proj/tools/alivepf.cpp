// Command-line front end: simulate, filter, variance-grid, pmmh, selftest.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "alive/error.hpp"
#include "alive/experiment.hpp"
#include "alive/selftest.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitSelftest = 2;
constexpr int kExitCap = 3;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t threads = 1;
};

alive::ExperimentConfig load(const Common& c) {
  alive::ExperimentConfig config = c.config_path.empty() ? alive::parse_config("{}") : alive::load_config(c.config_path);
  if (c.seed) config.seed = *c.seed;
  return config;
}

// Writes through a temporary file so a failed run never leaves a partial output.
template <typename Writer>
void write_file(const std::string& path, Writer&& writer) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw alive::Error("cannot write '" + path + "'");
    writer(out);
    if (!out) throw alive::Error("write to '" + path + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

template <typename Writer>
void emit(const std::string& path, Writer&& writer) {
  if (path.empty() || path == "-") {
    writer(std::cout);
  } else {
    write_file(path, writer);
  }
}

std::vector<double> simulated_observations(const alive::ExperimentConfig& config) {
  alive::Stream stream = alive::derive_stream(alive::SeedSpec{config.seed, 0}.child(0xda7a));
  return alive::simulate(alive::build_model(config), config.T, stream).observations;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Alive and alive twisted particle filters with PMMH"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub, bool threads) {
    sub->add_option("--config", common.config_path, "JSON configuration file");
    sub->add_option("--seed", common.seed, "master seed (overrides the config)");
    if (threads) sub->add_option("--threads", common.threads, "worker threads")->check(CLI::PositiveNumber);
  };

  auto* simulate = app.add_subcommand("simulate", "simulate a latent path and observations");
  add_common(simulate, false);
  std::optional<std::size_t> sim_T;
  simulate->add_option("--T", sim_T, "number of observations (overrides the config)");
  simulate->add_option("--out", common.out, "output CSV (default stdout)");

  auto* filter = app.add_subcommand("filter", "run one filter and write its per-step trace");
  add_common(filter, false);
  std::string filter_algo = "alive";
  std::optional<int> filter_lag;
  std::string filter_data;
  filter->add_option("--algo", filter_algo, "alive | bootstrap | alive-twisted | twisted-bootstrap");
  filter->add_option("--lag", filter_lag, "twist lag (overrides the config)");
  filter->add_option("--data", filter_data, "CSV with an observation column (default: simulate from the config)");
  filter->add_option("--out", common.out, "output CSV (default stdout)");

  auto* grid = app.add_subcommand("variance-grid", "log variance difference over a (nu, tau) grid");
  add_common(grid, true);
  grid->add_option("--out", common.out, "output CSV (default stdout)");

  auto* pmmh = app.add_subcommand("pmmh", "stochastic volatility PMMH");
  add_common(pmmh, true);
  std::string pmmh_algo = "alive";
  std::string pmmh_data;
  std::size_t chains = 1;
  pmmh->add_option("--algo", pmmh_algo, "alive | alive-twisted");
  pmmh->add_option("--data", pmmh_data, "date,close CSV of prices (default: simulate from the config)");
  pmmh->add_option("--chains", chains, "independent chains")->check(CLI::PositiveNumber);
  pmmh->add_option("--out", common.out, "output directory")->required();

  auto* selftest = app.add_subcommand("selftest", "run the oracle checks");
  add_common(selftest, true);
  std::string level = "quick";
  selftest->add_option("--level", level, "quick | full");
  selftest->add_option("--out", common.out, "JSON report without timings");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  try {
    if (*simulate) {
      alive::ExperimentConfig config = load(common);
      if (sim_T) config.T = *sim_T;
      config.validate();
      alive::Stream stream = alive::derive_stream(alive::SeedSpec{config.seed, 0}.child(0xda7a));
      const auto path = alive::simulate(alive::build_model(config), config.T, stream);
      emit(common.out, [&](std::ostream& out) { alive::write_simulation_csv(out, path); });
    } else if (*filter) {
      alive::ExperimentConfig config = load(common);
      if (filter_lag) config.lag = *filter_lag;
      config.validate();
      const auto algo = alive::parse_filter_algo(filter_algo);
      const auto y = filter_data.empty() ? simulated_observations(config) : alive::load_observations(filter_data);
      alive::Stream stream = alive::derive_stream(alive::SeedSpec{config.seed, 0}.child(0xf117));
      const auto rows = alive::run_filter(config, algo, y, stream);
      emit(common.out, [&](std::ostream& out) { alive::write_filter_csv(out, rows); });
    } else if (*grid) {
      const alive::ExperimentConfig config = load(common);
      const auto cells = alive::variance_grid(config, alive::SeedSpec{config.seed, 0}, common.threads);
      emit(common.out, [&](std::ostream& out) { alive::write_grid_csv(out, cells); });
    } else if (*pmmh) {
      alive::ExperimentConfig config = load(common);
      const auto algo = alive::parse_filter_algo(pmmh_algo);
      if (algo != alive::FilterAlgo::alive && algo != alive::FilterAlgo::alive_twisted) {
        throw alive::InvalidArgument("pmmh supports --algo alive or alive-twisted");
      }
      config.model = alive::ModelKind::stochastic_volatility;
      config.validate();
      const bool twisted = algo == alive::FilterAlgo::alive_twisted;
      const auto y = pmmh_data.empty() ? simulated_observations(config) : alive::load_returns(pmmh_data, config.T);
      const auto runs = alive::run_sv_pmmh(config, twisted, y, alive::SeedSpec{config.seed, 0}, chains, common.threads);
      std::filesystem::create_directories(common.out);
      const std::filesystem::path dir(common.out);
      for (std::size_t c = 0; c < runs.size(); ++c) {
        const std::string suffix = runs.size() == 1 ? "" : "_" + std::to_string(c);
        write_file((dir / ("chain" + suffix + ".csv")).string(),
                   [&](std::ostream& out) { alive::write_chain_csv(out, runs[c].record); });
        write_file((dir / ("acf" + suffix + ".csv")).string(),
                   [&](std::ostream& out) { alive::write_acf_csv(out, runs[c]); });
      }
      write_file((dir / "summary.json").string(), [&](std::ostream& out) {
        out << alive::pmmh_summary_json(config, twisted, runs, config.seed);
      });
    } else if (*selftest) {
      alive::SelftestOptions options;
      options.level = alive::parse_selftest_level(level);
      if (common.seed) options.seed = *common.seed;
      options.threads = common.threads;
      bool ok = true;
      const auto results = alive::run_selftest(options);
      for (const auto& r : results) {
        std::cout << r.id << ' ' << (r.passed ? "PASS" : "FAIL") << " (" << r.seconds << " s) " << r.title
                  << ": " << r.detail << std::endl;
        ok = ok && r.passed;
      }
      if (!common.out.empty()) {
        write_file(common.out, [&](std::ostream& out) { out << alive::selftest_report_json(results); });
      }
      return ok ? 0 : kExitSelftest;
    }
  } catch (const alive::CapExceeded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCap;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return 0;
}
