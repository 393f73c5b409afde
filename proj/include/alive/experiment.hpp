#ifndef ALIVE_EXPERIMENT_HPP
#define ALIVE_EXPERIMENT_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alive/abc.hpp"
#include "alive/models.hpp"
#include "alive/pmmh.hpp"
#include "alive/rng.hpp"
#include "alive/smc.hpp"
#include "alive/twist.hpp"

namespace alive {

enum class ModelKind { linear_gaussian, stochastic_volatility, discrete };

ModelKind parse_model_kind(const std::string& name);
std::string to_string(ModelKind kind);

/// Flat experiment configuration. Every key is optional in the JSON file;
/// unknown keys are rejected.
struct ExperimentConfig {
  ModelKind model = ModelKind::linear_gaussian;
  LinearGaussianParams lg;
  StochVolParams sv;
  DiscreteHmmParams discrete;

  AbcKernel kernel{1.5, BallMode::relative, 1e-8};
  std::size_t N = 200;
  std::size_t cap = kDefaultCap;
  int lag = 5;
  std::size_t T = 100;
  std::uint64_t seed = 0;

  // variance grid; axes are standard deviations (nu, tau)
  std::vector<double> nu_axis{1.0};
  std::vector<double> tau_axis{1.0};
  std::size_t replicates = 300;

  // pmmh
  std::size_t iterations = 100000;
  double burn_in_fraction = 0.1;
  std::size_t max_lag = 50;
  SvPrior prior;
  SvProposal proposal;

  void validate() const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

HmmModel build_model(const ExperimentConfig& config);
/// Twist matching the configured model; for the discrete model this is the
/// backward-recursion table for `observations`.
TwistPtr build_twist(const ExperimentConfig& config, std::span<const double> observations);

/// Runs fn(0..count-1) on up to `threads` worker threads. Work items must be
/// independent; the first exception by index is rethrown.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn);

/// Per-step trace of one filter run, as written by `filter`.
struct FilterRow {
  std::size_t stopping_time = 0;
  double log_factor = 0.0;
  double cumulative_log_z = 0.0;
  std::optional<TwistStepStats> twist;
};

std::vector<FilterRow> run_filter(const ExperimentConfig& config, FilterAlgo algo,
                                  std::span<const double> observations, Stream& stream);
void write_filter_csv(std::ostream& out, const std::vector<FilterRow>& rows);

void write_simulation_csv(std::ostream& out, const SimulatedPath& path);

/// Observation column from a CSV with a header row: the column named
/// "observation" or "y", or the only column.
std::vector<double> load_observations(const std::string& path);

/// Log returns log(p_n / p_{n-1}) from a date,close CSV with ascending dates.
/// When T is given the first T returns are kept.
std::vector<double> load_returns(const std::string& path, std::optional<std::size_t> T = std::nullopt);
std::vector<double> returns_from_prices(std::span<const double> prices);

// Variance grid.

struct GridCell {
  double nu = 0.0;
  double tau = 0.0;
  bool ok = false;
  std::string reason;
  double log_var_alive = 0.0;
  double log_var_twisted = 0.0;
  double difference = 0.0;  ///< log var(alive) - log var(alive twisted)
};

/// Variance comparison from per-replicate log estimates of the two filters.
GridCell compare_variances(std::span<const double> log_z_alive, std::span<const double> log_z_twisted);

/// Seeds used for one cell; replicate r uses stream id r of the two filter seeds.
struct CellSeeds {
  SeedSpec data;
  SeedSpec alive;
  SeedSpec twisted;
};

CellSeeds cell_seeds(SeedSpec base, std::size_t nu_index, std::size_t tau_index);

GridCell variance_cell(const ExperimentConfig& config, double nu, double tau, const CellSeeds& seeds,
                       std::size_t threads);
std::vector<GridCell> variance_grid(const ExperimentConfig& config, SeedSpec base, std::size_t threads);
void write_grid_csv(std::ostream& out, const std::vector<GridCell>& cells);

// Stochastic volatility PMMH study.

SvStudy sv_study(const ExperimentConfig& config, bool twisted);

struct ChainSummary {
  ChainRecord<SvTheta> record;
  std::size_t burn_in = 0;
  /// acf columns for F, nu2, gamma; empty when the post-burn-in series is constant
  std::vector<std::vector<double>> acf;
};

ChainSummary summarise_chain(ChainRecord<SvTheta> record, double burn_in_fraction, std::size_t max_lag);

/// Runs `chains` independent chains; chain c uses stream id c.
std::vector<ChainSummary> run_sv_pmmh(const ExperimentConfig& config, bool twisted,
                                      std::span<const double> observations, SeedSpec seed,
                                      std::size_t chains, std::size_t threads);

void write_chain_csv(std::ostream& out, const ChainRecord<SvTheta>& record);
void write_acf_csv(std::ostream& out, const ChainSummary& summary);
std::string pmmh_summary_json(const ExperimentConfig& config, bool twisted,
                              const std::vector<ChainSummary>& chains, std::uint64_t seed);

/// %.17g, so every written value reads back to the same double.
std::string format_double(double value);

}  // namespace alive

#endif  // ALIVE_EXPERIMENT_HPP
