#include "alive/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "alive/error.hpp"
#include "alive/stats.hpp"
#include "json.hpp"

namespace alive {

using nlohmann::json;

namespace {

template <typename T>
T get_number(const json& value, const std::string& key) {
  if (!value.is_number()) throw InvalidArgument("config key '" + key + "' must be a number");
  if constexpr (std::is_integral_v<T>) {
    if (!value.is_number_integer() || (std::is_unsigned_v<T> && value.get<double>() < 0)) {
      throw InvalidArgument("config key '" + key + "' must be a non-negative integer");
    }
  }
  return value.get<T>();
}

std::vector<double> get_vector(const json& value, const std::string& key) {
  if (!value.is_array()) throw InvalidArgument("config key '" + key + "' must be an array");
  std::vector<double> out;
  for (const auto& v : value) out.push_back(get_number<double>(v, key));
  return out;
}

std::vector<std::vector<double>> get_matrix(const json& value, const std::string& key) {
  if (!value.is_array()) throw InvalidArgument("config key '" + key + "' must be an array of rows");
  std::vector<std::vector<double>> out;
  for (const auto& row : value) out.push_back(get_vector(row, key));
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  fields.push_back(field);
  return fields;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

double parse_double(const std::string& text, const std::string& path, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument(path + ":" + std::to_string(line) + ": '" + text + "' is not a number");
  }
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (first) {
      for (auto& f : fields) f = lower(f);
      table.header = std::move(fields);
      first = false;
    } else {
      if (fields.size() != table.header.size()) {
        throw InvalidArgument(path + ": row " + std::to_string(table.rows.size() + 2) +
                              " has the wrong number of fields");
      }
      table.rows.push_back(std::move(fields));
    }
  }
  if (first) throw InvalidArgument(path + ": empty file");
  return table;
}

std::size_t column_index(const CsvTable& table, std::initializer_list<const char*> names,
                         std::size_t fallback, const std::string& path) {
  for (const char* name : names) {
    auto it = std::find(table.header.begin(), table.header.end(), name);
    if (it != table.header.end()) return static_cast<std::size_t>(it - table.header.begin());
  }
  if (fallback < table.header.size()) return fallback;
  throw InvalidArgument(path + ": missing column '" + *names.begin() + "'");
}

DiscreteHmmParams default_discrete() {
  DiscreteHmmParams p;
  p.initial = {0.5, 0.3, 0.2};
  p.transition = {{0.8, 0.15, 0.05}, {0.1, 0.8, 0.1}, {0.05, 0.15, 0.8}};
  p.emission = {{0.7, 0.2, 0.1}, {0.2, 0.6, 0.2}, {0.1, 0.2, 0.7}};
  return p;
}

}  // namespace

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "linear_gaussian") return ModelKind::linear_gaussian;
  if (name == "stochastic_volatility") return ModelKind::stochastic_volatility;
  if (name == "discrete") return ModelKind::discrete;
  throw InvalidArgument("unknown model kind '" + name + "'");
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::linear_gaussian: return "linear_gaussian";
    case ModelKind::stochastic_volatility: return "stochastic_volatility";
    case ModelKind::discrete: return "discrete";
  }
  return "linear_gaussian";
}

void ExperimentConfig::validate() const {
  kernel.validate();
  if (N < 2) throw InvalidArgument("N must be at least 2");
  if (cap < N) throw InvalidArgument("cap must be at least N");
  if (lag < 1) throw InvalidArgument("lag must be at least 1");
  if (T < 1) throw InvalidArgument("T must be at least 1");
  if (nu_axis.empty() || tau_axis.empty()) throw InvalidArgument("grid axes must be nonempty");
  for (double v : nu_axis) {
    if (!(v > 0.0)) throw InvalidArgument("grid values of nu must be positive");
  }
  for (double v : tau_axis) {
    if (!(v > 0.0)) throw InvalidArgument("grid values of tau must be positive");
  }
  if (replicates < 2) throw InvalidArgument("replicates must be at least 2");
  if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0)) {
    throw InvalidArgument("burn_in must lie in [0, 1)");
  }
  prior.validate();
  proposal.validate();
  switch (model) {
    case ModelKind::linear_gaussian: lg.validate(); break;
    case ModelKind::stochastic_volatility: sv.validate(); break;
    case ModelKind::discrete: discrete.validate(); break;
  }
}

ExperimentConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw InvalidArgument("config must be a JSON object");

  ExperimentConfig c;
  c.discrete = default_discrete();
  std::optional<double> nu2, tau2;
  for (const auto& [key, value] : doc.items()) {
    if (key == "model") {
      if (!value.is_string()) throw InvalidArgument("config key 'model' must be a string");
      c.model = parse_model_kind(value.get<std::string>());
    } else if (key == "phi") {
      c.lg.phi = get_number<double>(value, key);
    } else if (key == "nu2") {
      nu2 = get_number<double>(value, key);
    } else if (key == "tau2") {
      tau2 = get_number<double>(value, key);
    } else if (key == "F") {
      c.sv.F = get_number<double>(value, key);
    } else if (key == "alpha") {
      c.sv.alpha = get_number<double>(value, key);
    } else if (key == "beta") {
      c.sv.beta = get_number<double>(value, key);
    } else if (key == "gamma") {
      c.sv.gamma = get_number<double>(value, key);
    } else if (key == "delta") {
      c.sv.delta = get_number<double>(value, key);
    } else if (key == "initial") {
      c.discrete.initial = get_vector(value, key);
    } else if (key == "transition") {
      c.discrete.transition = get_matrix(value, key);
    } else if (key == "emission") {
      c.discrete.emission = get_matrix(value, key);
    } else if (key == "epsilon") {
      c.kernel.epsilon = get_number<double>(value, key);
    } else if (key == "ball_mode") {
      if (!value.is_string()) throw InvalidArgument("config key 'ball_mode' must be a string");
      c.kernel.mode = parse_ball_mode(value.get<std::string>());
    } else if (key == "relative_floor") {
      c.kernel.relative_floor = get_number<double>(value, key);
    } else if (key == "N") {
      c.N = get_number<std::size_t>(value, key);
    } else if (key == "cap") {
      c.cap = get_number<std::size_t>(value, key);
    } else if (key == "lag") {
      c.lag = get_number<int>(value, key);
    } else if (key == "T") {
      c.T = get_number<std::size_t>(value, key);
    } else if (key == "seed") {
      c.seed = get_number<std::uint64_t>(value, key);
    } else if (key == "nu") {
      c.nu_axis = get_vector(value, key);
    } else if (key == "tau") {
      c.tau_axis = get_vector(value, key);
    } else if (key == "replicates") {
      c.replicates = get_number<std::size_t>(value, key);
    } else if (key == "iterations") {
      c.iterations = get_number<std::size_t>(value, key);
    } else if (key == "burn_in") {
      c.burn_in_fraction = get_number<double>(value, key);
    } else if (key == "max_lag") {
      c.max_lag = get_number<std::size_t>(value, key);
    } else if (key == "prior_F_mean") {
      c.prior.F_mean = get_number<double>(value, key);
    } else if (key == "prior_F_variance") {
      c.prior.F_variance = get_number<double>(value, key);
    } else if (key == "prior_nu_shape") {
      c.prior.nu_shape = get_number<double>(value, key);
    } else if (key == "prior_nu_scale") {
      c.prior.nu_scale = get_number<double>(value, key);
    } else if (key == "prior_gamma_shape") {
      c.prior.gamma_shape = get_number<double>(value, key);
    } else if (key == "prior_gamma_scale") {
      c.prior.gamma_scale = get_number<double>(value, key);
    } else if (key == "proposal_F_variance") {
      c.proposal.F_variance = get_number<double>(value, key);
    } else if (key == "proposal_log_nu2_variance") {
      c.proposal.log_nu2_variance = get_number<double>(value, key);
    } else if (key == "proposal_log_gamma_variance") {
      c.proposal.log_gamma_variance = get_number<double>(value, key);
    } else {
      throw InvalidArgument("unknown config key '" + key + "'");
    }
  }
  // nu2 is shared by the two continuous models.
  if (nu2) c.lg.nu2 = c.sv.nu2 = *nu2;
  if (tau2) c.lg.tau2 = *tau2;
  if (c.model == ModelKind::discrete) {
    c.discrete.ball = ball_from_kernel(c.kernel, c.discrete.num_symbols());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path + "'");
  std::stringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

HmmModel build_model(const ExperimentConfig& config) {
  switch (config.model) {
    case ModelKind::linear_gaussian: return lg_model(config.lg);
    case ModelKind::stochastic_volatility: return sv_model(config.sv);
    case ModelKind::discrete: return discrete_model(config.discrete);
  }
  throw InvalidArgument("unknown model");
}

TwistPtr build_twist(const ExperimentConfig& config, std::span<const double> observations) {
  switch (config.model) {
    case ModelKind::linear_gaussian: return lg_twist(config.lg, config.lag);
    case ModelKind::stochastic_volatility: return sv_twist(config.sv, config.lag);
    case ModelKind::discrete:
      return discrete_table_twist(config.discrete, discrete_oracle_table(config.discrete, observations));
  }
  throw InvalidArgument("unknown model");
}

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mutex;
  std::size_t failed_index = count;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mutex);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<FilterRow> run_filter(const ExperimentConfig& config, FilterAlgo algo,
                                  std::span<const double> observations, Stream& stream) {
  const HmmModel model = build_model(config);
  std::vector<FilterRow> rows(observations.size());
  const NormConstEstimate* estimate = nullptr;
  AliveResult alive;
  BootstrapResult boot;
  switch (algo) {
    case FilterAlgo::alive:
      alive = alive_filter(model, config.kernel, observations, config.N, config.cap, stream);
      break;
    case FilterAlgo::alive_twisted:
      alive = alive_twisted_filter(model, config.kernel, *build_twist(config, observations), observations,
                                   config.N, config.cap, stream);
      break;
    case FilterAlgo::bootstrap:
      boot = bootstrap_filter(model, observations, config.N, stream);
      break;
    case FilterAlgo::twisted_bootstrap:
      boot = twisted_bootstrap_filter(model, *build_twist(config, observations), observations, config.N, stream);
      break;
  }
  const bool is_alive = algo == FilterAlgo::alive || algo == FilterAlgo::alive_twisted;
  estimate = is_alive ? &alive.estimate : &boot.estimate;
  const auto& stats = is_alive ? alive.twist_stats : boot.twist_stats;
  double running = 0.0;
  for (std::size_t n = 0; n < rows.size(); ++n) {
    rows[n].stopping_time = is_alive ? alive.generations[n].stopping_time : config.N;
    rows[n].log_factor = estimate->log_factors[n];
    running += rows[n].log_factor;
    rows[n].cumulative_log_z = running;
    if (!stats.empty()) rows[n].twist = stats[n];
  }
  return rows;
}

void write_filter_csv(std::ostream& out, const std::vector<FilterRow>& rows) {
  const bool twisted = !rows.empty() && rows.front().twist.has_value();
  out << "step,stopping_time,log_factor,cumulative_log_z";
  if (twisted) out << ",twisted_index,qh_sum,wh_sum,h_sum";
  out << "\n";
  for (std::size_t n = 0; n < rows.size(); ++n) {
    const FilterRow& r = rows[n];
    out << n + 1 << ',' << r.stopping_time << ',' << format_double(r.log_factor) << ','
        << format_double(r.cumulative_log_z);
    if (twisted) {
      out << ',' << r.twist->twisted_index + 1 << ',' << format_double(std::exp(r.twist->log_qh_sum)) << ','
          << format_double(std::exp(r.twist->log_wh_sum)) << ',' << format_double(std::exp(r.twist->log_h_sum));
    }
    out << "\n";
  }
}

void write_simulation_csv(std::ostream& out, const SimulatedPath& path) {
  out << "step,latent,observation\n";
  for (std::size_t n = 0; n < path.latent.size(); ++n) {
    out << n + 1 << ',' << format_double(path.latent[n]) << ',' << format_double(path.observations[n]) << "\n";
  }
}

std::vector<double> load_observations(const std::string& path) {
  const CsvTable table = read_csv(path);
  const std::size_t fallback = table.header.size() == 1 ? 0 : table.header.size();
  const std::size_t col = column_index(table, {"observation", "y"}, fallback, path);
  std::vector<double> y;
  for (std::size_t i = 0; i < table.rows.size(); ++i) y.push_back(parse_double(table.rows[i][col], path, i + 2));
  if (y.empty()) throw InvalidArgument(path + ": no observations");
  return y;
}

std::vector<double> returns_from_prices(std::span<const double> prices) {
  for (double p : prices) {
    if (!(p > 0.0) || !std::isfinite(p)) throw InvalidArgument("prices must be positive");
  }
  std::vector<double> r;
  for (std::size_t n = 1; n < prices.size(); ++n) r.push_back(std::log(prices[n] / prices[n - 1]));
  return r;
}

std::vector<double> load_returns(const std::string& path, std::optional<std::size_t> T) {
  const CsvTable table = read_csv(path);
  const std::size_t date_col = column_index(table, {"date"}, 0, path);
  const std::size_t close_col = column_index(table, {"close", "adj close", "price"}, 1, path);
  std::vector<double> prices;
  std::string previous_date;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const std::string& date = table.rows[i][date_col];
    if (i > 0 && !(previous_date < date)) {
      throw InvalidArgument(path + ":" + std::to_string(i + 2) + ": dates are not in ascending order");
    }
    previous_date = date;
    const double price = parse_double(table.rows[i][close_col], path, i + 2);
    if (!(price > 0.0)) {
      throw InvalidArgument(path + ":" + std::to_string(i + 2) + ": non-positive price");
    }
    prices.push_back(price);
  }
  std::vector<double> r = returns_from_prices(prices);
  if (T) {
    if (*T > r.size()) {
      throw InvalidArgument(path + ": " + std::to_string(r.size()) + " returns available, " +
                            std::to_string(*T) + " requested");
    }
    r.resize(*T);
  }
  if (r.empty()) throw InvalidArgument(path + ": need at least two prices");
  return r;
}

GridCell compare_variances(std::span<const double> log_z_alive, std::span<const double> log_z_twisted) {
  GridCell cell;
  const LogMoments a = log_moments(log_z_alive);
  const LogMoments t = log_moments(log_z_twisted);
  if (!std::isfinite(a.log_variance) || !std::isfinite(t.log_variance)) {
    cell.reason = "zero variance";
    return cell;
  }
  cell.ok = true;
  cell.log_var_alive = a.log_variance;
  cell.log_var_twisted = t.log_variance;
  cell.difference = a.log_variance - t.log_variance;
  return cell;
}

CellSeeds cell_seeds(SeedSpec base, std::size_t nu_index, std::size_t tau_index) {
  const SeedSpec cell = base.with_stream(0).child((static_cast<std::uint64_t>(nu_index) << 32) | tau_index);
  return {cell.child(1), cell.child(2), cell.child(3)};
}

GridCell variance_cell(const ExperimentConfig& config, double nu, double tau, const CellSeeds& seeds,
                       std::size_t threads) {
  LinearGaussianParams params = config.lg;
  params.nu2 = nu * nu;
  params.tau2 = tau * tau;
  const HmmModel model = lg_model(params);
  const TwistPtr twist = lg_twist(params, config.lag);

  Stream data_stream = derive_stream(seeds.data);
  const std::vector<double> y = simulate(model, config.T, data_stream).observations;

  const std::size_t R = config.replicates;
  std::vector<double> log_alive(R), log_twisted(R);
  std::vector<std::string> failures(R);
  parallel_for(R, threads, [&](std::size_t r) {
    try {
      Stream a = derive_stream(seeds.alive.with_stream(r));
      log_alive[r] = alive_filter(model, config.kernel, y, config.N, config.cap, a).estimate.log_total;
      Stream t = derive_stream(seeds.twisted.with_stream(r));
      log_twisted[r] =
          alive_twisted_filter(model, config.kernel, *twist, y, config.N, config.cap, t).estimate.log_total;
    } catch (const CapExceeded& e) {
      failures[r] = e.what();
    } catch (const DegenerateTwist& e) {
      failures[r] = e.what();
    }
  });

  for (std::size_t r = 0; r < R; ++r) {
    if (!failures[r].empty()) {
      GridCell cell;
      cell.nu = nu;
      cell.tau = tau;
      cell.reason = "replicate " + std::to_string(r) + ": " + failures[r];
      return cell;
    }
  }
  GridCell cell = compare_variances(log_alive, log_twisted);
  cell.nu = nu;
  cell.tau = tau;
  return cell;
}

std::vector<GridCell> variance_grid(const ExperimentConfig& config, SeedSpec base, std::size_t threads) {
  config.validate();
  std::vector<GridCell> cells;
  for (std::size_t i = 0; i < config.nu_axis.size(); ++i) {
    for (std::size_t j = 0; j < config.tau_axis.size(); ++j) {
      cells.push_back(variance_cell(config, config.nu_axis[i], config.tau_axis[j], cell_seeds(base, i, j), threads));
    }
  }
  return cells;
}

void write_grid_csv(std::ostream& out, const std::vector<GridCell>& cells) {
  out << "nu,tau,log_var_alive,log_var_alive_twisted,difference,status\n";
  for (const GridCell& c : cells) {
    out << format_double(c.nu) << ',' << format_double(c.tau) << ',';
    if (c.ok) {
      out << format_double(c.log_var_alive) << ',' << format_double(c.log_var_twisted) << ','
          << format_double(c.difference) << ",ok\n";
    } else {
      std::string reason = c.reason;
      std::replace(reason.begin(), reason.end(), '"', '\'');
      out << ",,,\"missing: " << reason << "\"\n";
    }
  }
}

SvStudy sv_study(const ExperimentConfig& config, bool twisted) {
  SvStudy study;
  study.fixed = config.sv;
  study.prior = config.prior;
  study.proposal = config.proposal;
  study.kernel = config.kernel;
  study.N = config.N;
  study.cap = config.cap;
  study.lag = config.lag;
  study.twisted = twisted;
  return study;
}

ChainSummary summarise_chain(ChainRecord<SvTheta> record, double burn_in_fraction, std::size_t max_lag) {
  ChainSummary s;
  s.burn_in = static_cast<std::size_t>(std::floor(burn_in_fraction * static_cast<double>(record.iterations())));
  const std::size_t start = s.burn_in + 1;
  if (record.theta.size() > start + 1) {
    const std::size_t n = record.theta.size() - start;
    const std::size_t lags = std::min(max_lag, n - 1);
    std::vector<double> series(n);
    auto column = [&](auto member) {
      for (std::size_t i = 0; i < n; ++i) series[i] = record.theta[start + i].*member;
      try {
        return acf(series, lags);
      } catch (const InvalidArgument&) {
        return std::vector<double>{};
      }
    };
    s.acf = {column(&SvTheta::F), column(&SvTheta::nu2), column(&SvTheta::gamma)};
  }
  s.record = std::move(record);
  return s;
}

std::vector<ChainSummary> run_sv_pmmh(const ExperimentConfig& config, bool twisted,
                                      std::span<const double> observations, SeedSpec seed,
                                      std::size_t chains, std::size_t threads) {
  if (chains == 0) throw InvalidArgument("need at least one chain");
  const PmmhProblem<SvTheta> problem = sv_problem(sv_study(config, twisted), observations);
  std::vector<ChainSummary> out(chains);
  const SeedSpec family = seed.with_stream(0).child(twisted ? 0x7715 : 0xa11e);
  parallel_for(chains, threads, [&](std::size_t c) {
    Stream stream = derive_stream(family.with_stream(c));
    out[c] = summarise_chain(run_chain(problem, config.iterations, stream), config.burn_in_fraction,
                             config.max_lag);
  });
  return out;
}

void write_chain_csv(std::ostream& out, const ChainRecord<SvTheta>& record) {
  out << "iteration,F,nu2,gamma,log_zhat,accepted\n";
  for (std::size_t m = 0; m < record.theta.size(); ++m) {
    const SvTheta& t = record.theta[m];
    out << m << ',' << format_double(t.F) << ',' << format_double(t.nu2) << ',' << format_double(t.gamma) << ','
        << format_double(record.log_zhat[m]) << ',' << static_cast<int>(record.accepted[m]) << "\n";
  }
}

void write_acf_csv(std::ostream& out, const ChainSummary& summary) {
  out << "lag,F,nu2,gamma\n";
  std::size_t lags = 0;
  for (const auto& col : summary.acf) lags = std::max(lags, col.size());
  for (std::size_t k = 0; k < lags; ++k) {
    out << k;
    for (const auto& col : summary.acf) {
      out << ',';
      if (k < col.size()) out << format_double(col[k]);
    }
    out << "\n";
  }
}

std::string pmmh_summary_json(const ExperimentConfig& config, bool twisted,
                              const std::vector<ChainSummary>& chains, std::uint64_t seed) {
  json doc;
  doc["algorithm"] = twisted ? "alive-twisted" : "alive";
  doc["seed"] = seed;
  doc["iterations"] = config.iterations;
  doc["N"] = config.N;
  doc["epsilon"] = config.kernel.epsilon;
  doc["ball_mode"] = to_string(config.kernel.mode);
  doc["burn_in_fraction"] = config.burn_in_fraction;
  if (twisted) {
    doc["lag"] = config.lag;
    doc["twist"] = sv_twist(config.sv, config.lag)->description();
  }
  json list = json::array();
  for (const ChainSummary& c : chains) {
    json entry;
    entry["acceptance_rate"] = c.record.acceptance_rate();
    entry["cap_exceeded"] = c.record.cap_events;
    entry["degenerate_twist"] = c.record.degenerate_events;
    entry["burn_in"] = c.burn_in;
    entry["acf_available"] = !c.acf.empty() && !c.acf[0].empty() && !c.acf[1].empty() && !c.acf[2].empty();
    list.push_back(entry);
  }
  doc["chains"] = list;
  return doc.dump(2) + "\n";
}

}  // namespace alive
