#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "epismc/model.hpp"
#include "epismc/products.hpp"
#include "epismc/smc2.hpp"
#include "epismc/ssm.hpp"
#include "epismc/stochastic.hpp"

namespace epismc {

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Ordered incidence record. Times are day offsets from the first record;
// labels keep the original first-column text for output.
struct IncidenceSeries {
  std::vector<std::string> labels;
  std::vector<std::int64_t> times;
  std::vector<std::int64_t> counts;
  int interval_days = 1;

  std::size_t size() const noexcept { return counts.size(); }
  std::vector<double> counts_as_double() const {
    return std::vector<double>(counts.begin(), counts.end());
  }
};

// Parses `date,count` (ISO-8601 dates) or `t,count` (integer index) CSV.
// Rows must be strictly increasing with no gaps; malformed rows are
// reported with their line number.
IncidenceSeries load_incidence(const std::string& path);

// Sums counts over consecutive 7-day windows; a trailing partial window is
// dropped. interval_days becomes 7.
IncidenceSeries aggregate_weekly(const IncidenceSeries& daily);

// Full experiment description. Every knob is reachable through the flat
// key=value config format (one `key = value` per line, '#' comments) and
// the same keys echo into the run manifest, so a manifest reproduces its
// run exactly. Unknown keys are rejected.
struct ExperimentConfig {
  ModelConfig model;
  InitStateSpec init;
  PriorSpec prior;

  std::string engine = "enkf";  // enkf | bpf
  int n_theta = 1000;
  int n_inner = 200;
  int pmmh_moves = 5;
  double ess_threshold = 0.5;   // fraction of n_theta
  double proposal_scale = 1.0;
  double eta = 0.1;
  bool unbiased = true;
  int n_c = 100;

  std::uint64_t seed = 1;
  int threads = 0;              // 0: all available workers
  int horizon = 14;

  std::string data_path;
  std::string example;          // example1 | example2 | empty
  int sim_T = 0;                // 0: the example's default length
  std::uint64_t data_seed = 1;
  bool aggregate_weekly = false;

  // custom simulation instead of (or overriding parts of) an example:
  // sim.beta takes const(v), expsin(scale,period,decay) for
  // scale*exp(sin(2 pi t/period) - t/decay), or bump(scale,center,width,floor)
  // for scale*exp(-((t-center)/width)^2) + floor
  std::string sim_beta;
  double sim_alpha = -1;  // negative: inherit from the example
  double sim_gamma = -1;
  double sim_phi = -1;
  double sim_I0 = -1;

  std::string out_dir = "out";
};

// Parses the sim.beta schedule syntax; throws config_error on bad input.
std::function<double(double)> parse_beta_schedule(const std::string& text);

// Set one key; throws config_error on unknown keys or unparsable values.
void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                        const std::string& value);

// Raw key=value pairs of a config file, in file order.
std::vector<std::pair<std::string, std::string>> parse_config_entries(
    const std::string& path);

ExperimentConfig load_config_file(const std::string& path);

// All keys in canonical order with their current values, the manifest echo.
std::vector<std::pair<std::string, std::string>> config_entries(
    const ExperimentConfig& cfg);

// Validation of ranges and referenced files; throws config_error.
void validate_config(const ExperimentConfig& cfg);

// Everything a `fit` run leaves behind.
struct FitArtifacts {
  std::vector<HistoryRow> history;
  std::vector<int> free_params;
  std::vector<ParamVector> final_thetas;
  std::vector<double> final_weights;
  StatePosterior state_posterior;      // may be empty
  RunDiagnostics diagnostics;
  bool completed = true;
  int abort_step = -1;
  std::string message;
};

// Writes param_history.csv, posterior_samples.csv, state_posterior.csv
// (whichever are non-empty) plus manifest.json; returns the manifest path.
std::string write_results(const std::string& out_dir, const ExperimentConfig& cfg,
                          const std::string& command, const FitArtifacts& artifacts);

void write_forecast_csv(const std::string& path, const ForecastFan& fan);
void write_simulation_csvs(const std::string& out_dir, const SimulatedEpidemic& sim,
                           const ParamVector& truth, const ModelConfig& cfg);

// Reads the "config" object back out of a manifest written by write_results.
ExperimentConfig config_from_manifest(const std::string& manifest_path);

// Reload helpers used by the forecast command and the round-trip tests.
struct PosteriorSample {
  double weight;
  ParamVector theta;
};
std::vector<PosteriorSample> load_posterior_samples(const std::string& path);
std::vector<HistoryRow> load_param_history(const std::string& path,
                                           std::vector<int>& free_params);
StatePosterior load_state_posterior(const std::string& path);

}  // namespace epismc
