#pragma once

#include <string>
#include <utility>
#include <vector>

#include "epismc/io.hpp"
#include "epismc/presets.hpp"
#include "epismc/products.hpp"
#include "epismc/smc2.hpp"

namespace epismc {

namespace pipeline_detail {
inline constexpr std::uint64_t kSimTag = 0x61;
inline constexpr std::uint64_t kFitTag = 0x62;
inline constexpr std::uint64_t kPoolTag = 0x63;
inline constexpr std::uint64_t kForecastTag = 0x64;
}  // namespace pipeline_detail

// Observations plus, for synthetic runs, the ground truth they came from.
struct DataBundle {
  std::vector<double> observations;
  bool has_truth = false;
  SimulatedEpidemic truth;
  ParamVector true_theta;
};

// Applies an example preset as the base of a config; file entries and CLI
// flags are layered on top by the caller.
inline ExperimentConfig config_from_preset(const ExamplePreset& preset) {
  ExperimentConfig cfg;
  cfg.model = preset.model;
  cfg.init = preset.filter_init;
  cfg.prior = preset.prior;
  cfg.example = preset.name;
  cfg.sim_T = 0;
  return cfg;
}

// Loads the configured data file (aggregating weekly when asked, which
// switches the model to 7-day intervals integrated in daily sub-steps) or
// simulates ground truth from an example preset and/or the sim.* overrides.
// May adjust cfg.model.
inline DataBundle assemble_data(ExperimentConfig& cfg) {
  DataBundle bundle;
  if (!cfg.data_path.empty()) {
    IncidenceSeries series = load_incidence(cfg.data_path);
    if (cfg.aggregate_weekly) {
      series = aggregate_weekly(series);
      cfg.model.dt *= 7;
      if (cfg.model.n_substeps == 1) cfg.model.n_substeps = 7;
    }
    bundle.observations = series.counts_as_double();
    return bundle;
  }

  ParamVector true_theta;
  std::function<double(double)> schedule;
  LatentState initial;
  int default_T = cfg.sim_T;
  if (!cfg.example.empty()) {
    const ExamplePreset preset = example_by_name(cfg.example);
    true_theta = preset.true_theta;
    schedule = preset.beta_schedule;
    initial = preset.sim_initial;
    default_T = preset.default_T;
  } else {
    initial.I = 0;
  }
  if (!cfg.sim_beta.empty()) schedule = parse_beta_schedule(cfg.sim_beta);
  if (cfg.sim_alpha > 0) true_theta.alpha = cfg.sim_alpha;
  if (cfg.sim_gamma > 0) true_theta.gamma = cfg.sim_gamma;
  if (cfg.sim_phi >= 0) true_theta.phi = cfg.sim_phi;
  if (cfg.sim_I0 >= 0) {
    initial.I = cfg.sim_I0;
    initial.E = initial.R = initial.Z = 0;
  }
  initial.S = cfg.model.N - initial.E - initial.I - initial.R;

  const int T = cfg.sim_T > 0 ? cfg.sim_T : default_T;
  RngStream rng(RngKey{cfg.data_seed, 0}.child(pipeline_detail::kSimTag));
  bundle.truth = simulate_epidemic(cfg.model, true_theta, schedule, T, initial, rng);
  bundle.true_theta = true_theta;
  bundle.has_truth = true;
  bundle.observations.assign(bundle.truth.observations.begin(),
                             bundle.truth.observations.end());
  return bundle;
}

inline Smc2Options smc2_options_from_config(const ExperimentConfig& cfg) {
  Smc2Options opt;
  opt.n_theta = cfg.n_theta;
  opt.n_inner = cfg.n_inner;
  opt.pmmh_moves = cfg.pmmh_moves;
  opt.ess_threshold_frac = cfg.ess_threshold;
  opt.proposal_scale = cfg.proposal_scale;
  opt.engine.eta = cfg.eta;
  opt.engine.unbiased = cfg.unbiased;
  opt.engine.threads = 1;  // inner loops stay serial inside particle loops
  opt.threads = cfg.threads == 0 ? hardware_workers() : cfg.threads;
  return opt;
}

// Fit with a specific inner engine; optionally integrates the filtering
// posterior over n_c parameter draws afterwards.
template <class Engine>
FitArtifacts run_fit_engine(const ExperimentConfig& cfg,
                            const std::vector<double>& observations,
                            bool with_state_posterior) {
  const auto make_model = [&cfg](const ParamVector& theta) {
    return SeirSsm{theta, cfg.model, cfg.init};
  };
  Smc2Driver<Engine> driver(make_model, cfg.prior, smc2_options_from_config(cfg));
  const RngKey root = RngKey{cfg.seed, 0}.child(pipeline_detail::kFitTag);
  Smc2Result<Engine> result = driver.run(observations, root);

  FitArtifacts artifacts;
  artifacts.history = std::move(result.history);
  artifacts.free_params = result.free_params;
  artifacts.final_thetas = result.thetas();
  artifacts.final_weights = result.normalized_weights();
  artifacts.diagnostics = std::move(result.diag);
  artifacts.completed = result.completed;
  artifacts.abort_step = result.abort_step;
  artifacts.message = result.message;

  if (with_state_posterior && artifacts.completed && !observations.empty()) {
    PoolOptions popt;
    popt.n_draws = cfg.n_c;
    popt.n_inner = cfg.n_inner;
    popt.engine.eta = cfg.eta;
    popt.engine.unbiased = cfg.unbiased;
    popt.engine.threads = 1;
    popt.threads = cfg.threads == 0 ? hardware_workers() : cfg.threads;
    const auto pool = marginal_state_posterior<Engine>(
        observations, artifacts.final_thetas, artifacts.final_weights, make_model, popt,
        RngKey{cfg.seed, 0}.child(pipeline_detail::kPoolTag));
    artifacts.state_posterior = pool.posterior;
  }
  return artifacts;
}

inline FitArtifacts run_fit(const ExperimentConfig& cfg,
                            const std::vector<double>& observations,
                            bool with_state_posterior = true) {
  if (cfg.engine == "bpf")
    return run_fit_engine<BpfEngine<SeirSsm>>(cfg, observations, with_state_posterior);
  return run_fit_engine<EnkfEngine<SeirSsm>>(cfg, observations, with_state_posterior);
}

// Rebuilds the filtering pool from stored posterior samples and projects it
// forward. Used by the forecast command and the calibration tests.
template <class Engine>
ForecastFan run_forecast_engine(const ExperimentConfig& cfg,
                                const std::vector<double>& observations,
                                const std::vector<ParamVector>& thetas,
                                const std::vector<double>& weights, int horizon,
                                bool diffusive_beta = false) {
  const auto make_model = [&cfg](const ParamVector& theta) {
    return SeirSsm{theta, cfg.model, cfg.init};
  };
  PoolOptions popt;
  popt.n_draws = cfg.n_c;
  popt.n_inner = cfg.n_inner;
  popt.engine.eta = cfg.eta;
  popt.engine.unbiased = cfg.unbiased;
  popt.engine.threads = 1;
  popt.threads = cfg.threads == 0 ? hardware_workers() : cfg.threads;
  const auto pool = marginal_state_posterior<Engine>(
      observations, thetas, weights, make_model, popt,
      RngKey{cfg.seed, 0}.child(pipeline_detail::kPoolTag));

  ForecastOptions fopt;
  fopt.horizon = horizon;
  fopt.diffusive_beta = diffusive_beta;
  fopt.threads = popt.threads;
  return forecast<Engine>(pool, cfg.model, fopt,
                          RngKey{cfg.seed, 0}.child(pipeline_detail::kForecastTag));
}

inline ForecastFan run_forecast(const ExperimentConfig& cfg,
                                const std::vector<double>& observations,
                                const std::vector<ParamVector>& thetas,
                                const std::vector<double>& weights, int horizon,
                                bool diffusive_beta = false) {
  if (cfg.engine == "bpf")
    return run_forecast_engine<BpfEngine<SeirSsm>>(cfg, observations, thetas, weights,
                                                   horizon, diffusive_beta);
  return run_forecast_engine<EnkfEngine<SeirSsm>>(cfg, observations, thetas, weights,
                                                  horizon, diffusive_beta);
}

}  // namespace epismc
