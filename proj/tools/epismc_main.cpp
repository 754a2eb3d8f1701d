#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "epismc/pipeline.hpp"

namespace {

using namespace epismc;

// CLI flags collected as config entries so they layer over config files.
struct FlagSet {
  std::vector<std::pair<std::string, std::string>> entries;
  std::string config_path;
  std::string example;

  void add(CLI::App* cmd) {
    auto opt = [this](const std::string& flag, const std::string& key,
                      const std::string& help, CLI::App* app) {
      app->add_option_function<std::string>(
          flag, [this, key](const std::string& v) { entries.emplace_back(key, v); }, help);
    };
    cmd->add_option("--config", config_path, "key = value configuration file");
    cmd->add_option("--example", example, "built-in synthetic study (example1|example2)");
    opt("--engine", "alg.engine", "inner likelihood engine (enkf|bpf)", cmd);
    opt("--ntheta", "alg.ntheta", "number of parameter particles", cmd);
    opt("--nx", "alg.nx", "ensemble members / state particles per filter", cmd);
    opt("--moves", "alg.moves", "metropolis moves per rejuvenation", cmd);
    opt("--ess-threshold", "alg.ess_threshold", "rejuvenation trigger, fraction of ntheta",
        cmd);
    opt("--proposal-scale", "alg.proposal_scale", "proposal covariance scale c", cmd);
    opt("--eta", "alg.eta", "observation-variance floor", cmd);
    opt("--nc", "alg.nc", "parameter draws for the state posterior", cmd);
    opt("--obs", "model.obs", "observation model (poisson|negbin)", cmd);
    opt("--rho", "model.rho", "reporting fraction", cmd);
    opt("--seed", "run.seed", "random seed", cmd);
    opt("--threads", "run.threads", "worker count (0 = all)", cmd);
    opt("--horizon", "run.horizon", "forecast horizon in intervals", cmd);
    opt("--data", "data.path", "incidence CSV (date,count or t,count)", cmd);
    opt("--T", "data.sim_T", "length of the simulated record", cmd);
    opt("--data-seed", "data.seed", "seed of the simulated record", cmd);
    opt("--out", "out.dir", "output directory", cmd);
    cmd->add_flag_callback(
        "--aggregate-weekly",
        [this] { entries.emplace_back("data.aggregate_weekly", "true"); },
        "sum counts over 7-day windows before fitting");
    cmd->add_flag_callback(
        "--plain-likelihood",
        [this] { entries.emplace_back("alg.unbiased", "false"); },
        "plug-in Gaussian likelihood instead of the finite-sample correction");
  }

  ExperimentConfig assemble() const {
    std::vector<std::pair<std::string, std::string>> file_entries;
    if (!config_path.empty()) file_entries = parse_config_entries(config_path);

    std::string example_name = example;
    if (example_name.empty())
      for (const auto& [k, v] : file_entries)
        if (k == "data.example") example_name = v;
    for (const auto& [k, v] : entries)
      if (k == "data.example") example_name = v;

    ExperimentConfig cfg;
    if (!example_name.empty()) cfg = config_from_preset(example_by_name(example_name));
    for (const auto& [k, v] : file_entries) apply_config_entry(cfg, k, v);
    for (const auto& [k, v] : entries) apply_config_entry(cfg, k, v);
    if (!example_name.empty()) cfg.example = example_name;
    return cfg;
  }
};

struct TruthMetrics {
  Metrics incidence;          // filtered mean against the reported counts
  Metrics incidence_latent;   // filtered mean against the noise-free truth
  Metrics beta;
  Metrics r_eff;
};

TruthMetrics truth_metrics(const StatePosterior& posterior, const SimulatedEpidemic& truth,
                           const ModelConfig& model, const ParamVector& true_theta) {
  const std::size_t T = posterior.rows.size();
  std::vector<double> est_inc(T), obs_inc(T), tru_inc(T), est_beta(T), tru_beta(T),
      est_reff(T), tru_reff(T);
  for (std::size_t t = 0; t < T; ++t) {
    const auto& s = truth.path[t + 1];
    est_inc[t] = posterior.rows[t][6].mean;
    obs_inc[t] = static_cast<double>(truth.observations[t]);
    tru_inc[t] = model.rho * s.Z;
    est_beta[t] = posterior.rows[t][5].mean;
    tru_beta[t] = std::exp(s.log_beta);
    est_reff[t] = posterior.rows[t][7].mean;
    tru_reff[t] = effective_reproduction(s, true_theta, model.N);
  }
  TruthMetrics m;
  m.incidence = metrics(est_inc, obs_inc);
  m.incidence_latent = metrics(est_inc, tru_inc);
  m.beta = metrics(est_beta, tru_beta);
  m.r_eff = metrics(est_reff, tru_reff);
  return m;
}

void print_posterior_summary(const FitArtifacts& artifacts) {
  if (artifacts.history.empty()) return;
  const auto& last = artifacts.history.back();
  std::printf("posterior at t=%d:\n", last.t + 1);
  for (std::size_t k = 0; k < artifacts.free_params.size(); ++k) {
    const auto& s = last.params[k];
    std::printf("  %-8s mean %.4f sd %.4f  95%% CrI (%.4f, %.4f)\n",
                ParamVector::name(artifacts.free_params[k]), s.mean, s.sd, s.q025, s.q975);
  }
}

int cmd_simulate(const FlagSet& flags) {
  ExperimentConfig cfg = flags.assemble();
  if (cfg.example.empty()) {
    std::cerr << "simulate requires --example\n";
    return 2;
  }
  cfg.data_path.clear();
  validate_config(cfg);
  DataBundle bundle = assemble_data(cfg);
  write_simulation_csvs(cfg.out_dir, bundle.truth, bundle.true_theta, cfg.model);
  FitArtifacts none;
  write_results(cfg.out_dir, cfg, "simulate", none);
  std::printf("simulated %zu observations of %s into %s\n", bundle.observations.size(),
              cfg.example.c_str(), cfg.out_dir.c_str());
  return 0;
}

int cmd_fit(const FlagSet& flags) {
  ExperimentConfig cfg = flags.assemble();
  validate_config(cfg);
  DataBundle bundle = assemble_data(cfg);
  if (bundle.has_truth)
    write_simulation_csvs(cfg.out_dir, bundle.truth, bundle.true_theta, cfg.model);

  const auto t0 = std::chrono::steady_clock::now();
  FitArtifacts artifacts = run_fit(cfg, bundle.observations);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const std::string manifest = write_results(cfg.out_dir, cfg, "fit", artifacts);
  std::printf("engine=%s T=%zu wall=%.1fs rejuvenations=%d\n", cfg.engine.c_str(),
              bundle.observations.size(), seconds, artifacts.diagnostics.n_rejuvenations);
  print_posterior_summary(artifacts);
  if (bundle.has_truth && !artifacts.state_posterior.rows.empty()) {
    const auto tm = truth_metrics(artifacts.state_posterior, bundle.truth, cfg.model,
                                  bundle.true_theta);
    std::printf("incidence MAE %.3f (RMSE %.3f); vs latent truth %.3f (%.3f)\n",
                tm.incidence.mae, tm.incidence.rmse, tm.incidence_latent.mae,
                tm.incidence_latent.rmse);
  }
  std::printf("results in %s\n", manifest.c_str());
  if (!artifacts.completed) {
    std::fprintf(stderr, "run aborted at step %d: %s (partial outputs written)\n",
                 artifacts.abort_step, artifacts.message.c_str());
    return 3;
  }
  return 0;
}

int cmd_forecast(const FlagSet& flags, const std::string& fit_dir) {
  ExperimentConfig cfg = config_from_manifest(fit_dir + "/manifest.json");
  for (const auto& [k, v] : flags.entries) apply_config_entry(cfg, k, v);
  validate_config(cfg);

  const auto samples = load_posterior_samples(fit_dir + "/posterior_samples.csv");
  std::vector<ParamVector> thetas(samples.size());
  std::vector<double> weights(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    thetas[i] = samples[i].theta;
    weights[i] = samples[i].weight;
  }

  DataBundle bundle = assemble_data(cfg);
  const ForecastFan fan =
      run_forecast(cfg, bundle.observations, thetas, weights, cfg.horizon);

  const std::string out_dir = cfg.out_dir;
  std::filesystem::create_directories(out_dir);
  write_forecast_csv(out_dir + "/forecast.csv", fan);
  FitArtifacts none;
  write_results(out_dir, cfg, "forecast", none);
  std::printf("forecast over %d intervals written to %s/forecast.csv\n", cfg.horizon,
              out_dir.c_str());
  return 0;
}

int cmd_bench(const FlagSet& flags) {
  ExperimentConfig cfg = flags.assemble();
  if (cfg.example.empty()) {
    std::cerr << "bench requires --example (metrics need ground truth)\n";
    return 2;
  }
  validate_config(cfg);
  DataBundle bundle = assemble_data(cfg);

  struct EngineReport {
    std::string engine;
    double seconds = 0;
    FitArtifacts artifacts;
    TruthMetrics tm;
  };
  std::vector<EngineReport> reports;
  for (const std::string engine : {std::string("enkf"), std::string("bpf")}) {
    ExperimentConfig ecfg = cfg;
    ecfg.engine = engine;
    ecfg.out_dir = cfg.out_dir + "/" + engine;
    const auto t0 = std::chrono::steady_clock::now();
    EngineReport rep;
    rep.engine = engine;
    rep.artifacts = run_fit(ecfg, bundle.observations);
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.tm = truth_metrics(rep.artifacts.state_posterior, bundle.truth, ecfg.model,
                           bundle.true_theta);
    write_results(ecfg.out_dir, ecfg, "fit", rep.artifacts);
    reports.push_back(std::move(rep));
  }

  std::printf("\n%-6s %10s %18s %18s %18s\n", "engine", "wall (s)", "incidence MAE(RMSE)",
              "beta MAE(RMSE)", "r_eff MAE(RMSE)");
  for (const auto& r : reports)
    std::printf("%-6s %10.1f %10.3f (%.3f) %10.4f (%.4f) %10.3f (%.3f)\n",
                r.engine.c_str(), r.seconds, r.tm.incidence.mae, r.tm.incidence.rmse,
                r.tm.beta.mae, r.tm.beta.rmse, r.tm.r_eff.mae, r.tm.r_eff.rmse);
  const double ratio = reports[1].seconds / reports[0].seconds;
  std::printf("wall-clock ratio bpf/enkf = %.2f\n", ratio);
  for (const auto& r : reports) {
    std::printf("[%s] ", r.engine.c_str());
    print_posterior_summary(r.artifacts);
  }

  std::filesystem::create_directories(cfg.out_dir);
  nlohmann::ordered_json bench;
  bench["ratio_bpf_over_enkf"] = ratio;
  for (const auto& r : reports) {
    nlohmann::ordered_json jr;
    jr["seconds"] = r.seconds;
    jr["incidence_mae"] = r.tm.incidence.mae;
    jr["incidence_rmse"] = r.tm.incidence.rmse;
    jr["incidence_latent_mae"] = r.tm.incidence_latent.mae;
    jr["incidence_latent_rmse"] = r.tm.incidence_latent.rmse;
    jr["beta_mae"] = r.tm.beta.mae;
    jr["r_eff_mae"] = r.tm.r_eff.mae;
    jr["rejuvenations"] = r.artifacts.diagnostics.n_rejuvenations;
    if (!r.artifacts.history.empty()) {
      nlohmann::ordered_json jp;
      for (std::size_t k = 0; k < r.artifacts.free_params.size(); ++k) {
        const auto& s = r.artifacts.history.back().params[k];
        jp[ParamVector::name(r.artifacts.free_params[k])] = {{"mean", s.mean},
                                                             {"sd", s.sd}};
      }
      jr["posterior"] = jp;
    }
    bench[r.engine] = jr;
  }
  std::ofstream out(cfg.out_dir + "/bench.json");
  out << bench.dump(2) << '\n';
  std::printf("comparison written to %s/bench.json\n", cfg.out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sequential Bayesian inference for epidemic state-space models"};
  app.require_subcommand(1);

  FlagSet sim_flags, fit_flags, fc_flags, bench_flags;
  std::string fit_dir;

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic epidemic record");
  sim_flags.add(simulate);
  auto* fit = app.add_subcommand("fit", "run the sequential sampler on incidence data");
  fit_flags.add(fit);
  auto* fc = app.add_subcommand("forecast", "project a fitted model forward");
  fc_flags.add(fc);
  fc->add_option("--fit", fit_dir, "directory of a completed fit")->required();
  auto* bench = app.add_subcommand("bench", "run both engines on one record and compare");
  bench_flags.add(bench);

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(sim_flags);
    if (fit->parsed()) return cmd_fit(fit_flags);
    if (fc->parsed()) return cmd_forecast(fc_flags, fit_dir);
    if (bench->parsed()) return cmd_bench(bench_flags);
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
