#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "epismc/gaussdens.hpp"
#include "epismc/parallel.hpp"
#include "epismc/rng.hpp"
#include "epismc/stochastic.hpp"

namespace epismc {

struct EnkfOptions {
  double eta = 0.1;      // floor on the observation-noise variance
  bool unbiased = true;  // finite-sample-corrected density; plug-in otherwise
  int threads = 1;
};

// Per-step diagnostics of one assimilation.
struct EnkfStepInfo {
  double incr_loglik = 0;
  double forecast_mean_obs = 0;
  double forecast_var_obs = 0;  // sample variance of the projected state
  double obs_noise_var = 0;     // floored state-dependent variance V_t
};

template <class Model>
struct EnkfState {
  std::vector<typename Model::State> members;
  int size() const noexcept { return static_cast<int>(members.size()); }
};

namespace enkf_detail {
inline constexpr std::uint64_t kInitTag = 0x11;
inline constexpr std::uint64_t kPropagateTag = 0x12;
inline constexpr std::uint64_t kPerturbTag = 0x13;
}  // namespace enkf_detail

template <class Model>
EnkfState<Model> enkf_init(const Model& model, int n_members, RngKey filter_key) {
  if (n_members <= 4)
    throw std::domain_error("enkf: ensemble size must exceed observation dim + 3");
  EnkfState<Model> ens;
  ens.members.resize(n_members);
  for (int i = 0; i < n_members; ++i) {
    RngStream rs(filter_key.child(enkf_detail::kInitTag, static_cast<std::uint64_t>(i)));
    ens.members[i] = model.sample_initial(rs);
  }
  return ens;
}

// Every member advanced one interval, each on its own stream. When noise is
// given, a standard-normal draw per member is banked for the later analysis
// perturbation so the member's stream is built only once per step.
template <class Model>
void forecast_ensemble(EnkfState<Model>& ens, const Model& model, RngKey step_key,
                       int threads, std::vector<double>* noise = nullptr) {
  auto* members = ens.members.data();
  if (noise) noise->resize(ens.members.size());
  parallel_for(ens.size(), threads, [&](std::int64_t i) {
    RngStream rs(step_key.child(enkf_detail::kPropagateTag, static_cast<std::uint64_t>(i)));
    model.propagate(members[i], rs);
    if (noise) (*noise)[i] = rs.normal();
  });
}

// Forecast-ensemble statistics taken in two passes: coordinate means plus
// the mean conditional observation variance, then the cross-covariance of
// every coordinate against the projected observation. Only that column is
// needed for the gain; no full covariance matrix is formed.
template <class Model>
struct ForecastStats {
  std::array<double, Model::dim> mean{};
  std::array<double, Model::dim> cross{};  // cov(x_k, Hx), unbiased
  double var_obs = 0;                      // var(Hx), unbiased
  double mean_cond_var = 0;                // average of Var[y | x] over members
};

template <class Model>
ForecastStats<Model> forecast_stats(const EnkfState<Model>& ens, const Model& model) {
  const int n = ens.size();
  const int c = model.obs_coord();
  const double f = model.obs_factor();

  ForecastStats<Model> st;
  for (const auto& s : ens.members) {
    for (int k = 0; k < Model::dim; ++k) st.mean[k] += Model::get(s, k);
    st.mean_cond_var += model.obs_cond_var(s);
  }
  for (int k = 0; k < Model::dim; ++k) st.mean[k] /= n;
  st.mean_cond_var /= n;

  double var_c = 0;
  for (const auto& s : ens.members) {
    const double dc = Model::get(s, c) - st.mean[c];
    var_c += dc * dc;
    for (int k = 0; k < Model::dim; ++k)
      st.cross[k] += (Model::get(s, k) - st.mean[k]) * dc;
  }
  st.var_obs = f * f * var_c / (n - 1);
  for (int k = 0; k < Model::dim; ++k) st.cross[k] = f * st.cross[k] / (n - 1);
  return st;
}

// Ensemble average of Var[y | state], floored at eta.
template <class Model>
double observation_variance(const EnkfState<Model>& ens, const Model& model, double eta) {
  return std::max(eta, forecast_stats(ens, model).mean_cond_var);
}

template <class Model>
struct EnkfGain {
  std::array<double, Model::dim> k{};
  double mean_obs = 0;
  double var_obs = 0;  // sample variance of the projection (without noise)
};

template <class Model>
EnkfGain<Model> gain_from_stats(const ForecastStats<Model>& st, const Model& model,
                                double v_t) {
  EnkfGain<Model> g;
  g.mean_obs = model.obs_factor() * st.mean[model.obs_coord()];
  g.var_obs = st.var_obs;
  const double denom = st.var_obs + v_t;
  for (int k = 0; k < Model::dim; ++k) g.k[k] = st.cross[k] / denom;
  return g;
}

template <class Model>
EnkfGain<Model> kalman_gain(const EnkfState<Model>& ens, const Model& model, double v_t) {
  return gain_from_stats(forecast_stats(ens, model), model, v_t);
}

// Perturbed-observation shift: x <- x + K (y + v - Hx) with per-member
// noise v = sqrt(V_t) * z_i, followed by the model's domain clamp.
template <class Model>
void analysis_update(EnkfState<Model>& ens, const Model& model, double y,
                     const std::array<double, Model::dim>& gain, double v_t,
                     const std::vector<double>& std_normal_draws, int threads) {
  const int c = model.obs_coord();
  const double f = model.obs_factor();
  const double noise_sd = std::sqrt(v_t);
  auto* members = ens.members.data();
  parallel_for(ens.size(), threads, [&](std::int64_t i) {
    auto& s = members[i];
    const double innovation = y + noise_sd * std_normal_draws[i] - f * Model::get(s, c);
    for (int k = 0; k < Model::dim; ++k) Model::add(s, k, gain[k] * innovation);
    model.clamp(s);
  });
}

// Convenience overload drawing the perturbations from per-member streams.
template <class Model>
void analysis_update(EnkfState<Model>& ens, const Model& model, double y,
                     const std::array<double, Model::dim>& gain, double v_t,
                     RngKey step_key, int threads) {
  std::vector<double> draws(ens.members.size());
  for (std::size_t i = 0; i < draws.size(); ++i) {
    RngStream rs(step_key.child(enkf_detail::kPerturbTag, static_cast<std::uint64_t>(i)));
    draws[i] = rs.normal();
  }
  analysis_update(ens, model, y, gain, v_t, draws, threads);
}

// One assimilation cycle: forecast, state-dependent observation variance,
// incremental likelihood at the predictive moments, gain, analysis shift.
// A log-zero increment is a value, not an error; the caller decides.
template <class Model>
EnkfStepInfo enkf_step(EnkfState<Model>& ens, const Model& model, double y,
                       RngKey step_key, const EnkfOptions& opt) {
  if (ens.size() <= 4)
    throw std::domain_error("enkf: ensemble size must exceed observation dim + 3");

  thread_local std::vector<double> noise;
  forecast_ensemble(ens, model, step_key, opt.threads, &noise);
  const auto stats = forecast_stats(ens, model);
  const double v_t = std::max(opt.eta, stats.mean_cond_var);
  const auto gain = gain_from_stats(stats, model, v_t);

  MomentPair moments;
  moments.mean = {gain.mean_obs};
  moments.cov = SymMatrix(1);
  moments.cov.at(0, 0) = gain.var_obs + v_t;
  const std::vector<double> yv = {y};
  const double incr = opt.unbiased ? unbiased_gaussian_logpdf(yv, moments, ens.size())
                                   : standard_gaussian_logpdf(yv, moments);

  analysis_update(ens, model, y, gain.k, v_t, noise, opt.threads);

  EnkfStepInfo info;
  info.incr_loglik = incr;
  info.forecast_mean_obs = gain.mean_obs;
  info.forecast_var_obs = gain.var_obs;
  info.obs_noise_var = v_t;
  return info;
}

template <class Model>
struct EnkfRun {
  double total_loglik = 0;
  std::vector<EnkfStepInfo> steps;
  EnkfState<Model> final_ensemble;
};

// Full filter pass. A log-zero increment makes the total log-zero but the
// run continues so the step trace stays inspectable. The hook sees the
// analysis ensemble after every step.
template <class Model, class Hook>
EnkfRun<Model> enkf_filter(const std::vector<double>& observations, const Model& model,
                           int n_members, RngKey filter_key, const EnkfOptions& opt,
                           Hook&& per_step) {
  EnkfRun<Model> run;
  run.final_ensemble = enkf_init(model, n_members, filter_key);
  run.steps.reserve(observations.size());
  for (std::size_t t = 0; t < observations.size(); ++t) {
    const auto info = enkf_step(run.final_ensemble, model, observations[t],
                                filter_key.child(t + 1), opt);
    run.total_loglik += info.incr_loglik;
    run.steps.push_back(info);
    per_step(static_cast<int>(t), run.final_ensemble);
  }
  return run;
}

template <class Model>
EnkfRun<Model> enkf_filter(const std::vector<double>& observations, const Model& model,
                           int n_members, RngKey filter_key, const EnkfOptions& opt) {
  return enkf_filter(observations, model, n_members, filter_key, opt,
                     [](int, const EnkfState<Model>&) {});
}

}  // namespace epismc
