#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "epismc/engines.hpp"
#include "epismc/model.hpp"
#include "epismc/parallel.hpp"
#include "epismc/rng.hpp"
#include "epismc/ssm.hpp"
#include "epismc/stochastic.hpp"

namespace epismc {

// Quantile band levels shared by all emitted summaries. The four central
// intervals (50/75/90/95%) come from the paired columns.
struct QuantileBands {
  double mean = 0;
  double q025 = 0, q05 = 0, q125 = 0, q25 = 0, q50 = 0, q75 = 0, q875 = 0, q95 = 0,
         q975 = 0;
};

QuantileBands weighted_bands(const std::vector<double>& values,
                             const std::vector<double>& weights);

// Latent quantities tracked by the posterior and forecast products.
inline constexpr int kNumQuantities = 8;
const char* quantity_name(int q);  // S,E,I,R,Z,beta,pred_incidence,r_eff

struct StatePosterior {
  std::vector<std::array<QuantileBands, kNumQuantities>> rows;  // indexed by time
};

struct Metrics {
  double mae = 0;
  double rmse = 0;
};

Metrics metrics(const std::vector<double>& estimate, const std::vector<double>& truth);

// Fraction of truth points falling inside [lo, hi] pointwise.
double band_coverage(const std::vector<double>& truth, const std::vector<double>& lo,
                     const std::vector<double>& hi);

struct PoolOptions {
  int n_draws = 100;  // parameter draws used to integrate out theta
  int n_inner = 200;
  EngineOptions engine;
  int threads = 1;
};

template <class Engine>
struct PoolResult {
  StatePosterior posterior;
  std::vector<ParamVector> draws;
  std::vector<typename Engine::State> final_states;
  bool support_warning = false;  // n_draws exceeded the weighted support
};

namespace products_detail {

inline constexpr std::uint64_t kDrawTag = 0x51;
inline constexpr std::uint64_t kRerunTag = 0x52;

inline void member_quantities(const LatentState& s, const SeirSsm& model,
                              std::array<double, kNumQuantities>& out) {
  out[0] = s.S;
  out[1] = s.E;
  out[2] = s.I;
  out[3] = s.R;
  out[4] = s.Z;
  out[5] = std::exp(s.log_beta);
  out[6] = model.cfg.rho * s.Z;
  out[7] = effective_reproduction(s, model.theta, model.cfg.N);
}

}  // namespace products_detail

// Filtering posterior with parameter uncertainty: draw n_draws parameter
// vectors from the weighted particle set (stratified, with replacement when
// the support is thin), rerun the inner filter per draw, and pool the
// n_draws * n_inner member trajectories into quantile bands per time point.
template <class Engine>
PoolResult<Engine> marginal_state_posterior(
    const std::vector<double>& observations, const std::vector<ParamVector>& thetas,
    const std::vector<double>& weights,
    const std::function<typename Engine::Model(const ParamVector&)>& make_model,
    const PoolOptions& opt, RngKey root) {
  const int T = static_cast<int>(observations.size());
  const int nd = opt.n_draws;

  PoolResult<Engine> result;
  WeightVector w;
  w.w = weights;
  int support = 0;
  for (double wi : weights)
    if (wi > 0) ++support;
  result.support_warning = nd > support;

  // stratified draw of theta indices; inflate/deflate through a temporary
  // weight vector of length n_draws
  std::vector<std::int32_t> chosen(nd);
  {
    RngStream rs(root.child(products_detail::kDrawTag));
    // resample n_draws ancestors from the weighted set
    double cum = 0;
    std::vector<double> cumw(weights.size());
    double total = 0;
    for (double wi : weights) total += wi;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      cum += weights[i] / total;
      cumw[i] = cum;
    }
    std::size_t i = 0;
    for (int k = 0; k < nd; ++k) {
      const double u = (k + rs.uniform()) / nd;
      while (u > cumw[i] && i + 1 < cumw.size()) ++i;
      chosen[k] = static_cast<std::int32_t>(i);
    }
  }

  result.draws.resize(nd);
  for (int j = 0; j < nd; ++j) result.draws[j] = thetas[chosen[j]];
  result.final_states.resize(nd);

  // pooled per-time value/weight buffers, one slice per draw
  const std::size_t slice = static_cast<std::size_t>(opt.n_inner);
  std::vector<std::vector<double>> values(
      static_cast<std::size_t>(T) * kNumQuantities,
      std::vector<double>(slice * static_cast<std::size_t>(nd), 0.0));
  std::vector<std::vector<double>> vweights = values;

  auto* draws = result.draws.data();
  auto* finals = result.final_states.data();
  parallel_for(nd, opt.threads, [&](std::int64_t j) {
    const typename Engine::Model model = make_model(draws[j]);
    const RngKey fkey = root.child(products_detail::kRerunTag, static_cast<std::uint64_t>(j));
    typename Engine::State state = Engine::init(model, opt.n_inner, fkey, opt.engine);
    std::array<double, kNumQuantities> q{};
    for (int t = 0; t < T; ++t) {
      Engine::step(state, model, observations[t], fkey.child(static_cast<std::uint64_t>(t) + 1),
                   opt.engine);
      std::size_t slot = slice * static_cast<std::size_t>(j);
      Engine::for_each_member(state, [&](const LatentState& m, double mw) {
        products_detail::member_quantities(m, model, q);
        for (int k = 0; k < kNumQuantities; ++k) {
          values[static_cast<std::size_t>(t) * kNumQuantities + k][slot] = q[k];
          vweights[static_cast<std::size_t>(t) * kNumQuantities + k][slot] = mw;
        }
        ++slot;
      });
    }
    finals[j] = std::move(state);
  });

  result.posterior.rows.resize(T);
  for (int t = 0; t < T; ++t)
    for (int k = 0; k < kNumQuantities; ++k)
      result.posterior.rows[t][k] =
          weighted_bands(values[static_cast<std::size_t>(t) * kNumQuantities + k],
                         vweights[static_cast<std::size_t>(t) * kNumQuantities + k]);
  return result;
}

struct ForecastRow {
  int horizon = 0;  // intervals ahead of the last fitted time
  QuantileBands obs;
  std::array<QuantileBands, kNumQuantities> latent;
};

struct ForecastFan {
  std::vector<ForecastRow> rows;
};

struct ForecastOptions {
  int horizon = 14;
  bool diffusive_beta = false;  // keep the transmission-rate diffusion on
  int threads = 1;
};

namespace products_detail {
inline constexpr std::uint64_t kForecastTag = 0x53;
}

// Posterior-predictive fan: every pooled (theta, member) pair is propagated
// forward with the transmission rate frozen at its last value (unless
// diffusive_beta), sampling one synthetic observation per interval.
template <class Engine>
ForecastFan forecast(const PoolResult<Engine>& pool, const ModelConfig& cfg,
                     const ForecastOptions& opt, RngKey root) {
  if (opt.horizon < 1) throw std::domain_error("forecast: horizon must be >= 1");
  const int nd = static_cast<int>(pool.draws.size());
  const int H = opt.horizon;

  // flatten the pooled members
  struct Member {
    LatentState state;
    double weight;
    int draw;
  };
  std::vector<Member> members;
  for (int j = 0; j < nd; ++j)
    Engine::for_each_member(pool.final_states[j], [&](const LatentState& m, double mw) {
      members.push_back({m, mw, j});
    });
  const std::size_t n = members.size();

  std::vector<std::vector<double>> obs_values(H, std::vector<double>(n, 0.0));
  std::vector<std::vector<double>> lat_values(
      static_cast<std::size_t>(H) * kNumQuantities, std::vector<double>(n, 0.0));
  std::vector<double> mweights(n);

  auto* mem = members.data();
  parallel_for(static_cast<std::int64_t>(n), opt.threads, [&](std::int64_t i) {
    ParamVector theta = pool.draws[mem[i].draw];
    if (!opt.diffusive_beta) theta.nu_beta = 0;
    SeirSsm model{theta, cfg, {}};
    LatentState s = mem[i].state;
    RngStream rs(root.child(products_detail::kForecastTag, static_cast<std::uint64_t>(i)));
    std::array<double, kNumQuantities> q{};
    mweights[i] = mem[i].weight;
    for (int h = 0; h < H; ++h) {
      s = transition(s, theta, cfg, rs);
      obs_values[h][i] = static_cast<double>(obs_sample(s, theta, cfg, rs));
      products_detail::member_quantities(s, model, q);
      for (int k = 0; k < kNumQuantities; ++k)
        lat_values[static_cast<std::size_t>(h) * kNumQuantities + k][i] = q[k];
    }
  });

  ForecastFan fan;
  fan.rows.resize(H);
  for (int h = 0; h < H; ++h) {
    fan.rows[h].horizon = h + 1;
    fan.rows[h].obs = weighted_bands(obs_values[h], mweights);
    for (int k = 0; k < kNumQuantities; ++k)
      fan.rows[h].latent[k] = weighted_bands(
          lat_values[static_cast<std::size_t>(h) * kNumQuantities + k], mweights);
  }
  return fan;
}

}  // namespace epismc
