#include "epismc/liuwest.hpp"

#include <algorithm>
#include <cmath>

#include "epismc/parallel.hpp"

namespace epismc {

namespace {

constexpr std::uint64_t kInitTag = 0x41;
constexpr std::uint64_t kResampleTag = 0x42;
constexpr std::uint64_t kJitterTag = 0x43;
constexpr std::uint64_t kPropagateTag = 0x44;

struct Augmented {
  LatentState state;
  ParamVector theta;
};

}  // namespace

ShrinkageConstants shrinkage_constants(double delta) {
  if (!(delta > 0 && delta <= 1))
    throw std::domain_error("shrinkage_constants: delta must be in (0, 1]");
  const double b = (3 * delta - 1) / (2 * delta);
  ShrinkageConstants c;
  c.h2 = 1 - b * b;
  c.lambda = std::sqrt(1 - c.h2);
  return c;
}

LiuWestResult liu_west_filter(const std::vector<double>& observations,
                              const PriorSpec& prior, const ModelConfig& cfg,
                              const InitStateSpec& init, const LiuWestOptions& opt,
                              RngKey root) {
  if (opt.n_particles < 2) throw std::domain_error("liu_west_filter: need >= 2 particles");
  const auto c = shrinkage_constants(opt.delta);
  const auto free = prior.free_indices();
  const int d = static_cast<int>(free.size());
  const int n = opt.n_particles;

  LiuWestResult result;
  result.free_params = free;

  std::vector<Augmented> particles(n);
  for (int i = 0; i < n; ++i) {
    RngStream rs(root.child(kInitTag, static_cast<std::uint64_t>(i)));
    particles[i].theta = prior.sample(rs);
    SeirSsm model{particles[i].theta, cfg, init};
    particles[i].state = model.sample_initial(rs);
  }
  std::vector<double> weights(n, 1.0 / n);

  std::vector<double> values(n), aux_logw(n), second_logw(n);
  std::vector<Augmented> parents(n);
  std::vector<double> parent_pred(n);

  for (std::size_t tu = 0; tu < observations.size(); ++tu) {
    const int t = static_cast<int>(tu);
    const double y = observations[tu];
    const RngKey step_key = root.child(static_cast<std::uint64_t>(t) + 1);

    // weighted parameter moments and shrunk locations
    std::vector<ParamVector> shrunk(n);
    std::vector<double> theta_mean(d, 0.0);
    for (int k = 0; k < d; ++k) {
      for (int i = 0; i < n; ++i) theta_mean[k] += weights[i] * particles[i].theta.get(free[k]);
    }
    SymMatrix cov(d);
    for (int i = 0; i < n; ++i) {
      for (int a = 0; a < d; ++a) {
        const double da = particles[i].theta.get(free[a]) - theta_mean[a];
        for (int b = a; b < d; ++b) {
          const double db = particles[i].theta.get(free[b]) - theta_mean[b];
          cov.at(a, b) += weights[i] * da * db;
        }
      }
    }
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b) cov.at(b, a) = cov.at(a, b);

    for (int i = 0; i < n; ++i) {
      shrunk[i] = particles[i].theta;
      for (int k = 0; k < d; ++k)
        shrunk[i].set(free[k], c.lambda * particles[i].theta.get(free[k]) +
                                   (1 - c.lambda) * theta_mean[k]);
    }

    // kernel factor; zero kernel variance (delta = 1 or a collapsed cloud)
    // degenerates to pure shrinkage
    SymMatrix kernel_chol;
    bool jitter_active = false;
    if (c.h2 > 0 && cov.trace() > 0) {
      SymMatrix kcov(d);
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) kcov.at(a, b) = c.h2 * cov.at(a, b);
      const double jit = 1e-10 * kcov.trace();
      for (int a = 0; a < d; ++a) kcov.at(a, a) += jit;
      if (auto l = cholesky(kcov, 0.0)) {
        kernel_chol = std::move(*l);
        jitter_active = true;
      }
    }

    // first-stage weights at the deterministic prediction under shrunk theta
    auto* part = particles.data();
    parallel_for(n, opt.threads, [&](std::int64_t i) {
      ParamVector frozen = shrunk[i];
      frozen.nu_beta = 0;
      RngStream unused(step_key.child(0));
      LatentState pred = transition(part[i].state, frozen, cfg, unused);
      parent_pred[i] = obs_log_density(static_cast<std::int64_t>(y), pred, frozen, cfg);
      aux_logw[i] = (weights[i] > 0 ? std::log(weights[i]) : kLogZero) + parent_pred[i];
    });

    WeightVector aux;
    try {
      aux = normalize_log_weights(aux_logw);
    } catch (const degenerate_weights_error&) {
      result.completed = false;
      result.abort_step = t;
      return result;
    }

    RngStream resample_rs(step_key.child(kResampleTag));
    const auto ancestors = stratified_resample(aux, resample_rs);
    for (int i = 0; i < n; ++i) parents[i] = particles[ancestors[i]];

    // jitter parameters around shrunk ancestors, then propagate states
    parallel_for(n, opt.threads, [&](std::int64_t i) {
      const auto a = ancestors[i];
      ParamVector theta = shrunk[a];
      if (jitter_active) {
        RngStream jrs(step_key.child(kJitterTag, static_cast<std::uint64_t>(i)));
        bool in_support = false;
        for (int attempt = 0; attempt < opt.max_jitter_attempts && !in_support; ++attempt) {
          std::vector<double> z(d);
          for (int k = 0; k < d; ++k) z[k] = jrs.normal();
          const auto shift = cholesky_lower_times(kernel_chol, z);
          theta = shrunk[a];
          for (int k = 0; k < d; ++k)
            theta.set(free[k], shrunk[a].get(free[k]) + shift[k]);
          in_support = prior.log_density(theta) != kLogZero;
        }
        if (!in_support) {
          for (int k = 0; k < d; ++k) {
            const auto& m = prior.marginals[free[k]];
            theta.set(free[k], std::clamp(theta.get(free[k]), m.support_lower(),
                                          m.support_upper()));
          }
        }
      }

      RngStream prs(step_key.child(kPropagateTag, static_cast<std::uint64_t>(i)));
      LatentState state = transition(parents[i].state, theta, cfg, prs);
      const double lp = obs_log_density(static_cast<std::int64_t>(y), state, theta, cfg);
      second_logw[i] = lp - parent_pred[ancestors[i]];
      part[i].state = state;
      part[i].theta = theta;
    });

    WeightVector w;
    try {
      w = normalize_log_weights(second_logw);
    } catch (const degenerate_weights_error&) {
      result.completed = false;
      result.abort_step = t;
      return result;
    }
    weights = w.w;

    // per-step records
    std::vector<ParamVector> thetas(n);
    for (int i = 0; i < n; ++i) thetas[i] = particles[i].theta;
    HistoryRow row;
    row.t = t;
    row.params = summarize_params(thetas, weights, free);
    result.history.push_back(row);

    for (int i = 0; i < n; ++i) values[i] = particles[i].state.Z;
    const MeanSd ms = weighted_mean_sd(values, weights);
    LiuWestResult::StateRow srow;
    srow.t = t;
    srow.z_mean = ms.mean;
    srow.z_q025 = weighted_quantile(values, weights, 0.025);
    srow.z_q975 = weighted_quantile(values, weights, 0.975);
    result.states.push_back(srow);
  }

  return result;
}

}  // namespace epismc
