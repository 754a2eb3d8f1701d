#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "epismc/parallel.hpp"
#include "epismc/rng.hpp"
#include "epismc/stochastic.hpp"

namespace epismc {

struct particle_collapse_error : std::runtime_error {
  int step;
  explicit particle_collapse_error(int t)
      : std::runtime_error("particle filter collapsed at step " + std::to_string(t)),
        step(t) {}
};

struct BpfOptions {
  int threads = 1;
};

template <class Model>
struct BpfState {
  std::vector<typename Model::State> particles;
  WeightVector weights;            // normalized, carried between steps
  std::vector<std::int32_t> ancestors;
  bool dead = false;               // collapsed: every weight underflowed

  int size() const noexcept { return static_cast<int>(particles.size()); }
};

struct BpfStepInfo {
  double incr_loglik = 0;
  bool collapsed = false;
};

namespace bpf_detail {
inline constexpr std::uint64_t kInitTag = 0x21;
inline constexpr std::uint64_t kResampleTag = 0x22;
inline constexpr std::uint64_t kPropagateTag = 0x23;
}  // namespace bpf_detail

template <class Model>
BpfState<Model> bpf_init(const Model& model, int n_particles, RngKey filter_key) {
  if (n_particles < 1) throw std::domain_error("bpf: need at least one particle");
  BpfState<Model> cloud;
  cloud.particles.resize(n_particles);
  for (int i = 0; i < n_particles; ++i) {
    RngStream rs(filter_key.child(bpf_detail::kInitTag, static_cast<std::uint64_t>(i)));
    cloud.particles[i] = model.sample_initial(rs);
  }
  cloud.weights.w.assign(n_particles, 1.0 / n_particles);
  return cloud;
}

// Resample from the carried weights, propagate, reweight by the observation
// density. The increment is log((1/N) sum_i w_i). When every weight
// underflows the cloud is marked dead and the increment is log-zero.
template <class Model>
BpfStepInfo bpf_step(BpfState<Model>& cloud, const Model& model, double y,
                     RngKey step_key, const BpfOptions& opt = {}) {
  BpfStepInfo info;
  if (cloud.dead) {
    info.incr_loglik = kLogZero;
    info.collapsed = true;
    return info;
  }
  const int n = cloud.size();

  RngStream resample_rs(step_key.child(bpf_detail::kResampleTag));
  cloud.ancestors = stratified_resample(cloud.weights, resample_rs);
  // scratch reused across steps; raw pointers taken before the parallel
  // region because thread_local names re-resolve on the worker threads
  thread_local std::vector<typename Model::State> parents_buf;
  thread_local std::vector<double> log_w_buf;
  parents_buf.resize(n);
  log_w_buf.resize(n);
  for (int i = 0; i < n; ++i) parents_buf[i] = cloud.particles[cloud.ancestors[i]];

  auto* particles = cloud.particles.data();
  const auto* src = parents_buf.data();
  double* log_w = log_w_buf.data();
  parallel_for(n, opt.threads, [&](std::int64_t i) {
    RngStream rs(step_key.child(bpf_detail::kPropagateTag, static_cast<std::uint64_t>(i)));
    particles[i] = src[i];
    model.propagate(particles[i], rs);
    log_w[i] = model.obs_logpdf(y, particles[i]);
  });

  const double lse = log_sum_exp(log_w_buf);
  if (lse == kLogZero) {
    cloud.dead = true;
    info.incr_loglik = kLogZero;
    info.collapsed = true;
    return info;
  }
  info.incr_loglik = lse - std::log(static_cast<double>(n));

  // normalize in place off the already-computed normalizer
  auto& w = cloud.weights.w;
  w.resize(n);
  double total = 0;
  for (int i = 0; i < n; ++i) {
    w[i] = std::exp(log_w[i] - lse);
    total += w[i];
  }
  for (double& wi : w) wi /= total;
  return info;
}

template <class Model>
struct BpfRun {
  double total_loglik = 0;
  std::vector<double> increments;
  BpfState<Model> final_cloud;
};

// Full filter pass; throws particle_collapse_error carrying the step index
// when the cloud degenerates. The hook sees the weighted cloud per step.
template <class Model, class Hook>
BpfRun<Model> bpf_filter(const std::vector<double>& observations, const Model& model,
                         int n_particles, RngKey filter_key, const BpfOptions& opt,
                         Hook&& per_step) {
  BpfRun<Model> run;
  run.final_cloud = bpf_init(model, n_particles, filter_key);
  run.increments.reserve(observations.size());
  for (std::size_t t = 0; t < observations.size(); ++t) {
    const auto info =
        bpf_step(run.final_cloud, model, observations[t], filter_key.child(t + 1), opt);
    if (info.collapsed) throw particle_collapse_error(static_cast<int>(t));
    run.total_loglik += info.incr_loglik;
    run.increments.push_back(info.incr_loglik);
    per_step(static_cast<int>(t), run.final_cloud);
  }
  return run;
}

template <class Model>
BpfRun<Model> bpf_filter(const std::vector<double>& observations, const Model& model,
                         int n_particles, RngKey filter_key, const BpfOptions& opt = {}) {
  return bpf_filter(observations, model, n_particles, filter_key, opt,
                    [](int, const BpfState<Model>&) {});
}

}  // namespace epismc
