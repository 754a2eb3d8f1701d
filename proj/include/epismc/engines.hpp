#pragma once

#include "epismc/bpf.hpp"
#include "epismc/enkf.hpp"

namespace epismc {

// Options shared by the inner likelihood engines; fields that do not apply
// to an engine are ignored by it.
struct EngineOptions {
  double eta = 0.1;
  bool unbiased = true;
  int threads = 1;
};

// Inner engine backed by the ensemble Kalman filter.
template <class ModelT>
struct EnkfEngine {
  using Model = ModelT;
  using State = EnkfState<ModelT>;
  static constexpr const char* name = "enkf";

  static State init(const Model& model, int n_inner, RngKey filter_key,
                    const EngineOptions&) {
    return enkf_init(model, n_inner, filter_key);
  }

  static double step(State& state, const Model& model, double y, RngKey step_key,
                     const EngineOptions& opt) {
    EnkfOptions eo;
    eo.eta = opt.eta;
    eo.unbiased = opt.unbiased;
    eo.threads = opt.threads;
    return enkf_step(state, model, y, step_key, eo).incr_loglik;
  }

  template <class Fn>
  static void for_each_member(const State& state, Fn&& fn) {
    const double w = 1.0 / state.members.size();
    for (const auto& m : state.members) fn(m, w);
  }
};

// Inner engine backed by the bootstrap particle filter.
template <class ModelT>
struct BpfEngine {
  using Model = ModelT;
  using State = BpfState<ModelT>;
  static constexpr const char* name = "bpf";

  static State init(const Model& model, int n_inner, RngKey filter_key,
                    const EngineOptions&) {
    return bpf_init(model, n_inner, filter_key);
  }

  static double step(State& state, const Model& model, double y, RngKey step_key,
                     const EngineOptions& opt) {
    BpfOptions bo;
    bo.threads = opt.threads;
    return bpf_step(state, model, y, step_key, bo).incr_loglik;
  }

  template <class Fn>
  static void for_each_member(const State& state, Fn&& fn) {
    for (int i = 0; i < state.size(); ++i) fn(state.particles[i], state.weights[i]);
  }
};

}  // namespace epismc
