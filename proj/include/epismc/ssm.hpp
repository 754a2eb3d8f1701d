#pragma once

#include <cmath>

#include "epismc/model.hpp"
#include "epismc/rng.hpp"

namespace epismc {

// Initial-state distribution for the filters: S and I are drawn from
// normals truncated at zero, E and R start at fixed values, Z at zero and
// log beta at log(beta0) from the parameter vector.
struct InitStateSpec {
  double S0_mean = 0;
  double S0_sd = 0;
  double I0_mean = 0;
  double I0_sd = 0;
  double E0 = 0;
  double R0 = 0;
};

// The epidemic state-space model bound to one parameter vector, in the
// shape the generic filters consume.
struct SeirSsm {
  using State = LatentState;
  static constexpr int dim = LatentState::dim;

  ParamVector theta;
  ModelConfig cfg;
  InitStateSpec init;

  static double get(const State& s, int k) noexcept { return s.coord(k); }
  static void add(State& s, int k, double dv) noexcept { s.coord(k) += dv; }

  int obs_coord() const noexcept { return kIncidenceCoord; }
  double obs_factor() const noexcept { return cfg.rho; }

  State sample_initial(RngStream& rng) const {
    State s;
    s.S = truncated_at_zero(init.S0_mean, init.S0_sd, rng);
    s.E = init.E0;
    s.I = truncated_at_zero(init.I0_mean, init.I0_sd, rng);
    s.R = init.R0;
    s.Z = 0;
    s.log_beta = std::log(theta.beta0);
    return s;
  }

  void propagate(State& s, RngStream& rng) const { s = transition(s, theta, cfg, rng); }

  double obs_logpdf(double y, const State& s) const {
    return obs_log_density(static_cast<std::int64_t>(y), s, theta, cfg);
  }

  double obs_cond_var(const State& s) const {
    return obs_conditional_variance(s, theta, cfg);
  }

  // statistical corrections can push compartments slightly negative
  void clamp(State& s) const noexcept {
    if (s.S < 0) s.S = 0;
    if (s.E < 0) s.E = 0;
    if (s.I < 0) s.I = 0;
    if (s.R < 0) s.R = 0;
    if (s.Z < 0) s.Z = 0;
  }

 private:
  static double truncated_at_zero(double mean, double sd, RngStream& rng) {
    if (sd <= 0) return mean < 0 ? 0 : mean;
    for (;;) {
      const double x = mean + sd * rng.normal();
      if (x >= 0) return x;
    }
  }
};

}  // namespace epismc
