#pragma once

#include <cstdint>
#include <vector>

#include "epismc/model.hpp"
#include "epismc/rng.hpp"
#include "epismc/smc2.hpp"
#include "epismc/ssm.hpp"
#include "epismc/stochastic.hpp"

namespace epismc {

// Kernel-shrinkage constants for discount delta in (0, 1]:
// h^2 = 1 - ((3 delta - 1) / (2 delta))^2 and lambda = sqrt(1 - h^2), so the
// shrink-then-jitter step preserves the weighted mean and covariance of the
// parameter cloud.
struct ShrinkageConstants {
  double h2 = 0;
  double lambda = 1;
};
ShrinkageConstants shrinkage_constants(double delta);

struct LiuWestOptions {
  int n_particles = 20000;
  double delta = 0.99;
  int threads = 1;
  int max_jitter_attempts = 100;  // redraws before clamping into support
};

struct LiuWestResult {
  struct StateRow {
    int t = 0;
    double z_mean = 0, z_q025 = 0, z_q975 = 0;
  };
  std::vector<int> free_params;
  std::vector<HistoryRow> history;  // weighted parameter summaries per step
  std::vector<StateRow> states;     // filtered incidence per step
  bool completed = true;
  int abort_step = -1;
};

// Joint state-parameter particle filter with kernel shrinkage of the static
// parameters: shrink, auxiliary first-stage weighting at the deterministic
// state prediction, resample, jitter, propagate, second-stage reweight.
LiuWestResult liu_west_filter(const std::vector<double>& observations,
                              const PriorSpec& prior, const ModelConfig& cfg,
                              const InitStateSpec& init, const LiuWestOptions& opt,
                              RngKey root);

}  // namespace epismc
