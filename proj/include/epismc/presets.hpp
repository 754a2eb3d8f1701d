#pragma once

#include <functional>
#include <string>

#include "epismc/model.hpp"
#include "epismc/ssm.hpp"
#include "epismc/stochastic.hpp"

namespace epismc {

// A named synthetic study: model setup, priors, the analytic transmission
// schedule used to generate ground truth, and the true parameter values.
struct ExamplePreset {
  std::string name;
  ModelConfig model;
  InitStateSpec filter_init;       // ensemble initialization
  LatentState sim_initial;         // exact initial state of the truth path
  PriorSpec prior;
  ParamVector true_theta;          // alpha/gamma used by the simulator
  std::function<double(double)> beta_schedule;
  int default_T = 0;
};

// Moderately time-varying outbreak: surge plus mild resurgence over 60 days.
ExamplePreset example1();

// Smoother, prolonged outbreak over 100 days.
ExamplePreset example2();

// Lookup by name ("example1" / "example2"); throws on unknown names.
ExamplePreset example_by_name(const std::string& name);

}  // namespace epismc
