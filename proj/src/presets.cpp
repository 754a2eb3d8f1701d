#include "epismc/presets.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace epismc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

ExamplePreset example1() {
  ExamplePreset p;
  p.name = "example1";
  p.model.N = 500000;
  p.model.rho = 1.0;
  p.model.obs = ObsModel::Poisson;
  p.model.dt = 1.0;
  p.model.n_substeps = 1;

  p.filter_init = {500000.0, 0.2, 10.0, 0.2, 0.0, 0.0};
  p.sim_initial = {500000.0 - 10.0, 0.0, 10.0, 0.0, 0.0, 0.0};

  p.prior.marginals[0] = PriorMarginal::trunc_normal(0.6, 0.3, 0.0, kInf);   // alpha
  p.prior.marginals[1] = PriorMarginal::trunc_normal(0.2, 0.1, 0.0, kInf);   // gamma
  p.prior.marginals[2] = PriorMarginal::uniform(0.0, 0.5);                   // nu_beta
  p.prior.marginals[3] = PriorMarginal::fixed(0.0);                          // phi
  p.prior.marginals[4] = PriorMarginal::normal(0.3, 0.01);                   // beta0

  p.true_theta.alpha = 0.5;
  p.true_theta.gamma = 1.0 / 7.0;
  p.true_theta.nu_beta = 0.0;
  p.true_theta.phi = 0.0;
  p.true_theta.beta0 = 0.3;

  p.beta_schedule = [](double t) {
    return 0.3 * std::exp(std::sin(2.0 * M_PI * t / 55.0) - t / 80.0);
  };
  p.default_T = 60;
  return p;
}

ExamplePreset example2() {
  ExamplePreset p;
  p.name = "example2";
  p.model.N = 500000;
  p.model.rho = 1.0;
  p.model.obs = ObsModel::Poisson;
  p.model.dt = 1.0;
  p.model.n_substeps = 1;

  p.filter_init = {500000.0, 0.2, 10.0, 0.2, 0.0, 0.0};
  p.sim_initial = {500000.0 - 10.0, 0.0, 10.0, 0.0, 0.0, 0.0};

  p.prior.marginals[0] = PriorMarginal::trunc_normal(0.4, 0.2, 0.0, kInf);   // alpha
  p.prior.marginals[1] = PriorMarginal::trunc_normal(0.12, 0.2, 0.0, kInf);  // gamma
  p.prior.marginals[2] = PriorMarginal::uniform(0.0, 0.3);                   // nu_beta
  p.prior.marginals[3] = PriorMarginal::fixed(0.0);                          // phi
  p.prior.marginals[4] = PriorMarginal::normal(0.35, 0.01);                  // beta0

  p.true_theta.alpha = 1.0 / 3.0;
  p.true_theta.gamma = 1.0 / 8.0;
  p.true_theta.nu_beta = 0.0;
  p.true_theta.phi = 0.0;
  p.true_theta.beta0 = 0.35;

  p.beta_schedule = [](double t) {
    const double u = (t - 15.0) / 20.0;
    return 0.5 * std::exp(-u * u) + 0.065;
  };
  p.default_T = 100;
  return p;
}

ExamplePreset example_by_name(const std::string& name) {
  if (name == "example1") return example1();
  if (name == "example2") return example2();
  throw std::invalid_argument("unknown example: " + name);
}

}  // namespace epismc
