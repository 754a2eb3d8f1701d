#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "epismc/rng.hpp"

namespace epismc {

// Latent point of the epidemic state-space model. Z is the incidence
// accumulated over the current reporting interval, not a compartment.
// The transmission rate is carried in log space.
struct LatentState {
  double S = 0;
  double E = 0;
  double I = 0;
  double R = 0;
  double Z = 0;
  double log_beta = 0;

  static constexpr int dim = 6;

  double coord(int k) const noexcept {
    switch (k) {
      case 0: return S;
      case 1: return E;
      case 2: return I;
      case 3: return R;
      case 4: return Z;
      default: return log_beta;
    }
  }
  double& coord(int k) noexcept {
    switch (k) {
      case 0: return S;
      case 1: return E;
      case 2: return I;
      case 3: return R;
      case 4: return Z;
      default: return log_beta;
    }
  }
};

// Index of Z in the coordinate order above; the observation operator picks
// rho * Z out of the state.
inline constexpr int kIncidenceCoord = 4;

// Static model parameters. beta0 only enters through filter initialization
// (members start at log_beta = log(beta0)).
struct ParamVector {
  double alpha = 0;    // latency rate, per day
  double gamma = 0;    // recovery rate, per day
  double nu_beta = 0;  // volatility of log beta, per sqrt(day)
  double phi = 0;      // overdispersion; 0 recovers Poisson variance
  double beta0 = 0;    // initial transmission rate, per day

  static constexpr int n_params = 5;
  double get(int k) const noexcept {
    switch (k) {
      case 0: return alpha;
      case 1: return gamma;
      case 2: return nu_beta;
      case 3: return phi;
      default: return beta0;
    }
  }
  void set(int k, double v) noexcept {
    switch (k) {
      case 0: alpha = v; break;
      case 1: gamma = v; break;
      case 2: nu_beta = v; break;
      case 3: phi = v; break;
      default: beta0 = v; break;
    }
  }
  static const char* name(int k) noexcept {
    switch (k) {
      case 0: return "alpha";
      case 1: return "gamma";
      case 2: return "nu_beta";
      case 3: return "phi";
      default: return "beta0";
    }
  }
  static int index_of(const char* name);  // -1 when unknown
};

enum class ObsModel { Poisson, NegBin };

struct ModelConfig {
  double N = 0;                       // population size, conserved
  double rho = 1.0;                   // reporting fraction in (0, 1]
  ObsModel obs = ObsModel::Poisson;
  double dt = 1.0;                    // reporting interval, days
  int n_substeps = 1;                 // Euler sub-steps per interval
};

// Floor applied to the observation mean so the count densities stay
// defined when Z = 0.
inline constexpr double kObsMeanFloor = 1e-10;

// One reporting interval of the latent dynamics: deterministic Euler for
// the compartments, one Gaussian increment of log beta per sub-step scaled
// so the total interval variance is nu_beta^2 * dt. Z restarts at the
// interval and accumulates alpha*E over the sub-steps. Compartments are
// clamped at zero after each sub-step and S+E+I+R is rescaled back to N.
LatentState transition(const LatentState& state, const ParamVector& theta,
                       const ModelConfig& cfg, RngStream& rng);

// log p(y | state) under the configured count model, mean rho*Z.
double obs_log_density(std::int64_t y, const LatentState& state,
                       const ParamVector& theta, const ModelConfig& cfg);

// Var[y | state]: rho*Z for Poisson, rho*Z + phi*(rho*Z)^2 for NegBin.
double obs_conditional_variance(const LatentState& state, const ParamVector& theta,
                                const ModelConfig& cfg);

// Draw one observation; NegBin is sampled as a Gamma-Poisson mixture.
std::int64_t obs_sample(const LatentState& state, const ParamVector& theta,
                        const ModelConfig& cfg, RngStream& rng);

// exp(log_beta) * S / (gamma * N)
double effective_reproduction(const LatentState& state, const ParamVector& theta,
                              double N);

struct SimulatedEpidemic {
  std::vector<LatentState> path;      // size T+1, path[0] is the initial state
  std::vector<std::int64_t> observations;  // size T, observations[t-1] ~ y_t
};

// Ground-truth generator: log_beta follows the supplied schedule exactly
// (no diffusion) and one observation is drawn per reporting interval.
SimulatedEpidemic simulate_epidemic(const ModelConfig& cfg, const ParamVector& theta,
                                    const std::function<double(double)>& beta_schedule,
                                    int T, const LatentState& initial, RngStream& rng);

}  // namespace epismc
