#include "epismc/model.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <stdexcept>

namespace epismc {

namespace {

constexpr double kLogZero = -std::numeric_limits<double>::infinity();

// one fused check: any NaN or infinity poisons the sum
bool finite_state(const LatentState& s) {
  return std::isfinite(s.S + s.E + s.I + s.R + s.Z + s.log_beta);
}

// One Euler sub-step of length h with fixed beta; flows evaluated at the
// incoming state. Conserves S+E+I+R exactly before clamping.
void euler_substep(LatentState& s, double beta, const ParamVector& theta, double N,
                   double h) {
  const double infections = beta * s.S * s.I / N * h;
  const double progressions = theta.alpha * s.E * h;
  const double recoveries = theta.gamma * s.I * h;

  s.S -= infections;
  s.E += infections - progressions;
  s.I += progressions - recoveries;
  s.R += recoveries;
  s.Z += progressions;

  if (s.S < 0) s.S = 0;
  if (s.E < 0) s.E = 0;
  if (s.I < 0) s.I = 0;
  if (s.R < 0) s.R = 0;
  if (s.Z < 0) s.Z = 0;

  const double total = s.S + s.E + s.I + s.R;
  if (std::abs(total - N) > 1e-12 * N && total > 0) {
    const double scale = N / total;
    s.S *= scale;
    s.E *= scale;
    s.I *= scale;
    s.R *= scale;
  }
}

// log Gamma(y + r) - log Gamma(r) for integer y, stable for huge r where the
// direct lgamma difference loses all precision.
double log_gamma_ratio(std::int64_t y, double r) {
  if (r <= 1e6 && y > 4096) return std::lgamma(static_cast<double>(y) + r) - std::lgamma(r);
  double acc = 0;
  for (std::int64_t k = 0; k < y; ++k) acc += std::log(r + static_cast<double>(k));
  return acc;
}

double poisson_log_pmf(std::int64_t y, double mu) {
  return static_cast<double>(y) * std::log(mu) - mu - std::lgamma(static_cast<double>(y) + 1);
}

// NegBin(mean mu, variance mu + phi mu^2) in the size-probability form
// r = 1/phi, p = r/(r+mu). Written so the phi -> 0 limit reproduces the
// Poisson log-pmf to full precision.
double negbin_log_pmf(std::int64_t y, double mu, double phi) {
  const double r = 1.0 / phi;
  double acc = 0;
  if (y <= 4096 || r > 1e6) {
    const double log_r_mu = std::log(r + mu);
    for (std::int64_t k = 0; k < y; ++k) acc += std::log(r + static_cast<double>(k)) - log_r_mu;
  } else {
    acc = log_gamma_ratio(y, r) - static_cast<double>(y) * std::log(r + mu);
  }
  return acc - r * std::log1p(mu / r) + static_cast<double>(y) * std::log(mu) -
         std::lgamma(static_cast<double>(y) + 1);
}

}  // namespace

int ParamVector::index_of(const char* name) {
  for (int k = 0; k < n_params; ++k)
    if (std::strcmp(name, ParamVector::name(k)) == 0) return k;
  return -1;
}

LatentState transition(const LatentState& state, const ParamVector& theta,
                       const ModelConfig& cfg, RngStream& rng) {
  if (!finite_state(state)) throw std::domain_error("transition: non-finite latent state");

  LatentState s = state;
  s.Z = 0;  // incidence restarts each reporting interval
  const double h = cfg.dt / cfg.n_substeps;
  const double noise_sd = theta.nu_beta * std::sqrt(h);
  for (int k = 0; k < cfg.n_substeps; ++k) {
    euler_substep(s, std::exp(s.log_beta), theta, cfg.N, h);
    if (noise_sd > 0) s.log_beta += noise_sd * rng.normal();
  }

  if (!finite_state(s) || std::abs(s.S + s.E + s.I + s.R - cfg.N) > 1e-6 * cfg.N)
    throw std::runtime_error("transition: numerical failure in Euler update");
  return s;
}

double obs_log_density(std::int64_t y, const LatentState& state,
                       const ParamVector& theta, const ModelConfig& cfg) {
  if (y < 0) throw std::domain_error("obs_log_density: negative count");
  const double mu = std::max(kObsMeanFloor, cfg.rho * state.Z);
  double lp;
  if (cfg.obs == ObsModel::Poisson || theta.phi == 0.0) {
    lp = poisson_log_pmf(y, mu);
  } else {
    lp = negbin_log_pmf(y, mu, theta.phi);
  }
  return std::isfinite(lp) ? lp : kLogZero;
}

double obs_conditional_variance(const LatentState& state, const ParamVector& theta,
                                const ModelConfig& cfg) {
  const double mu = cfg.rho * state.Z;
  if (cfg.obs == ObsModel::Poisson) return mu;
  return mu + theta.phi * mu * mu;
}

std::int64_t obs_sample(const LatentState& state, const ParamVector& theta,
                        const ModelConfig& cfg, RngStream& rng) {
  const double mu = std::max(kObsMeanFloor, cfg.rho * state.Z);
  double rate = mu;
  if (cfg.obs == ObsModel::NegBin && theta.phi > 0) {
    const double r = 1.0 / theta.phi;
    std::gamma_distribution<double> gamma(r, mu / r);
    rate = gamma(rng);
    if (rate <= 0) return 0;
  }
  std::poisson_distribution<std::int64_t> pois(rate);
  return pois(rng);
}

double effective_reproduction(const LatentState& state, const ParamVector& theta,
                              double N) {
  if (theta.gamma <= 0) throw std::domain_error("effective_reproduction: gamma must be > 0");
  return std::exp(state.log_beta) * state.S / (theta.gamma * N);
}

SimulatedEpidemic simulate_epidemic(const ModelConfig& cfg, const ParamVector& theta,
                                    const std::function<double(double)>& beta_schedule,
                                    int T, const LatentState& initial, RngStream& rng) {
  if (T < 1) throw std::domain_error("simulate_epidemic: T must be >= 1");

  SimulatedEpidemic out;
  out.path.reserve(static_cast<std::size_t>(T) + 1);
  out.observations.reserve(static_cast<std::size_t>(T));

  LatentState s = initial;
  const double beta_init = beta_schedule(0.0);
  if (!(beta_init > 0)) throw std::domain_error("simulate_epidemic: schedule must be positive");
  s.log_beta = std::log(beta_init);
  out.path.push_back(s);

  const double h = cfg.dt / cfg.n_substeps;
  for (int t = 1; t <= T; ++t) {
    s.Z = 0;
    for (int k = 0; k < cfg.n_substeps; ++k) {
      const double time = (t - 1) * cfg.dt + k * h;
      const double beta = beta_schedule(time);
      if (!(beta > 0)) throw std::domain_error("simulate_epidemic: schedule must be positive");
      s.log_beta = std::log(beta);
      euler_substep(s, beta, theta, cfg.N, h);
    }
    s.log_beta = std::log(beta_schedule(t * cfg.dt));
    out.path.push_back(s);
    out.observations.push_back(obs_sample(s, theta, cfg, rng));
  }
  return out;
}

}  // namespace epismc
