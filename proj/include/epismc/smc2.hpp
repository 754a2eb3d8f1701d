#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "epismc/engines.hpp"
#include "epismc/linalg.hpp"
#include "epismc/model.hpp"
#include "epismc/parallel.hpp"
#include "epismc/rng.hpp"
#include "epismc/stochastic.hpp"

namespace epismc {

struct proposal_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Independent multivariate-normal proposal over the free parameters, built
// from the weighted particle population and scaled by c.
struct ProposalSpec {
  std::vector<int> free;      // indices into ParamVector
  std::vector<double> mean;   // one entry per free parameter
  SymMatrix cov;              // scaled covariance, jittered on the diagonal
  SymMatrix chol;             // lower factor of cov

  ParamVector sample(const ParamVector& fixed_template, RngStream& rng) const;
  double log_density(const ParamVector& theta) const;
};

ProposalSpec build_proposal(const std::vector<ParamVector>& thetas,
                            const std::vector<double>& weights,
                            const std::vector<int>& free, double scale);

struct ParamSummary {
  double mean = 0, sd = 0, q025 = 0, q25 = 0, q50 = 0, q75 = 0, q975 = 0;
};

// Weighted posterior summaries of every free parameter.
std::vector<ParamSummary> summarize_params(const std::vector<ParamVector>& thetas,
                                           const std::vector<double>& weights,
                                           const std::vector<int>& free);

struct HistoryRow {
  int t = 0;
  std::vector<ParamSummary> params;  // aligned with the free-parameter order
};

struct StepDiagnostics {
  int t = 0;
  double ess = 0;
  bool rejuvenated = false;
  double acceptance_rate = 0;  // accepted / (n_theta * moves), when rejuvenated
  double seconds = 0;
};

struct RunDiagnostics {
  std::vector<StepDiagnostics> steps;
  int n_rejuvenations = 0;
  double total_seconds = 0;
};

struct Smc2Options {
  int n_theta = 1000;
  int n_inner = 200;
  int pmmh_moves = 5;
  double ess_threshold_frac = 0.5;  // rejuvenate when ESS < frac * n_theta
  double proposal_scale = 1.0;
  EngineOptions engine;
  int threads = 1;
  std::vector<int> checkpoint_steps;       // extra full particle dumps
  std::vector<ParamVector> initial_thetas;  // override the prior draws
};

// log acceptance ratio of one metropolis move with an independent proposal;
// equals zero when candidate and incumbent carry identical values.
inline double pmmh_log_ratio(double cand_loglik, double cand_log_prior,
                             double cand_log_q, double cur_loglik,
                             double cur_log_prior, double cur_log_q) {
  return (cand_loglik + cand_log_prior + cur_log_q) -
         (cur_loglik + cur_log_prior + cand_log_q);
}

template <class Engine>
struct ThetaParticle {
  ParamVector theta;
  typename Engine::Model model;
  typename Engine::State filter;
  double log_weight = 0;  // log of the normalized weight
  double cum_loglik = 0;
  RngKey lineage;         // stream namespace for this particle's filter
  bool dead = false;
};

struct ThetaSnapshot {
  int t = 0;
  std::vector<ParamVector> thetas;
  std::vector<double> weights;
};

template <class Engine>
struct Smc2Result {
  std::vector<ThetaParticle<Engine>> particles;
  std::vector<int> free_params;
  std::vector<HistoryRow> history;
  std::vector<ThetaSnapshot> checkpoints;
  RunDiagnostics diag;
  bool completed = true;
  int abort_step = -1;
  std::string message;

  std::vector<double> normalized_weights() const {
    std::vector<double> w(particles.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(particles[i].log_weight);
    return w;
  }
  std::vector<ParamVector> thetas() const {
    std::vector<ParamVector> th(particles.size());
    for (std::size_t i = 0; i < th.size(); ++i) th[i] = particles[i].theta;
    return th;
  }
};

namespace smc2_detail {
inline constexpr std::uint64_t kThetaInitTag = 0x31;
inline constexpr std::uint64_t kLineageTag = 0x32;
inline constexpr std::uint64_t kResampleTag = 0x33;
inline constexpr std::uint64_t kMoveTag = 0x34;
inline constexpr std::uint64_t kMoveFilterTag = 0x35;
}  // namespace smc2_detail

// SMC sampler over parameter particles, each carrying a persistent inner
// filter that supplies incremental likelihoods. Weights are updated per
// observation; when the effective sample size falls below the threshold the
// population is resampled (filters are duplicated with their particles) and
// every particle is moved through a few metropolis steps whose likelihoods
// come from fresh inner filters run over the whole record so far.
//
// All randomness is keyed by (seed, particle lineage, time), so a run is
// reproducible bit for bit at any thread count.
template <class Engine>
class Smc2Driver {
 public:
  using Model = typename Engine::Model;
  using Particle = ThetaParticle<Engine>;

  Smc2Driver(std::function<Model(const ParamVector&)> make_model, PriorSpec prior,
             Smc2Options options)
      : make_model_(std::move(make_model)),
        prior_(std::move(prior)),
        opt_(std::move(options)) {}

  Smc2Result<Engine> run(const std::vector<double>& observations, RngKey root) const {
    const auto t_start = std::chrono::steady_clock::now();
    Smc2Result<Engine> result;
    result.free_params = prior_.free_indices();

    std::vector<Particle> particles = initialize(root);
    const int T = static_cast<int>(observations.size());

    for (int t = 0; t < T; ++t) {
      const auto t0 = std::chrono::steady_clock::now();
      StepDiagnostics sd;
      sd.t = t;
      try {
        assimilate(particles, observations[t], t);
        sd.ess = current_ess(particles);
        if (sd.ess < opt_.ess_threshold_frac * opt_.n_theta) {
          sd.rejuvenated = true;
          sd.acceptance_rate = resample_move(particles, observations, t, root);
          result.diag.n_rejuvenations++;
        }
      } catch (const degenerate_weights_error& e) {
        result.completed = false;
        result.abort_step = t;
        result.message = e.what();
      } catch (const proposal_error& e) {
        result.completed = false;
        result.abort_step = t;
        result.message = e.what();
      }
      sd.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      result.diag.steps.push_back(sd);
      if (!result.completed) break;

      result.history.push_back(make_history_row(particles, t));
      for (int cp : opt_.checkpoint_steps)
        if (cp == t) result.checkpoints.push_back(snapshot(particles, t));
    }

    result.particles = std::move(particles);
    result.diag.total_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
  }

 private:
  std::vector<Particle> initialize(RngKey root) const {
    if (!opt_.initial_thetas.empty() &&
        static_cast<int>(opt_.initial_thetas.size()) != opt_.n_theta)
      throw std::invalid_argument("initial_thetas must match n_theta");
    std::vector<Particle> particles(opt_.n_theta);
    const double lw0 = -std::log(static_cast<double>(opt_.n_theta));
    for (int m = 0; m < opt_.n_theta; ++m) {
      RngStream rs(root.child(smc2_detail::kThetaInitTag, static_cast<std::uint64_t>(m)));
      Particle& p = particles[m];
      p.theta = opt_.initial_thetas.empty() ? prior_.sample(rs) : opt_.initial_thetas[m];
      p.model = make_model_(p.theta);
      p.lineage = root.child(smc2_detail::kLineageTag, 0, static_cast<std::uint64_t>(m));
      p.filter = Engine::init(p.model, opt_.n_inner, p.lineage, opt_.engine);
      p.log_weight = lw0;
      p.cum_loglik = 0;
    }
    return particles;
  }

  void assimilate(std::vector<Particle>& particles, double y, int t) const {
    std::vector<double> incr(particles.size(), kLogZero);
    auto* p = particles.data();
    parallel_for(static_cast<std::int64_t>(particles.size()), opt_.threads,
                 [&](std::int64_t m) {
                   if (p[m].dead) return;
                   incr[m] = Engine::step(p[m].filter, p[m].model, y,
                                          p[m].lineage.child(static_cast<std::uint64_t>(t) + 1),
                                          opt_.engine);
                 });

    std::vector<double> log_w(particles.size());
    for (std::size_t m = 0; m < particles.size(); ++m) {
      auto& q = particles[m];
      if (incr[m] == kLogZero) q.dead = true;
      q.cum_loglik += incr[m];
      log_w[m] = q.log_weight + incr[m];
    }
    const WeightVector w = normalize_log_weights(log_w);  // throws when all dead
    for (std::size_t m = 0; m < particles.size(); ++m)
      particles[m].log_weight = w[m] > 0 ? std::log(w[m]) : kLogZero;
  }

  double current_ess(const std::vector<Particle>& particles) const {
    double s2 = 0;
    for (const auto& p : particles) {
      const double w = std::exp(p.log_weight);
      s2 += w * w;
    }
    return 1.0 / s2;
  }

  // Stratified resample of the particles (inner filters travel with them),
  // fresh lineages for the copies, then `pmmh_moves` metropolis moves per
  // particle from an independent normal proposal fitted to the resampled
  // population. Returns the overall acceptance rate.
  double resample_move(std::vector<Particle>& particles,
                       const std::vector<double>& observations, int t, RngKey root) const {
    WeightVector w;
    w.w.resize(particles.size());
    for (std::size_t m = 0; m < particles.size(); ++m)
      w.w[m] = std::exp(particles[m].log_weight);
    RngStream rs(root.child(smc2_detail::kResampleTag, static_cast<std::uint64_t>(t)));
    const auto idx = stratified_resample(w, rs);

    std::vector<Particle> next(particles.size());
    const double lw0 = -std::log(static_cast<double>(particles.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) {
      next[j] = particles[idx[j]];
      next[j].log_weight = lw0;
      next[j].lineage = root.child(smc2_detail::kLineageTag,
                                   static_cast<std::uint64_t>(t) + 1,
                                   static_cast<std::uint64_t>(j));
    }
    particles = std::move(next);

    const auto free = prior_.free_indices();
    std::vector<ParamVector> thetas(particles.size());
    for (std::size_t m = 0; m < particles.size(); ++m) thetas[m] = particles[m].theta;
    const std::vector<double> uniform(particles.size(), 1.0 / particles.size());
    const ProposalSpec proposal = build_proposal(thetas, uniform, free, opt_.proposal_scale);

    std::vector<int> accepted(particles.size(), 0);
    auto* p = particles.data();
    parallel_for(static_cast<std::int64_t>(particles.size()), opt_.threads,
                 [&](std::int64_t j) {
                   accepted[j] = pmmh_chain(p[j], observations, t, proposal,
                                            root.child(smc2_detail::kMoveTag,
                                                       static_cast<std::uint64_t>(t),
                                                       static_cast<std::uint64_t>(j)));
                 });

    long total_accepted = 0;
    for (int a : accepted) total_accepted += a;
    return static_cast<double>(total_accepted) /
           (static_cast<double>(particles.size()) * opt_.pmmh_moves);
  }

  // R metropolis moves on one particle. The incumbent keeps its stored
  // likelihood; only proposals run a fresh filter over y_{1:t}.
  int pmmh_chain(Particle& p, const std::vector<double>& observations, int t,
                 const ProposalSpec& proposal, RngKey chain_key) const {
    int accepted = 0;
    double incumbent_prior = prior_.log_density(p.theta);
    double incumbent_q = proposal.log_density(p.theta);
    for (int r = 0; r < opt_.pmmh_moves; ++r) {
      const RngKey move_key = chain_key.child(static_cast<std::uint64_t>(r));
      RngStream rs(move_key.child(0));
      const ParamVector candidate = proposal.sample(p.theta, rs);
      const double cand_prior = prior_.log_density(candidate);
      if (cand_prior == kLogZero) continue;  // outside support: certain reject

      const Model cand_model = make_model_(candidate);
      const RngKey filter_key = move_key.child(smc2_detail::kMoveFilterTag);
      typename Engine::State cand_state =
          Engine::init(cand_model, opt_.n_inner, filter_key, opt_.engine);
      double cand_loglik = 0;
      for (int s = 0; s <= t; ++s) {
        const double incr =
            Engine::step(cand_state, cand_model, observations[s],
                         filter_key.child(static_cast<std::uint64_t>(s) + 1), opt_.engine);
        cand_loglik += incr;
        if (incr == kLogZero) break;
      }
      if (cand_loglik == kLogZero) continue;

      const double cand_q = proposal.log_density(candidate);
      const double log_ratio = pmmh_log_ratio(cand_loglik, cand_prior, cand_q,
                                              p.cum_loglik, incumbent_prior, incumbent_q);
      if (std::log(rs.uniform_pos()) < log_ratio) {
        p.theta = candidate;
        p.model = cand_model;
        p.filter = std::move(cand_state);
        p.cum_loglik = cand_loglik;
        p.lineage = filter_key;
        p.dead = false;
        incumbent_prior = cand_prior;
        incumbent_q = cand_q;
        ++accepted;
      }
    }
    return accepted;
  }

  HistoryRow make_history_row(const std::vector<Particle>& particles, int t) const {
    HistoryRow row;
    row.t = t;
    std::vector<ParamVector> thetas(particles.size());
    std::vector<double> weights(particles.size());
    for (std::size_t m = 0; m < particles.size(); ++m) {
      thetas[m] = particles[m].theta;
      weights[m] = std::exp(particles[m].log_weight);
    }
    row.params = summarize_params(thetas, weights, prior_.free_indices());
    return row;
  }

  ThetaSnapshot snapshot(const std::vector<Particle>& particles, int t) const {
    ThetaSnapshot s;
    s.t = t;
    s.thetas.resize(particles.size());
    s.weights.resize(particles.size());
    for (std::size_t m = 0; m < particles.size(); ++m) {
      s.thetas[m] = particles[m].theta;
      s.weights[m] = std::exp(particles[m].log_weight);
    }
    return s;
  }

  std::function<Model(const ParamVector&)> make_model_;
  PriorSpec prior_;
  Smc2Options opt_;
};

}  // namespace epismc
