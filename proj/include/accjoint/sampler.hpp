#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "accjoint/design.hpp"
#include "accjoint/hierarchy.hpp"
#include "accjoint/lba.hpp"
#include "accjoint/rng.hpp"

namespace accjoint {

enum class Stage { kBurnIn, kAdaptation, kSampling };

const char* stage_name(Stage stage);
Stage stage_from_name(const std::string& name);

struct StageCounts {
  int burn_in = 0;
  int adaptation = 0;
  int sampling = 0;

  int of(Stage stage) const {
    switch (stage) {
      case Stage::kBurnIn: return burn_in;
      case Stage::kAdaptation: return adaptation;
      default: return sampling;
    }
  }
};

struct SamplerConfig {
  StageCounts particles{100, 100, 50};
  StageCounts draws{500, 500, 2000};
  double w_prior = 0.5;       // mixture weight on the population component
  double w_local = 0.5;       // mixture weight on the local random-walk component
  double local_scale = 0.5;   // local component covariance is (local_scale^2) * Sigma
  std::uint64_t seed = 1;
  int thin = 1;
  int workers = 1;
  double nu = 2.0;            // population covariance prior shape
  Eigen::VectorXd aux_scale;  // per-coordinate auxiliary scales; empty = all ones
  int adapt_min_unique = 20;  // unique draws required before fitting a proposal
  double proposal_ridge = 1e-6;

  void check() const;  // throws ConfigError on invalid settings
};

// Proposal for one subject's update: a mixture of a population component
// MVN(mu, Sigma), a local component MVN(current, local_scale^2 * Sigma), and
// an optional fitted Gaussian with its own mean/covariance.
struct ProposalSpec {
  double w_population = 0.5;
  double w_local = 0.5;
  double w_fitted = 0.0;
  double local_scale = 0.5;
  std::optional<Eigen::VectorXd> fitted_mean;
  std::optional<Eigen::MatrixXd> fitted_chol;  // lower Cholesky of fitted covariance

  void check(int dim) const;
};

struct ParticleUpdateResult {
  SubjectEffects effects;
  double log_likelihood = 0.0;  // of the selected particle
  bool moved = false;           // selected particle differs from the current value
  bool degenerate = false;      // every particle weight was -inf; current retained
};

// One conditional update of a single subject's random effects. Particle 0 is
// always the current value; the rest are proposal draws, importance-weighted
// by likelihood x population density / proposal density. With R = 1 the
// current value is returned untouched and no randomness is consumed.
ParticleUpdateResult particle_update_core(
    const std::function<double(const Eigen::VectorXd&)>& log_likelihood,
    const Eigen::VectorXd& alpha_current, const GroupState& gs,
    const ProposalSpec& proposal, int R, RngStream& rng,
    std::optional<double> cached_current_loglik = std::nullopt);

ParticleUpdateResult particle_update_subject(
    const std::vector<TrialRecord>& trials, const SubjectEffects& alpha_current,
    const ModelSpec& spec, const GroupState& gs, const ProposalSpec& proposal,
    int R, RngStream& rng);

struct ChainState {
  GroupState group;
  std::vector<SubjectEffects> alphas;  // one per subject, sorted by subject id
};

// Starting point: mu = 0, Sigma = I, aux = 1, and per-subject effects drawn
// from MVN(0, 0.1 I) until the likelihood is finite (up to 1000 attempts,
// then an initialization error naming the subject).
ChainState init_chain(const std::vector<TrialRecord>& data, const ModelSpec& spec,
                      const SamplerConfig& cfg, RngStream& rng);

struct ChainRecord {
  std::int64_t iter = 0;  // global sweep index, strictly increasing
  Stage stage = Stage::kBurnIn;
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  Eigen::VectorXd aux;
  Eigen::MatrixXd alpha;  // subjects x coordinates, rows follow subject_ids
};

struct PosteriorChain {
  std::vector<std::string> subject_ids;   // sorted; alpha row order
  std::vector<std::string> param_names;   // coordinate order
  std::vector<std::string> block_labels;  // owning task per coordinate
  std::vector<ChainRecord> records;
  SamplerConfig config;
  std::vector<std::string> warnings;
  std::int64_t degenerate_updates = 0;
  std::string model_hash;  // filled when persisted from files
  std::string data_hash;

  int dim() const { return static_cast<int>(param_names.size()); }
  int n_subjects() const { return static_cast<int>(subject_ids.size()); }
  std::vector<const ChainRecord*> records_for(Stage stage) const;
};

// Full three-stage run: burn-in with the mixture proposal, adaptation
// accumulating per-subject draws, sampling with per-subject fitted proposals
// (falling back to the mixture, with a warning, when a fit is unavailable).
// Deterministic for a fixed seed regardless of worker count: every random
// stream is keyed by (seed, role, subject, sweep).
PosteriorChain run_chain(const std::vector<TrialRecord>& data, const ModelSpec& spec,
                         const SamplerConfig& cfg);

}  // namespace accjoint
