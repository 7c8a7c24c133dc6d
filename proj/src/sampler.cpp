#include "accjoint/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <set>
#include <thread>

#include "accjoint/errors.hpp"

namespace accjoint {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Stream roles; every random draw in a run is keyed by (seed, role, ...).
constexpr std::uint64_t kInitRole = 0xA001;
constexpr std::uint64_t kGroupRole = 0xA002;
constexpr std::uint64_t kSubjectRole = 0xA003;

Eigen::VectorXd resolved_aux_scale(const SamplerConfig& cfg, int dim) {
  if (cfg.aux_scale.size() == 0) return Eigen::VectorXd::Ones(dim);
  if (cfg.aux_scale.size() != dim)
    throw ConfigError("aux_scale length " + std::to_string(cfg.aux_scale.size()) +
                      " does not match parameter count " + std::to_string(dim));
  return cfg.aux_scale;
}

std::vector<std::string> sorted_subject_ids(const std::vector<TrialRecord>& data) {
  std::set<std::string> ids;
  for (const auto& t : data) ids.insert(t.subject);
  return std::vector<std::string>(ids.begin(), ids.end());
}

Eigen::VectorXd draw_initial_alpha(const std::function<double(const Eigen::VectorXd&)>& loglik,
                                   const std::string& subject_id, int dim, RngStream& rng) {
  const double sd = std::sqrt(0.1);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Eigen::VectorXd alpha(dim);
    for (int i = 0; i < dim; ++i) alpha[i] = sd * rng.normal();
    if (std::isfinite(loglik(alpha))) return alpha;
  }
  throw InitError("subject '" + subject_id +
                  "': no finite-likelihood starting point after 1000 attempts");
}

}  // namespace

const char* stage_name(Stage stage) {
  switch (stage) {
    case Stage::kBurnIn: return "burn_in";
    case Stage::kAdaptation: return "adaptation";
    default: return "sampling";
  }
}

Stage stage_from_name(const std::string& name) {
  if (name == "burn_in") return Stage::kBurnIn;
  if (name == "adaptation") return Stage::kAdaptation;
  if (name == "sampling") return Stage::kSampling;
  throw InvalidInput("unknown stage name '" + name + "'");
}

void SamplerConfig::check() const {
  for (Stage st : {Stage::kBurnIn, Stage::kAdaptation, Stage::kSampling}) {
    if (particles.of(st) < 1)
      throw ConfigError(std::string("particle count for stage ") + stage_name(st) +
                        " must be >= 1");
    if (draws.of(st) < 1)
      throw ConfigError(std::string("draw count for stage ") + stage_name(st) + " must be >= 1");
  }
  if (!(w_prior > 0.0) || !(w_local > 0.0))
    throw ConfigError("mixture weights must both be positive");
  if (std::abs(w_prior + w_local - 1.0) > 1e-9)
    throw ConfigError("mixture weights must sum to 1");
  if (!(local_scale > 0.0) || !std::isfinite(local_scale))
    throw ConfigError("local_scale must be positive and finite");
  if (thin < 1) throw ConfigError("thin must be >= 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (!(nu > 0.0) || !std::isfinite(nu)) throw ConfigError("nu must be positive");
  for (int i = 0; i < aux_scale.size(); ++i)
    if (!(aux_scale[i] > 0.0) || !std::isfinite(aux_scale[i]))
      throw ConfigError("aux_scale entries must be positive");
  if (adapt_min_unique < 2) throw ConfigError("adapt_min_unique must be >= 2");
  if (!(proposal_ridge >= 0.0)) throw ConfigError("proposal_ridge must be >= 0");
}

void ProposalSpec::check(int dim) const {
  for (double w : {w_population, w_local, w_fitted})
    if (!std::isfinite(w) || w < 0.0)
      throw ConfigError("proposal weights must be finite and nonnegative");
  if (std::abs(w_population + w_local + w_fitted - 1.0) > 1e-9)
    throw ConfigError("proposal weights must sum to 1");
  if (w_local > 0.0 && !(local_scale > 0.0))
    throw ConfigError("local proposal scale must be positive");
  if (w_fitted > 0.0) {
    if (!fitted_mean.has_value() || !fitted_chol.has_value())
      throw ConfigError("fitted proposal component requires a mean and covariance factor");
    if (fitted_mean->size() != dim || fitted_chol->rows() != dim || fitted_chol->cols() != dim)
      throw ConfigError("fitted proposal dimension mismatch");
  }
}

ParticleUpdateResult particle_update_core(
    const std::function<double(const Eigen::VectorXd&)>& log_likelihood,
    const Eigen::VectorXd& alpha_current, const GroupState& gs, const ProposalSpec& proposal,
    int R, RngStream& rng, std::optional<double> cached_current_loglik) {
  const int d = gs.dim();
  if (R < 1) throw InvalidInput("particle count must be >= 1");
  if (alpha_current.size() != d) throw InvalidInput("current effects dimension mismatch");
  proposal.check(d);

  ParticleUpdateResult out;
  out.effects.alpha = alpha_current;
  if (R == 1) {
    out.log_likelihood =
        cached_current_loglik ? *cached_current_loglik : log_likelihood(alpha_current);
    return out;
  }

  const Eigen::MatrixXd prior_chol = robust_cholesky(gs.sigma);
  struct Component {
    double weight;
    double log_weight;
    const Eigen::VectorXd* mean;
    const Eigen::MatrixXd* chol;
  };
  Eigen::MatrixXd local_chol;
  Component comps[3];
  int n_comps = 0;
  if (proposal.w_population > 0.0)
    comps[n_comps++] = {proposal.w_population, std::log(proposal.w_population), &gs.mu,
                        &prior_chol};
  if (proposal.w_local > 0.0) {
    local_chol = proposal.local_scale * prior_chol;
    comps[n_comps++] = {proposal.w_local, std::log(proposal.w_local), &alpha_current,
                        &local_chol};
  }
  if (proposal.w_fitted > 0.0)
    comps[n_comps++] = {proposal.w_fitted, std::log(proposal.w_fitted), &*proposal.fitted_mean,
                        &*proposal.fitted_chol};

  Eigen::MatrixXd particles(d, R);
  particles.col(0) = alpha_current;
  Eigen::VectorXd z(d);
  for (int r = 1; r < R; ++r) {
    const double u = rng.uniform();
    const Component* pick = &comps[n_comps - 1];
    double acc = 0.0;
    for (int c = 0; c < n_comps; ++c) {
      acc += comps[c].weight;
      if (u < acc) {
        pick = &comps[c];
        break;
      }
    }
    for (int i = 0; i < d; ++i) z[i] = rng.normal();
    particles.col(r) = *pick->mean + pick->chol->triangularView<Eigen::Lower>() * z;
  }

  Eigen::VectorXd log_w(R), lik(R);
  for (int r = 0; r < R; ++r) {
    const Eigen::VectorXd x = particles.col(r);
    const double ll =
        (r == 0 && cached_current_loglik) ? *cached_current_loglik : log_likelihood(x);
    lik[r] = ll;
    if (!std::isfinite(ll)) {
      log_w[r] = kNegInf;
      continue;
    }
    // log q(x): stable log-sum over mixture components.
    double lq_terms[3];
    double lq_max = kNegInf;
    for (int c = 0; c < n_comps; ++c) {
      lq_terms[c] = comps[c].log_weight + mvn_log_density(x, *comps[c].mean, *comps[c].chol);
      lq_max = std::max(lq_max, lq_terms[c]);
    }
    double lq_sum = 0.0;
    for (int c = 0; c < n_comps; ++c) lq_sum += std::exp(lq_terms[c] - lq_max);
    const double log_q = lq_max + std::log(lq_sum);
    log_w[r] = ll + mvn_log_density(x, gs.mu, prior_chol) - log_q;
  }

  const double w_max = log_w.maxCoeff();
  if (!std::isfinite(w_max)) {
    out.degenerate = true;
    out.log_likelihood = lik[0];
    return out;
  }
  const Eigen::VectorXd w = (log_w.array() - w_max).exp();
  const double total = w.sum();
  const double u = rng.uniform() * total;
  int selected = R - 1;
  double acc = 0.0;
  for (int r = 0; r < R; ++r) {
    acc += w[r];
    if (u < acc) {
      selected = r;
      break;
    }
  }
  out.effects.alpha = particles.col(selected);
  out.log_likelihood = lik[selected];
  out.moved = selected != 0;
  return out;
}

ParticleUpdateResult particle_update_subject(const std::vector<TrialRecord>& trials,
                                             const SubjectEffects& alpha_current,
                                             const ModelSpec& spec, const GroupState& gs,
                                             const ProposalSpec& proposal, int R,
                                             RngStream& rng) {
  const CompiledDesign design(spec);
  const SubjectData data = SubjectData::build(alpha_current.subject_id, trials, design);
  auto loglik = [&](const Eigen::VectorXd& a) {
    return compiled_log_likelihood(a, design, data);
  };
  ParticleUpdateResult res =
      particle_update_core(loglik, alpha_current.alpha, gs, proposal, R, rng);
  res.effects.subject_id = alpha_current.subject_id;
  return res;
}

ChainState init_chain(const std::vector<TrialRecord>& data, const ModelSpec& spec,
                      const SamplerConfig& cfg, RngStream& rng) {
  cfg.check();
  spec.check();
  const int d = spec.dim();
  ChainState state;
  state.group = GroupState::init(d, cfg.nu);
  state.group.aux_scale = resolved_aux_scale(cfg, d);

  const CompiledDesign design(spec);
  for (const std::string& id : sorted_subject_ids(data)) {
    const SubjectData sdata = SubjectData::build(id, data, design);
    auto loglik = [&](const Eigen::VectorXd& a) {
      return compiled_log_likelihood(a, design, sdata);
    };
    state.alphas.push_back({id, draw_initial_alpha(loglik, id, d, rng)});
  }
  return state;
}

std::vector<const ChainRecord*> PosteriorChain::records_for(Stage stage) const {
  std::vector<const ChainRecord*> out;
  for (const auto& rec : records)
    if (rec.stage == stage) out.push_back(&rec);
  return out;
}

PosteriorChain run_chain(const std::vector<TrialRecord>& data, const ModelSpec& spec,
                         const SamplerConfig& cfg) {
  cfg.check();
  spec.check();
  const ValidationReport report = validate_spec(spec, data);
  if (!report.ok) {
    std::string msg = "model/data validation failed";
    if (!report.problems.empty()) msg += ": " + report.problems.front();
    if (!report.unmapped_cells.empty()) msg += ": unmapped cell " + report.unmapped_cells.front();
    throw InvalidInput(msg);
  }

  const int d = spec.dim();
  const Eigen::VectorXd aux_scale = resolved_aux_scale(cfg, d);
  const CompiledDesign design(spec);
  const std::vector<std::string> ids = sorted_subject_ids(data);
  const int S = static_cast<int>(ids.size());
  if (S == 0) throw InvalidInput("no trials supplied");

  std::vector<SubjectData> sdata;
  sdata.reserve(S);
  for (const auto& id : ids) sdata.push_back(SubjectData::build(id, data, design));

  PosteriorChain chain;
  chain.subject_ids = ids;
  chain.param_names = spec.vector_order;
  chain.block_labels = spec.block_labels();
  chain.config = cfg;

  // State. Every stream is derived from (seed, role, subject, sweep), so the
  // draw sequence is identical whatever the worker count or input row order.
  GroupState gs = GroupState::init(d, cfg.nu);
  gs.aux_scale = aux_scale;
  std::vector<Eigen::VectorXd> alpha(S);
  std::vector<double> cur_loglik(S, kNegInf);
  for (int s = 0; s < S; ++s) {
    RngStream rng = RngStream::derive(cfg.seed, kInitRole, static_cast<std::uint64_t>(s));
    auto loglik = [&](const Eigen::VectorXd& a) {
      return compiled_log_likelihood(a, design, sdata[s]);
    };
    alpha[s] = draw_initial_alpha(loglik, ids[s], d, rng);
    cur_loglik[s] = compiled_log_likelihood(alpha[s], design, sdata[s]);
  }
  RngStream group_rng = RngStream::derive(cfg.seed, kGroupRole);

  ProposalSpec mixture;
  mixture.w_population = cfg.w_prior;
  mixture.w_local = cfg.w_local;
  mixture.w_fitted = 0.0;
  mixture.local_scale = cfg.local_scale;

  std::vector<std::vector<Eigen::VectorXd>> adapt_draws(S);
  std::vector<int> unique_draws(S, 0);
  std::vector<ProposalSpec> fitted(S);
  std::vector<const ProposalSpec*> active(S, &mixture);

  std::atomic<std::int64_t> degenerate{0};

  auto update_subject = [&](int s, std::int64_t sweep, Stage stage, int R) {
    RngStream rng = RngStream::derive(cfg.seed, kSubjectRole, static_cast<std::uint64_t>(s),
                                      static_cast<std::uint64_t>(sweep));
    auto loglik = [&](const Eigen::VectorXd& a) {
      return compiled_log_likelihood(a, design, sdata[s]);
    };
    ParticleUpdateResult res =
        particle_update_core(loglik, alpha[s], gs, *active[s], R, rng, cur_loglik[s]);
    alpha[s] = res.effects.alpha;
    cur_loglik[s] = res.log_likelihood;
    if (res.degenerate) ++degenerate;
    if (stage == Stage::kAdaptation) {
      auto& acc = adapt_draws[s];
      if (acc.empty() || res.moved) ++unique_draws[s];
      acc.push_back(alpha[s]);
    }
  };

  auto sweep_subjects = [&](std::int64_t sweep, Stage stage, int R) {
    const int workers = std::min(cfg.workers, S);
    if (workers <= 1) {
      for (int s = 0; s < S; ++s) update_subject(s, sweep, stage, R);
      return;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        try {
          for (int s = next.fetch_add(1); s < S; s = next.fetch_add(1))
            update_subject(s, sweep, stage, R);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  };

  auto fit_proposals = [&] {
    for (int s = 0; s < S; ++s) {
      const auto& draws = adapt_draws[s];
      if (unique_draws[s] < cfg.adapt_min_unique) {
        chain.warnings.push_back("subject '" + ids[s] + "': only " +
                                 std::to_string(unique_draws[s]) +
                                 " unique adaptation draws; keeping mixture proposal");
        continue;
      }
      const double n = static_cast<double>(draws.size());
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
      for (const auto& x : draws) mean += x;
      mean /= n;
      Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
      for (const auto& x : draws) {
        const Eigen::VectorXd c = x - mean;
        cov.noalias() += c * c.transpose();
      }
      cov /= (n - 1.0);
      cov.diagonal().array() += cfg.proposal_ridge;
      try {
        const Eigen::MatrixXd chol = robust_cholesky(cov);
        ProposalSpec p;
        // Mostly the fitted Gaussian, with a small population component so
        // the importance weights keep heavy enough tails.
        p.w_population = 0.05;
        p.w_local = 0.0;
        p.w_fitted = 0.95;
        p.local_scale = cfg.local_scale;
        p.fitted_mean = mean;
        p.fitted_chol = chol;
        fitted[s] = std::move(p);
        active[s] = &fitted[s];
      } catch (const NumericalError&) {
        chain.warnings.push_back("subject '" + ids[s] +
                                 "': proposal fit failed; keeping mixture proposal");
      }
    }
  };

  std::int64_t sweep = 0;
  for (Stage stage : {Stage::kBurnIn, Stage::kAdaptation, Stage::kSampling}) {
    if (stage == Stage::kSampling) fit_proposals();
    const int R = cfg.particles.of(stage);
    const int stored_target = cfg.draws.of(stage);
    for (int rec_idx = 0; rec_idx < stored_target; ++rec_idx) {
      for (int t = 0; t < cfg.thin; ++t) {
        ++sweep;
        gs.mu = sample_group_mean(alpha, gs.sigma, group_rng);
        gs.sigma = sample_group_cov(alpha, gs.mu, gs.aux, gs.nu, group_rng);
        gs.aux = sample_aux(gs.sigma, gs.nu, gs.aux_scale, group_rng);
        sweep_subjects(sweep, stage, R);
      }
      ChainRecord rec;
      rec.iter = sweep;
      rec.stage = stage;
      rec.mu = gs.mu;
      rec.sigma = gs.sigma;
      rec.aux = gs.aux;
      rec.alpha.resize(S, d);
      for (int s = 0; s < S; ++s) rec.alpha.row(s) = alpha[s].transpose();
      chain.records.push_back(std::move(rec));
    }
  }
  chain.degenerate_updates = degenerate.load();
  return chain;
}

}  // namespace accjoint
