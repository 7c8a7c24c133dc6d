#include "accjoint/simstudy.hpp"

#include <algorithm>
#include <cmath>

#include "accjoint/errors.hpp"
#include "accjoint/stats.hpp"

namespace accjoint {

namespace {

constexpr std::uint64_t kAlphaRole = 0xB001;
constexpr std::uint64_t kTrialRole = 0xB002;

void require_pd(const Eigen::MatrixXd& sigma, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma, Eigen::EigenvaluesOnly);
  const double min_eig = es.eigenvalues().minCoeff();
  if (!(min_eig > 0.0))
    throw NumericalError(std::string(what) + " is not positive definite (smallest eigenvalue " +
                         std::to_string(min_eig) + ")");
}

std::string subject_label(int index, int total) {
  int width = 1;
  for (int v = total; v >= 10; v /= 10) ++width;
  const std::string digits = std::to_string(index + 1);
  const int pad = width - static_cast<int>(digits.size());
  return "s" + std::string(pad > 0 ? pad : 0, '0') + digits;
}

}  // namespace

const char* version_name(GeneratorVersion version) {
  switch (version) {
    case GeneratorVersion::kMatched: return "matched";
    case GeneratorVersion::kZeroBetween: return "zero_between";
    default: return "uniform_r";
  }
}

GeneratorVersion version_from_name(const std::string& name) {
  if (name == "matched") return GeneratorVersion::kMatched;
  if (name == "zero_between") return GeneratorVersion::kZeroBetween;
  if (name == "uniform_r") return GeneratorVersion::kUniformR;
  throw InvalidInput("unknown generator version '" + name +
                     "' (expected matched, zero_between, or uniform_r)");
}

void SimDesign::check() const {
  if (subjects < 2) throw ConfigError("simulation design needs at least 2 subjects");
  if (trials_per_task < 1) throw ConfigError("trials_per_task must be >= 1");
  const int d = generator.dim();
  if (d == 0) throw ConfigError("generator group state is empty");
  if (generator.sigma.rows() != d || generator.sigma.cols() != d)
    throw ConfigError("generator covariance shape does not match its mean");
  if (!(target_r > -1.0) || !(target_r < 1.0))
    throw ConfigError("target_r must lie in (-1, 1)");
  require_pd(generator.sigma, "generator covariance");
}

GroupState build_generator(GeneratorVersion version, const GroupState& base, double target_r,
                           const std::vector<std::string>& block_labels) {
  const int d = base.dim();
  require_pd(base.sigma, "base generator covariance");
  GroupState out = base;
  switch (version) {
    case GeneratorVersion::kMatched:
      break;
    case GeneratorVersion::kZeroBetween: {
      if (static_cast<int>(block_labels.size()) != d)
        throw InvalidInput("block labels must cover every coordinate");
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          if (block_labels[i] != block_labels[j]) out.sigma(i, j) = 0.0;
      break;
    }
    case GeneratorVersion::kUniformR: {
      if (!(target_r > -1.0) || !(target_r < 1.0))
        throw InvalidInput("target_r must lie in (-1, 1)");
      Eigen::VectorXd sd = base.sigma.diagonal().cwiseSqrt();
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          if (i != j) out.sigma(i, j) = target_r * sd[i] * sd[j];
      break;
    }
  }
  require_pd(out.sigma, "modified generator covariance");
  return out;
}

std::vector<PlanEntry> default_cell_plan(const ModelSpec& spec, long trials_per_task) {
  if (trials_per_task < 1) throw InvalidInput("trials_per_task must be >= 1");
  std::vector<PlanEntry> plan;
  for (const auto& task : spec.tasks) {
    const long k = static_cast<long>(task.cells.size());
    if (k == 0) continue;
    const long base = trials_per_task / k;
    long remainder = trials_per_task % k;
    for (const auto& [cell_name, cell] : task.cells) {
      (void)cell;
      PlanEntry entry{task.name, cell_name, base};
      if (remainder > 0) {
        ++entry.n;
        --remainder;
      }
      plan.push_back(std::move(entry));
    }
  }
  return plan;
}

GeneratedData generate_dataset(const SimDesign& design, const ModelSpec& spec,
                               const std::vector<PlanEntry>& cell_plan) {
  design.check();
  spec.check();
  const int d = spec.dim();
  if (design.generator.dim() != d)
    throw InvalidInput("generator dimension does not match the model");
  for (const auto& entry : cell_plan) {
    if (entry.n < 0) throw InvalidInput("cell plan counts must be >= 0");
    if (spec.find_cell(entry.task, entry.cell) == nullptr)
      throw InvalidInput("cell plan references unknown cell '" + entry.task + "/" + entry.cell +
                         "'");
  }

  const Eigen::MatrixXd chol = robust_cholesky(design.generator.sigma);
  GeneratedData out;
  out.true_alpha.resize(design.subjects, d);
  for (int s = 0; s < design.subjects; ++s) {
    out.subject_ids.push_back(subject_label(s, design.subjects));
    RngStream alpha_rng =
        RngStream::derive(design.seed, kAlphaRole, static_cast<std::uint64_t>(s));
    out.true_alpha.row(s) = sample_mvn(design.generator.mu, chol, alpha_rng).transpose();
  }

  for (int s = 0; s < design.subjects; ++s) {
    RngStream trial_rng =
        RngStream::derive(design.seed, kTrialRole, static_cast<std::uint64_t>(s));
    SubjectEffects eff{out.subject_ids[s], out.true_alpha.row(s).transpose()};
    for (const auto& entry : cell_plan) {
      const auto accs = resolve(spec, entry.task, entry.cell, eff);
      for (long i = 0; i < entry.n; ++i) {
        const auto [response, rt] = simulate_trial(accs, trial_rng);
        out.trials.push_back({eff.subject_id, entry.task, entry.cell, response, rt});
      }
    }
  }
  return out;
}

std::vector<RecoveryElement> score_recovery(const PosteriorChain& chain, const SimDesign& design) {
  const auto recs = chain.records_for(Stage::kSampling);
  if (recs.empty()) throw InvalidInput("chain has no sampling-stage draws");
  const int d = chain.dim();
  if (design.generator.dim() != d)
    throw InvalidInput("generator dimension does not match the chain");

  std::vector<RecoveryElement> out;
  std::vector<double> draws(recs.size());
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      for (std::size_t k = 0; k < recs.size(); ++k) draws[k] = recs[k]->sigma(i, j);
      RecoveryElement el;
      el.row = i;
      el.col = j;
      el.param_row = chain.param_names[i];
      el.param_col = chain.param_names[j];
      el.between = chain.block_labels[i] != chain.block_labels[j];
      el.generating = design.generator.sigma(i, j);
      el.post_mean = mean_of(draws);
      el.lo95 = sample_quantile(draws, 0.025);
      el.hi95 = sample_quantile(draws, 0.975);
      el.covers = el.lo95 <= el.generating && el.generating <= el.hi95;
      el.excludes_zero = el.lo95 > 0.0 || el.hi95 < 0.0;
      out.push_back(std::move(el));
    }
  }
  return out;
}

}  // namespace accjoint
