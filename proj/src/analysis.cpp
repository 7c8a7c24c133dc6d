#include "accjoint/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <tuple>

#include "accjoint/errors.hpp"
#include "accjoint/stats.hpp"

namespace accjoint {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<const ChainRecord*> sampling_records(const PosteriorChain& chain) {
  auto recs = chain.records_for(Stage::kSampling);
  if (recs.empty()) throw InvalidInput("chain has no sampling-stage draws");
  return recs;
}

double column_sd(const std::vector<double>& values, double mean) {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(n - 1));
}

}  // namespace

Eigen::MatrixXd cov_to_corr(const Eigen::MatrixXd& sigma) {
  const int d = static_cast<int>(sigma.rows());
  if (sigma.cols() != d) throw InvalidInput("covariance matrix must be square");
  Eigen::VectorXd s(d);
  for (int i = 0; i < d; ++i) {
    const double v = sigma(i, i);
    if (!(v > 0.0) || !std::isfinite(v))
      throw InvalidInput("covariance diagonal must be positive and finite");
    s[i] = std::sqrt(v);
  }
  Eigen::MatrixXd corr(d, d);
  for (int i = 0; i < d; ++i) {
    corr(i, i) = 1.0;
    for (int j = 0; j < i; ++j) {
      const double r = sigma(i, j) / (s[i] * s[j]);
      corr(i, j) = r;
      corr(j, i) = r;
    }
  }
  return corr;
}

BoolGrid reliability_flags(const Eigen::MatrixXd& mean, const Eigen::MatrixXd& sd) {
  if (mean.rows() != sd.rows() || mean.cols() != sd.cols())
    throw InvalidInput("mean/sd shape mismatch");
  return mean.array().abs() >= 3.0 * sd.array();
}

CorrelationSummary correlation_summary(const PosteriorChain& chain) {
  const auto recs = sampling_records(chain);
  const int d = chain.dim();
  const double n = static_cast<double>(recs.size());
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(d, d);
  std::vector<Eigen::MatrixXd> corrs;
  corrs.reserve(recs.size());
  for (const ChainRecord* rec : recs) {
    corrs.push_back(cov_to_corr(rec->sigma));
    mean += corrs.back();
  }
  mean /= n;
  Eigen::MatrixXd sd = Eigen::MatrixXd::Zero(d, d);
  if (recs.size() > 1) {
    for (const auto& c : corrs) sd += (c - mean).cwiseProduct(c - mean);
    sd = (sd / (n - 1.0)).cwiseSqrt();
  }
  CorrelationSummary out;
  out.mean = std::move(mean);
  out.sd = std::move(sd);
  out.reliable = reliability_flags(out.mean, out.sd);
  out.param_names = chain.param_names;
  out.block_labels = chain.block_labels;
  return out;
}

std::vector<GroupMeanRow> group_mean_table(const PosteriorChain& chain, const ModelSpec& spec) {
  if (spec.vector_order != chain.param_names)
    throw InvalidInput("chain parameter order does not match the model");
  const auto recs = sampling_records(chain);
  const auto labels = spec.block_labels();
  std::vector<GroupMeanRow> rows;
  for (int dcoord = 0; dcoord < chain.dim(); ++dcoord) {
    std::vector<double> values;
    values.reserve(recs.size());
    for (const ChainRecord* rec : recs) values.push_back(std::exp(rec->mu[dcoord]));
    GroupMeanRow row;
    row.param = chain.param_names[dcoord];
    row.task = labels[dcoord];
    row.mean = mean_of(values);
    row.sd = column_sd(values, row.mean);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<SubjectPointRow> subject_effect_points(const PosteriorChain& chain) {
  const auto recs = sampling_records(chain);
  const double n = static_cast<double>(recs.size());
  std::vector<SubjectPointRow> rows;
  for (int s = 0; s < chain.n_subjects(); ++s) {
    for (int dcoord = 0; dcoord < chain.dim(); ++dcoord) {
      double log_sum = 0.0, nat_sum = 0.0;
      for (const ChainRecord* rec : recs) {
        const double a = rec->alpha(s, dcoord);
        log_sum += a;
        nat_sum += std::exp(a);
      }
      rows.push_back({chain.subject_ids[s], chain.param_names[dcoord], log_sum / n, nat_sum / n});
    }
  }
  return rows;
}

namespace {

// Posterior SD of one subject-coordinate over the sampling draws.
double alpha_sd(const std::vector<const ChainRecord*>& recs, int subject, int coord) {
  std::vector<double> values;
  values.reserve(recs.size());
  for (const ChainRecord* rec : recs) values.push_back(rec->alpha(subject, coord));
  return column_sd(values, mean_of(values));
}

}  // namespace

PrecisionCompare precision_compare(const PosteriorChain& joint,
                                   const std::vector<PosteriorChain>& independent) {
  const auto joint_recs = sampling_records(joint);
  PrecisionCompare out;
  std::map<std::string, std::vector<double>> per_task_reduction;
  long below = 0;

  for (const PosteriorChain& ind : independent) {
    if (ind.subject_ids != joint.subject_ids)
      throw InvalidInput("independent fit covers a different subject set than the joint fit");
    const auto ind_recs = sampling_records(ind);
    for (int pc = 0; pc < ind.dim(); ++pc) {
      const std::string& param = ind.param_names[pc];
      const auto it =
          std::find(joint.param_names.begin(), joint.param_names.end(), param);
      if (it == joint.param_names.end())
        throw InvalidInput("independent fit parameter '" + param + "' missing from joint fit");
      const int jc = static_cast<int>(it - joint.param_names.begin());
      for (int s = 0; s < joint.n_subjects(); ++s) {
        PrecisionRow row;
        row.subject = joint.subject_ids[s];
        row.param = param;
        row.task = joint.block_labels[jc];
        row.sd_joint = alpha_sd(joint_recs, s, jc);
        row.sd_independent = alpha_sd(ind_recs, s, pc);
        const double reduction =
            row.sd_independent > 0.0 ? 100.0 * (1.0 - row.sd_joint / row.sd_independent) : 0.0;
        per_task_reduction[row.task].push_back(reduction);
        if (row.sd_joint < row.sd_independent) ++below;
        out.rows.push_back(std::move(row));
      }
    }
  }
  if (out.rows.empty()) throw InvalidInput("no comparable (subject, parameter) pairs");

  // Task order follows the joint fit's coordinate blocks.
  std::set<std::string> seen;
  for (const auto& label : joint.block_labels) {
    if (per_task_reduction.count(label) && !seen.count(label)) {
      seen.insert(label);
      out.tasks.push_back(label);
      out.median_reduction_percent.push_back(median_of(per_task_reduction[label]));
    }
  }
  out.fraction_below_identity = static_cast<double>(below) / static_cast<double>(out.rows.size());
  return out;
}

std::vector<PredictiveCellCount> design_from_data(const std::vector<TrialRecord>& data) {
  std::map<std::tuple<std::string, std::string, std::string>, long> counts;
  for (const auto& t : data) ++counts[{t.subject, t.task, t.cell}];
  std::vector<PredictiveCellCount> out;
  out.reserve(counts.size());
  for (const auto& [key, n] : counts)
    out.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), n});
  return out;
}

std::vector<PredictiveTrialSet> posterior_predictive(const PosteriorChain& chain,
                                                     const ModelSpec& spec,
                                                     const std::vector<PredictiveCellCount>& design,
                                                     int draws, RngStream& rng) {
  if (draws < 0) throw InvalidInput("predictive draw count must be >= 0");
  std::vector<PredictiveTrialSet> out;
  if (draws == 0) return out;
  const auto recs = sampling_records(chain);

  std::map<std::string, int> subject_index;
  for (int s = 0; s < chain.n_subjects(); ++s) subject_index[chain.subject_ids[s]] = s;
  for (const auto& cc : design) {
    if (!subject_index.count(cc.subject))
      throw InvalidInput("predictive design subject '" + cc.subject + "' not in chain");
    if (cc.n < 0) throw InvalidInput("predictive trial counts must be >= 0");
  }

  out.reserve(draws);
  for (int k = 0; k < draws; ++k) {
    int pick = static_cast<int>(rng.uniform() * static_cast<double>(recs.size()));
    pick = std::min<int>(pick, static_cast<int>(recs.size()) - 1);
    const ChainRecord* rec = recs[pick];
    PredictiveTrialSet set;
    set.draw_iter = rec->iter;
    for (const auto& cc : design) {
      SubjectEffects eff;
      eff.subject_id = cc.subject;
      eff.alpha = rec->alpha.row(subject_index[cc.subject]).transpose();
      const auto accs = resolve(spec, cc.task, cc.cell, eff);
      for (long i = 0; i < cc.n; ++i) {
        const auto [response, rt] = simulate_trial(accs, rng);
        set.trials.push_back({cc.subject, cc.task, cc.cell, response, rt});
      }
    }
    out.push_back(std::move(set));
  }
  return out;
}

CrossTaskDescriptives descriptive_cross_task(const std::vector<TrialRecord>& data,
                                             const ModelSpec& spec) {
  spec.check();
  CrossTaskDescriptives out;
  for (const auto& task : spec.tasks) out.tasks.push_back(task.name);
  const int T = static_cast<int>(out.tasks.size());

  std::set<std::string> subject_set;
  for (const auto& t : data) subject_set.insert(t.subject);
  out.subjects.assign(subject_set.begin(), subject_set.end());
  const int S = static_cast<int>(out.subjects.size());
  std::map<std::string, int> srow;
  for (int s = 0; s < S; ++s) srow[out.subjects[s]] = s;
  std::map<std::string, int> tcol;
  for (int c = 0; c < T; ++c) tcol[out.tasks[c]] = c;

  Eigen::MatrixXd rt_sum = Eigen::MatrixXd::Zero(S, T);
  Eigen::MatrixXd n_trials = Eigen::MatrixXd::Zero(S, T);
  Eigen::MatrixXd n_correct = Eigen::MatrixXd::Zero(S, T);
  for (const auto& trial : data) {
    const auto it = tcol.find(trial.task);
    if (it == tcol.end()) throw InvalidInput("trial references unknown task '" + trial.task + "'");
    const CellDef* cell = spec.find_cell(trial.task, trial.cell);
    if (cell == nullptr)
      throw InvalidInput("trial references unknown cell '" + trial.task + "/" + trial.cell + "'");
    if (trial.response < 0 || trial.response >= static_cast<int>(cell->accumulators.size()))
      throw InvalidInput("trial response index out of range");
    const int s = srow[trial.subject];
    const int c = it->second;
    rt_sum(s, c) += trial.rt;
    n_trials(s, c) += 1.0;
    if (cell->accumulators[trial.response].correct) n_correct(s, c) += 1.0;
  }

  out.mean_rt = Eigen::MatrixXd::Constant(S, T, kNaN);
  out.accuracy = Eigen::MatrixXd::Constant(S, T, kNaN);
  out.probit_accuracy = Eigen::MatrixXd::Constant(S, T, kNaN);
  for (int s = 0; s < S; ++s) {
    for (int c = 0; c < T; ++c) {
      const double n = n_trials(s, c);
      if (n <= 0.0) continue;
      out.mean_rt(s, c) = rt_sum(s, c) / n;
      const double lo = 1.0 / (2.0 * n);
      const double acc = std::clamp(n_correct(s, c) / n, lo, 1.0 - lo);
      out.accuracy(s, c) = acc;
      out.probit_accuracy(s, c) = norm_quantile(acc);
    }
  }

  out.rt_corr = Eigen::MatrixXd::Constant(T, T, kNaN);
  out.acc_corr = Eigen::MatrixXd::Constant(T, T, kNaN);
  for (int a = 0; a < T; ++a) {
    out.rt_corr(a, a) = 1.0;
    out.acc_corr(a, a) = 1.0;
    for (int b = 0; b < a; ++b) {
      std::vector<double> rt_a, rt_b, pa, pb;
      for (int s = 0; s < S; ++s) {
        if (std::isnan(out.mean_rt(s, a)) || std::isnan(out.mean_rt(s, b))) continue;
        rt_a.push_back(out.mean_rt(s, a));
        rt_b.push_back(out.mean_rt(s, b));
        pa.push_back(out.probit_accuracy(s, a));
        pb.push_back(out.probit_accuracy(s, b));
      }
      if (rt_a.size() < 3)
        throw InvalidInput("fewer than 3 subjects with data for task pair '" + out.tasks[a] +
                           "'/'" + out.tasks[b] + "'");
      double r = 0.0;
      if (pearson(rt_a, rt_b, r)) {
        out.rt_corr(a, b) = r;
        out.rt_corr(b, a) = r;
      }
      if (pearson(pa, pb, r)) {
        out.acc_corr(a, b) = r;
        out.acc_corr(b, a) = r;
      }
    }
  }
  return out;
}

}  // namespace accjoint
