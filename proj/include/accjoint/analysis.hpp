#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "accjoint/design.hpp"
#include "accjoint/rng.hpp"
#include "accjoint/sampler.hpp"

namespace accjoint {

using BoolGrid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// corr_ij = sigma_ij / sqrt(sigma_ii sigma_jj); unit diagonal set exactly.
Eigen::MatrixXd cov_to_corr(const Eigen::MatrixXd& sigma);

// An entry is flagged reliable when |mean| >= 3 * sd.
BoolGrid reliability_flags(const Eigen::MatrixXd& mean, const Eigen::MatrixXd& sd);

struct CorrelationSummary {
  Eigen::MatrixXd mean;  // element-wise over draw-wise correlation matrices
  Eigen::MatrixXd sd;
  BoolGrid reliable;
  std::vector<std::string> param_names;
  std::vector<std::string> block_labels;
};

// Summary over the sampling-stage draws (sd is 0 with a single draw).
CorrelationSummary correlation_summary(const PosteriorChain& chain);

struct GroupMeanRow {
  std::string param;
  std::string task;
  double mean = 0.0;  // of exp(mu_d) over sampling draws
  double sd = 0.0;
};

std::vector<GroupMeanRow> group_mean_table(const PosteriorChain& chain, const ModelSpec& spec);

struct SubjectPointRow {
  std::string subject;
  std::string param;
  double log_mean = 0.0;      // posterior mean of alpha_d
  double natural_mean = 0.0;  // posterior mean of exp(alpha_d)
};

std::vector<SubjectPointRow> subject_effect_points(const PosteriorChain& chain);

struct PrecisionRow {
  std::string subject;
  std::string param;
  std::string task;
  double sd_joint = 0.0;
  double sd_independent = 0.0;
};

struct PrecisionCompare {
  std::vector<PrecisionRow> rows;
  std::vector<std::string> tasks;
  // 100 * (1 - sd_joint / sd_independent), median over the task's rows.
  std::vector<double> median_reduction_percent;
  double fraction_below_identity = 0.0;  // rows with sd_joint < sd_independent
};

// Per-(subject, parameter) posterior-SD comparison between one joint fit and
// per-task independent fits covering subsets of its coordinates.
PrecisionCompare precision_compare(const PosteriorChain& joint,
                                   const std::vector<PosteriorChain>& independent);

struct PredictiveCellCount {
  std::string subject;
  std::string task;
  std::string cell;
  long n = 0;
};

// Observed trial counts per (subject, task, cell), sorted.
std::vector<PredictiveCellCount> design_from_data(const std::vector<TrialRecord>& data);

struct PredictiveTrialSet {
  std::int64_t draw_iter = 0;  // chain iteration the generating draw came from
  std::vector<TrialRecord> trials;
};

// Simulates the given design once per selected posterior draw (selected
// uniformly at random among sampling-stage records).
std::vector<PredictiveTrialSet> posterior_predictive(const PosteriorChain& chain,
                                                     const ModelSpec& spec,
                                                     const std::vector<PredictiveCellCount>& design,
                                                     int draws, RngStream& rng);

struct CrossTaskDescriptives {
  std::vector<std::string> subjects;  // sorted
  std::vector<std::string> tasks;     // model order
  Eigen::MatrixXd mean_rt;            // subjects x tasks; NaN when no trials
  Eigen::MatrixXd accuracy;           // clamped to [1/(2n), 1 - 1/(2n)]
  Eigen::MatrixXd probit_accuracy;
  Eigen::MatrixXd rt_corr;   // tasks x tasks; NaN when degenerate
  Eigen::MatrixXd acc_corr;
};

// Per-subject mean RT and probit-transformed accuracy per task, with pairwise
// Pearson correlations across subjects. Requires >= 3 subjects with data for
// every task pair.
CrossTaskDescriptives descriptive_cross_task(const std::vector<TrialRecord>& data,
                                             const ModelSpec& spec);

}  // namespace accjoint
