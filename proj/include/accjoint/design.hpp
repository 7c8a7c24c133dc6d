#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "accjoint/lba.hpp"

namespace accjoint {

// A parameter slot in the design: either the name of an entry of the
// subject's log-scale vector (exponentiated on resolve) or a fixed
// natural-scale constant.
using ParamSlot = std::variant<std::string, double>;

struct AccumDef {
  ParamSlot threshold_gap;
  ParamSlot start_width;
  ParamSlot drift_mean;
  ParamSlot nondecision;
  bool correct = false;  // tags the accumulator matching the stimulus
};

struct CellDef {
  std::vector<AccumDef> accumulators;
};

struct TaskDef {
  std::string name;
  std::vector<std::string> params;  // names owned by this task
  std::map<std::string, CellDef> cells;
};

// Declarative mapping from (task, cell, accumulator) to named parameters.
// vector_order fixes the global layout of the per-subject vector.
class ModelSpec {
public:
  std::vector<TaskDef> tasks;
  std::vector<std::string> vector_order;

  static ModelSpec from_json(const nlohmann::json& j);
  static ModelSpec load(const std::string& path);
  nlohmann::json to_json() const;

  // Structural checks: unique vector_order, every referenced name present,
  // every name owned by exactly one task. Throws ConfigError.
  void check() const;

  int dim() const { return static_cast<int>(vector_order.size()); }
  int index_of(const std::string& name) const;  // -1 if absent
  const TaskDef* find_task(const std::string& name) const;
  const CellDef* find_cell(const std::string& task, const std::string& cell) const;

  // Task label for each vector_order coordinate (covariance block structure).
  std::vector<std::string> block_labels() const;

private:
  mutable std::unordered_map<std::string, int> index_cache_;
};

// One subject's log-scale random-effects vector.
struct SubjectEffects {
  std::string subject_id;
  Eigen::VectorXd alpha;
};

// Natural-scale accumulator list for one (task, cell) under a subject's
// effects: named slots are exp(alpha[name]), constants pass through.
std::vector<AccumulatorParams> resolve(const ModelSpec& spec, const std::string& task,
                                       const std::string& cell, const SubjectEffects& effects);

struct CellCoverage {
  std::string task;
  std::string cell;
  long trial_count = 0;
  bool mapped = false;
};

struct ValidationReport {
  bool ok = true;
  std::vector<CellCoverage> cells;          // every (task, cell) observed in data
  std::vector<std::string> unmapped_cells;  // "task/cell" strings
  std::vector<std::string> unused_params;
  std::vector<std::string> problems;  // human-readable failures (bad response index etc.)
};

ValidationReport validate_spec(const ModelSpec& spec, const std::vector<TrialRecord>& data);

// ---- compiled evaluation path used by the sampler ----

struct ParamRef {
  int index = -1;      // position in alpha, or -1 for a fixed constant
  double fixed = 0.0;  // natural-scale value when index < 0
};

struct CompiledAccum {
  ParamRef threshold_gap, start_width, drift_mean, nondecision;
};

struct CompiledCell {
  std::string task;
  std::string cell;
  std::vector<CompiledAccum> accumulators;
  int correct_index = -1;
};

// Design flattened to integer indices so likelihood evaluation does no string
// lookups. Cell order is deterministic (task order, then cell name).
class CompiledDesign {
public:
  explicit CompiledDesign(const ModelSpec& spec);
  const std::vector<CompiledCell>& cells() const { return cells_; }
  int cell_index(const std::string& task, const std::string& cell) const;  // -1 if absent

private:
  std::vector<CompiledCell> cells_;
  std::map<std::pair<std::string, std::string>, int> by_name_;
};

// One subject's trials grouped by compiled cell.
struct SubjectData {
  std::string subject_id;
  std::vector<std::vector<std::pair<int, double>>> per_cell;  // (response, rt)
  long trial_count = 0;

  static SubjectData build(const std::string& subject_id, const std::vector<TrialRecord>& trials,
                           const CompiledDesign& design);
};

// Log-likelihood of one subject's data at log-scale vector alpha. Returns
// -inf when any trial has zero density.
double compiled_log_likelihood(const Eigen::VectorXd& alpha, const CompiledDesign& design,
                               const SubjectData& data);

// Convenience form matching the declarative types; equals the sum of
// defective_log_density over trials.
double subject_log_likelihood(const std::vector<TrialRecord>& trials,
                              const SubjectEffects& effects, const ModelSpec& spec);

}  // namespace accjoint
