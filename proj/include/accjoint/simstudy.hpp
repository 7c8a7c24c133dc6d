#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "accjoint/design.hpp"
#include "accjoint/hierarchy.hpp"
#include "accjoint/sampler.hpp"

namespace accjoint {

// Covariance regime of the generating population:
//   matched      - use the base generator as given
//   zero_between - zero every covariance linking parameters of different tasks
//   uniform_r    - overwrite all correlations with target_r, keeping variances
enum class GeneratorVersion { kMatched, kZeroBetween, kUniformR };

const char* version_name(GeneratorVersion version);
GeneratorVersion version_from_name(const std::string& name);

struct SimDesign {
  int subjects = 2;
  long trials_per_task = 1;
  GroupState generator;
  GeneratorVersion version = GeneratorVersion::kMatched;
  double target_r = 0.8;
  std::uint64_t seed = 1;

  void check() const;  // throws ConfigError
};

// Applies the version's covariance modification and verifies the result is
// positive definite (error reports the smallest eigenvalue otherwise).
GroupState build_generator(GeneratorVersion version, const GroupState& base, double target_r,
                           const std::vector<std::string>& block_labels);

struct PlanEntry {
  std::string task;
  std::string cell;
  long n = 0;
};

// trials_per_task split as evenly as possible over each task's cells
// (earlier cells, in name order, absorb the remainder).
std::vector<PlanEntry> default_cell_plan(const ModelSpec& spec, long trials_per_task);

struct GeneratedData {
  std::vector<std::string> subject_ids;  // sorted
  Eigen::MatrixXd true_alpha;            // subjects x coordinates
  std::vector<TrialRecord> trials;
};

// Draws per-subject effects from the generator and simulates every planned
// cell. Fully determined by (design.seed, spec, plan).
GeneratedData generate_dataset(const SimDesign& design, const ModelSpec& spec,
                               const std::vector<PlanEntry>& cell_plan);

struct RecoveryElement {
  int row = 0, col = 0;  // covariance coordinates, row <= col
  std::string param_row, param_col;
  bool between = false;  // links parameters of different tasks
  double generating = 0.0;
  double post_mean = 0.0;
  double lo95 = 0.0, hi95 = 0.0;  // equal-tailed quantile interval
  bool covers = false;
  bool excludes_zero = false;
};

// One row per upper-triangle covariance element, scored against the
// generating value over the chain's sampling draws.
std::vector<RecoveryElement> score_recovery(const PosteriorChain& chain, const SimDesign& design);

}  // namespace accjoint
