#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "accjoint/rng.hpp"

namespace accjoint {

// One linear ballistic accumulator. The threshold is stored as the gap above
// the start-point range: the absolute threshold is cap() = start_width +
// threshold_gap, so cap > start_width holds for any positive gap. Drift rates
// are normal with unit SD, truncated to positive values; each accumulator's
// finishing-time distribution is renormalized by its own truncation mass.
struct AccumulatorParams {
  double threshold_gap = 1.0;  // evidence units above the start-point range
  double start_width = 0.0;    // width of the uniform start-point interval
  double drift_mean = 1.0;     // mean accumulation rate, evidence units/s
  double drift_sd = 1.0;       // fixed at 1 (scaling constraint)
  double nondecision = 0.0;    // seconds outside the race

  double cap() const { return start_width + threshold_gap; }
  void validate() const;  // throws InvalidInput
};

// One observed decision.
struct TrialRecord {
  std::string subject;
  std::string task;
  std::string cell;
  int response = 0;  // 0-based accumulator index
  double rt = 0.0;   // seconds
};

// Below this start-point width the general density is 0/0 and the
// deterministic-start limit form is used instead.
inline constexpr double kZeroStartWidth = 1e-6;

// First-passage density of a single accumulator at decision time t (seconds
// after non-decision time). Returns 0 for t <= 0.
double node_pdf(double t, const AccumulatorParams& p);

// Companion CDF; 0 at t = 0, tends to 1 (truncated-positive drift makes the
// finishing time proper).
double node_cdf(double t, const AccumulatorParams& p);

// Log joint density of (choice, rt) for one trial: winner density times the
// survival of every loser, evaluated at d = rt - nondecision. Returns -inf
// when d <= 0 or the winner density vanishes. All accumulators must share
// one non-decision time.
double defective_log_density(const TrialRecord& trial,
                             const std::vector<AccumulatorParams>& accumulators);

// Simulate one race: start ~ U(0, start_width), drift ~ N(mean, sd) truncated
// positive, finishing time (cap - start)/drift; the earliest accumulator wins.
std::pair<int, double> simulate_trial(const std::vector<AccumulatorParams>& accumulators,
                                      RngStream& rng);

// ---- internals shared with the sampler hot path ----

// Per-accumulator constants reused across many trials in one design cell.
struct AccumKernel {
  double cap = 0.0;
  double start_width = 0.0;
  double drift = 0.0;
  double inv_trunc = 1.0;  // 1 / Phi(v/s), per-accumulator truncation mass
  double nondecision = 0.0;

  static AccumKernel from(const AccumulatorParams& p);
  double pdf(double t) const;   // decision-time density, 0 for t <= 0
  double cdf(double t) const;   // clamped to [0,1]
};

}  // namespace accjoint
