#include "accjoint/lba.hpp"

#include <cmath>
#include <limits>

#include "accjoint/errors.hpp"
#include "accjoint/stats.hpp"

namespace accjoint {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

void AccumulatorParams::validate() const {
  if (!std::isfinite(threshold_gap) || !std::isfinite(start_width) ||
      !std::isfinite(drift_mean) || !std::isfinite(nondecision)) {
    throw InvalidInput("accumulator parameters must be finite");
  }
  if (threshold_gap <= 0.0) throw InvalidInput("threshold_gap must be > 0");
  if (start_width < 0.0) throw InvalidInput("start_width must be >= 0");
  if (drift_sd != 1.0) throw InvalidInput("drift_sd is fixed at 1.0");
  if (nondecision < 0.0) throw InvalidInput("nondecision must be >= 0");
  if (drift_mean <= -8.0) throw InvalidInput("drift_mean/sd must exceed -8 (truncation mass)");
}

AccumKernel AccumKernel::from(const AccumulatorParams& p) {
  AccumKernel k;
  k.cap = p.cap();
  k.start_width = p.start_width;
  k.drift = p.drift_mean;
  k.inv_trunc = 1.0 / norm_cdf(p.drift_mean / p.drift_sd);
  k.nondecision = p.nondecision;
  return k;
}

double AccumKernel::pdf(double t) const {
  if (t <= 0.0) return 0.0;
  if (start_width < kZeroStartWidth) {
    // deterministic start point: finishing time is cap/drift
    const double val = cap / (t * t) * norm_pdf(cap / t - drift) * inv_trunc;
    return val > 0.0 ? val : 0.0;
  }
  const double k1 = (cap - start_width - t * drift) / t;
  const double k2 = (cap - t * drift) / t;
  const double val = (drift * (norm_cdf(k2) - norm_cdf(k1)) + norm_pdf(k1) - norm_pdf(k2)) *
                     inv_trunc / start_width;
  return val > 0.0 ? val : 0.0;
}

double AccumKernel::cdf(double t) const {
  if (t <= 0.0) return 0.0;
  double val;
  if (start_width < kZeroStartWidth) {
    val = norm_cdf(drift - cap / t) * inv_trunc;
  } else {
    const double k1 = (cap - start_width - t * drift) / t;
    const double k2 = (cap - t * drift) / t;
    val = (1.0 + (t / start_width) * (k1 * norm_cdf(k1) - k2 * norm_cdf(k2) + norm_pdf(k1) -
                                      norm_pdf(k2))) *
          inv_trunc;
  }
  if (val < 0.0) return 0.0;
  if (val > 1.0) return 1.0;
  return val;
}

double node_pdf(double t, const AccumulatorParams& p) {
  if (!std::isfinite(t)) throw InvalidInput("node_pdf: t must be finite");
  p.validate();
  return AccumKernel::from(p).pdf(t);
}

double node_cdf(double t, const AccumulatorParams& p) {
  if (!std::isfinite(t)) throw InvalidInput("node_cdf: t must be finite");
  p.validate();
  return AccumKernel::from(p).cdf(t);
}

double defective_log_density(const TrialRecord& trial,
                             const std::vector<AccumulatorParams>& accumulators) {
  if (accumulators.size() < 2) throw InvalidInput("race needs at least two accumulators");
  if (trial.response < 0 || static_cast<std::size_t>(trial.response) >= accumulators.size()) {
    throw InvalidInput("response index out of range for trial");
  }
  const double tau = accumulators.front().nondecision;
  for (const auto& p : accumulators) {
    p.validate();
    if (p.nondecision != tau) throw InvalidInput("accumulators must share non-decision time");
  }
  const double d = trial.rt - tau;
  if (d <= 0.0) return kNegInf;

  double log_dens = 0.0;
  for (std::size_t i = 0; i < accumulators.size(); ++i) {
    const AccumKernel k = AccumKernel::from(accumulators[i]);
    if (static_cast<int>(i) == trial.response) {
      const double f = k.pdf(d);
      if (f <= 0.0) return kNegInf;
      log_dens += std::log(f);
    } else {
      const double surv = -k.cdf(d);  // in [-1, 0]
      if (surv <= -1.0) return kNegInf;
      log_dens += std::log1p(surv);
    }
  }
  return log_dens;
}

std::pair<int, double> simulate_trial(const std::vector<AccumulatorParams>& accumulators,
                                      RngStream& rng) {
  if (accumulators.empty()) throw InvalidInput("simulate_trial: no accumulators");
  const double tau = accumulators.front().nondecision;
  int winner = -1;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < accumulators.size(); ++i) {
    const auto& p = accumulators[i];
    p.validate();
    if (p.nondecision != tau) throw InvalidInput("accumulators must share non-decision time");
    const double start = p.start_width * rng.uniform();
    // positive-truncated drift via inverse CDF: one uniform per draw, exact
    // even when the truncation mass is tiny
    const double below = norm_cdf(-p.drift_mean / p.drift_sd);
    const double u = below + rng.uniform() * (1.0 - below);
    const double drift = p.drift_mean + p.drift_sd * norm_quantile(u);
    const double finish = (p.cap() - start) / drift;
    if (finish < best) {
      best = finish;
      winner = static_cast<int>(i);
    }
  }
  return {winner, tau + best};
}

}  // namespace accjoint
