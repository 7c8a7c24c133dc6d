#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "accjoint/errors.hpp"
#include "accjoint/lba.hpp"
#include "accjoint/rng.hpp"
#include "accjoint/stats.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace accjoint;
using testutil::integrate;
using testutil::ks_distance;

namespace {

AccumulatorParams make(double gap, double width, double drift, double tau = 0.0) {
  AccumulatorParams p;
  p.threshold_gap = gap;
  p.start_width = width;
  p.drift_mean = drift;
  p.nondecision = tau;
  return p;
}

double defective_pdf(double t, const std::vector<AccumulatorParams>& accs, int choice) {
  double v = node_pdf(t, accs[static_cast<std::size_t>(choice)]);
  for (std::size_t k = 0; k < accs.size(); ++k)
    if (static_cast<int>(k) != choice) v *= 1.0 - node_cdf(t, accs[k]);
  return v;
}

// Total finishing-time mass. Near-zero truncated drifts put a ~1/t^2 density
// tail on the finishing time, so the far tail is integrated in log time.
double total_mass(const AccumulatorParams& p) {
  const double head = integrate([&](double t) { return node_pdf(t, p); }, 0.0, 50.0, 1e-9);
  const double tail = integrate(
      [&](double x) {
        const double t = std::exp(x);
        return node_pdf(t, p) * t;
      },
      std::log(50.0), std::log(1e7), 1e-9);
  return head + tail;
}

}  // namespace

TEST_CASE("deterministic-start density and CDF match hand-computed values") {
  // gap 1, width 0 -> threshold 1; drift 2; t = 0.5:
  //   pdf = (1/t^2) phi(1/t - 2) / Phi(2), cdf = Phi(2 - 1/t) / Phi(2)
  const AccumulatorParams p = make(1.0, 0.0, 2.0);
  CHECK(node_pdf(0.5, p) == doctest::Approx(1.632918226724295).epsilon(1e-12));
  CHECK(node_cdf(0.5, p) == doctest::Approx(0.5116398746584291).epsilon(1e-12));
}

TEST_CASE("general density and CDF match hand-computed values") {
  // gap 1, width 0.5 -> threshold 1.5; drift 2; t = 0.6
  const AccumulatorParams p = make(1.0, 0.5, 2.0);
  CHECK(node_pdf(0.6, p) == doctest::Approx(1.369885358895128).epsilon(1e-12));
  CHECK(node_cdf(0.6, p) == doctest::Approx(0.4786160464874239).epsilon(1e-12));
}

TEST_CASE("race log-density matches hand-computed winner x survivor product") {
  const TrialRecord trial{"s", "t", "c", 0, 0.8};
  const std::vector<AccumulatorParams> accs = {make(1.0, 0.5, 2.5, 0.2),
                                               make(1.2, 0.5, 1.0, 0.2)};
  CHECK(defective_log_density(trial, accs) ==
        doctest::Approx(0.1273132279685665).epsilon(1e-12));
}

TEST_CASE("nonpositive decision time yields zero density and -inf log density") {
  const AccumulatorParams p = make(1.0, 0.5, 2.0);
  CHECK(node_pdf(0.0, p) == 0.0);
  CHECK(node_pdf(-1.0, p) == 0.0);
  CHECK(node_cdf(0.0, p) == 0.0);
  const TrialRecord at_tau{"s", "t", "c", 0, 0.2};
  const TrialRecord before_tau{"s", "t", "c", 0, 0.1};
  const std::vector<AccumulatorParams> accs = {make(1.0, 0.5, 2.0, 0.2),
                                               make(1.0, 0.5, 1.0, 0.2)};
  CHECK(defective_log_density(at_tau, accs) == -INFINITY);
  CHECK(defective_log_density(before_tau, accs) == -INFINITY);
}

TEST_CASE("parameter validation rejects bad values, never silently") {
  AccumulatorParams p = make(1.0, 0.5, 2.0);
  CHECK_THROWS_AS(node_pdf(NAN, p), InvalidInput);
  p.threshold_gap = 0.0;
  CHECK_THROWS_AS(node_pdf(0.5, p), InvalidInput);
  p = make(1.0, -0.1, 2.0);
  CHECK_THROWS_AS(node_pdf(0.5, p), InvalidInput);
  p = make(1.0, 0.5, 2.0, -0.2);
  CHECK_THROWS_AS(node_cdf(0.5, p), InvalidInput);
  p = make(1.0, 0.5, 2.0);
  p.drift_sd = 2.0;
  CHECK_THROWS_AS(node_pdf(0.5, p), InvalidInput);
}

TEST_CASE("density integrates to one for single accumulators") {
  for (const auto& p : {make(1.3, 0.7, 3.1), make(0.8, 0.2, 1.2), make(2.0, 1.3, 2.0)}) {
    // mass beyond the 1e7 cutoff is below c*phi(0)/(Z*1e7) ~ 1e-7
    CHECK(total_mass(p) == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("density is the derivative of the CDF") {
  const AccumulatorParams p = make(1.1, 0.6, 2.4);
  for (double t : {0.2, 0.4, 0.7, 1.1, 2.0}) {
    const double h = 1e-6;
    const double num = (node_cdf(t + h, p) - node_cdf(t - h, p)) / (2.0 * h);
    CHECK(node_pdf(t, p) == doctest::Approx(num).epsilon(1e-5));
  }
}

TEST_CASE("CDF is monotone, 0 at 0, and reaches 1 in the far tail") {
  const AccumulatorParams p = make(1.5, 0.9, 1.8);
  double prev = node_cdf(0.0, p);
  CHECK(prev == 0.0);
  for (double t = 0.01; t < 20.0; t += 0.01) {
    const double cur = node_cdf(t, p);
    CHECK(cur >= prev - 1e-12);
    prev = cur;
  }
  // survival decays like c*phi(0)/(Z*t): ~2e-8 left at t = 1e8
  CHECK(node_cdf(1e8, p) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("narrow start-point width converges to the deterministic-start form") {
  RngStream rng(11);
  for (int i = 0; i < 20; ++i) {
    const double gap = 0.5 + 2.0 * rng.uniform();
    const double v = 0.8 + 2.5 * rng.uniform();
    const double t = 0.2 + 1.5 * rng.uniform();
    const AccumulatorParams wide = make(gap, 1e-6, v);
    const AccumulatorParams zero = make(gap, 0.0, v);
    CHECK(std::abs(node_pdf(t, wide) - node_pdf(t, zero)) < 1e-5);
    CHECK(std::abs(node_cdf(t, wide) - node_cdf(t, zero)) < 1e-5);
  }
}

TEST_CASE("race densities over all choices integrate to one") {
  RngStream rng(17);
  for (int rep = 0; rep < 5; ++rep) {
    const std::vector<AccumulatorParams> accs = {
        make(0.5 + 2.0 * rng.uniform(), 0.2 + 1.0 * rng.uniform(), 0.8 + 2.5 * rng.uniform()),
        make(0.5 + 2.0 * rng.uniform(), 0.2 + 1.0 * rng.uniform(), 0.8 + 2.5 * rng.uniform())};
    double total = 0.0;
    for (int c = 0; c < 2; ++c) {
      total += integrate([&](double t) { return defective_pdf(t, accs, c); }, 0.0, 50.0, 1e-9);
      total += integrate(
          [&](double x) {
            const double t = std::exp(x);
            return defective_pdf(t, accs, c) * t;
          },
          std::log(50.0), std::log(2e4), 1e-9);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("simulated races match analytic choice probabilities and time CDF") {
  const std::vector<AccumulatorParams> accs = {make(1.3, 0.7, 3.1, 0.1),
                                               make(1.3, 0.7, 1.5, 0.1)};
  const int n = 200000;
  RngStream rng(23);
  std::vector<double> rts;
  rts.reserve(static_cast<std::size_t>(n));
  int wins0 = 0;
  for (int i = 0; i < n; ++i) {
    const auto [choice, rt] = simulate_trial(accs, rng);
    if (choice == 0) ++wins0;
    rts.push_back(rt);
  }
  const double p0 =
      integrate([&](double t) { return defective_pdf(t, accs, 0); }, 0.0, 60.0, 1e-9);
  const double se = std::sqrt(p0 * (1.0 - p0) / n);
  CHECK(std::abs(static_cast<double>(wins0) / n - p0) < 4.0 * se);

  // pooled response-time law: P(first finisher <= t) = 1 - prod_k (1 - F_k)
  const auto pooled = [&](double rt) {
    double surv = 1.0;
    for (const auto& a : accs) surv *= 1.0 - node_cdf(rt - a.nondecision, a);
    return 1.0 - surv;
  };
  CHECK(ks_distance(rts, pooled) < 0.005);
}

TEST_CASE("start-point width shifts mass without breaking normalization") {
  // same gap, widths from tiny to wider than the gap
  for (double width : {1e-7, 0.01, 0.4, 1.2}) {
    const AccumulatorParams p = make(0.9, width, 2.2);
    CHECK(total_mass(p) == doctest::Approx(1.0).epsilon(1e-5));
  }
}
