#pragma once

#include <vector>

#include <Eigen/Dense>

#include "accjoint/rng.hpp"

namespace accjoint {

// Population state of the hierarchical model: log-scale random effects are
// multivariate normal with mean mu and covariance sigma. The covariance prior
// is the inverse-Wishart mixture with inverse-gamma auxiliaries (one per
// coordinate), which gives uniform marginal priors on correlations and
// half-t priors on the standard deviations.
struct GroupState {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  Eigen::VectorXd aux;        // positive mixing auxiliaries a_1..a_D
  double nu = 2.0;            // shape hyperparameter of the covariance prior
  Eigen::VectorXd aux_scale;  // half-t scale per coordinate

  static GroupState init(int dim, double nu = 2.0, double scale = 1.0);
  int dim() const { return static_cast<int>(mu.size()); }
};

// Cholesky factorization with bounded jitter recovery: on failure adds
// 1e-10 * trace/D to the diagonal, at most 3 times, then throws
// NumericalError. Returns the lower factor.
Eigen::MatrixXd robust_cholesky(const Eigen::MatrixXd& sigma);

// MVN log density evaluated through a precomputed lower Cholesky factor.
double mvn_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                       const Eigen::MatrixXd& chol_lower);

// Population log density of one subject's effects vector.
double log_density_alpha(const Eigen::VectorXd& alpha, const Eigen::VectorXd& mu,
                         const Eigen::MatrixXd& sigma);

// MVN draw mean + L z.
Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& chol_lower,
                           RngStream& rng);

// Inverse-Wishart draw with df degrees of freedom and scale matrix; Bartlett
// construction on the inverted scale.
Eigen::MatrixXd sample_inverse_wishart(double df, const Eigen::MatrixXd& scale, RngStream& rng);

// Joint log prior of (mu, sigma, aux): standard normal on mu, conditional
// inverse-Wishart on sigma given aux, inverse-gamma on each auxiliary.
double log_prior(const GroupState& gs);

// Conjugate conditionals of the Gibbs sweep. Each takes an explicit stream
// and returns an exact draw from the stated conditional.
Eigen::VectorXd sample_group_mean(const std::vector<Eigen::VectorXd>& alphas,
                                  const Eigen::MatrixXd& sigma, RngStream& rng);

Eigen::MatrixXd sample_group_cov(const std::vector<Eigen::VectorXd>& alphas,
                                 const Eigen::VectorXd& mu, const Eigen::VectorXd& aux, double nu,
                                 RngStream& rng);

Eigen::VectorXd sample_aux(const Eigen::MatrixXd& sigma, double nu,
                           const Eigen::VectorXd& aux_scale, RngStream& rng);

}  // namespace accjoint
