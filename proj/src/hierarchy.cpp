#include "accjoint/hierarchy.hpp"

#include <cmath>

#include "accjoint/errors.hpp"
#include "accjoint/stats.hpp"

namespace accjoint {

namespace {

double log_multigamma(int dim, double a) {
  double out = 0.25 * dim * (dim - 1) * std::log(M_PI);
  for (int j = 0; j < dim; ++j) out += std::lgamma(a - 0.5 * j);
  return out;
}

// log IW(X; df, S) with mean S/(df - D - 1) convention
double log_inverse_wishart(const Eigen::MatrixXd& x_chol, const Eigen::MatrixXd& x_inv,
                           double df, const Eigen::MatrixXd& scale) {
  const int d = static_cast<int>(scale.rows());
  const Eigen::MatrixXd scale_chol = robust_cholesky(scale);
  double log_det_scale = 0.0, log_det_x = 0.0;
  for (int i = 0; i < d; ++i) {
    log_det_scale += 2.0 * std::log(scale_chol(i, i));
    log_det_x += 2.0 * std::log(x_chol(i, i));
  }
  const double trace = (scale * x_inv).trace();
  return 0.5 * df * log_det_scale - 0.5 * df * d * std::log(2.0) - log_multigamma(d, 0.5 * df) -
         0.5 * (df + d + 1.0) * log_det_x - 0.5 * trace;
}

double log_inverse_gamma(double x, double shape, double rate) {
  if (!(x > 0.0)) throw InvalidInput("inverse-gamma density needs x > 0");
  return shape * std::log(rate) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - rate / x;
}

}  // namespace

GroupState GroupState::init(int dim, double nu, double scale) {
  GroupState gs;
  gs.mu = Eigen::VectorXd::Zero(dim);
  gs.sigma = Eigen::MatrixXd::Identity(dim, dim);
  gs.aux = Eigen::VectorXd::Ones(dim);
  gs.nu = nu;
  gs.aux_scale = Eigen::VectorXd::Constant(dim, scale);
  return gs;
}

Eigen::MatrixXd robust_cholesky(const Eigen::MatrixXd& sigma) {
  if (sigma.rows() != sigma.cols()) throw InvalidInput("covariance must be square");
  Eigen::MatrixXd m = sigma;
  const double jitter = 1e-10 * m.trace() / static_cast<double>(m.rows());
  for (int attempt = 0; attempt <= 3; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    m.diagonal().array() += jitter;
  }
  throw NumericalError("covariance not positive definite after jitter");
}

double mvn_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                       const Eigen::MatrixXd& chol_lower) {
  const int d = static_cast<int>(x.size());
  const Eigen::VectorXd z =
      chol_lower.triangularView<Eigen::Lower>().solve(x - mean);
  double log_det = 0.0;
  for (int i = 0; i < d; ++i) log_det += std::log(chol_lower(i, i));
  return -0.5 * d * kLog2Pi - log_det - 0.5 * z.squaredNorm();
}

double log_density_alpha(const Eigen::VectorXd& alpha, const Eigen::VectorXd& mu,
                         const Eigen::MatrixXd& sigma) {
  return mvn_log_density(alpha, mu, robust_cholesky(sigma));
}

Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& chol_lower,
                           RngStream& rng) {
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return mean + chol_lower * z;
}

Eigen::MatrixXd sample_inverse_wishart(double df, const Eigen::MatrixXd& scale, RngStream& rng) {
  const int d = static_cast<int>(scale.rows());
  if (df <= d - 1) throw InvalidInput("inverse-Wishart needs df > D - 1");
  // W ~ Wishart(df, scale^-1) via Bartlett, returned draw is W^-1. With
  // scale = L L^T and A the Bartlett lower-triangular factor,
  // W^-1 = L (A A^T)^-1 L^T = B^T B for B = A^-1 L^T.
  const Eigen::MatrixXd scale_chol = robust_cholesky(scale);
  Eigen::MatrixXd bartlett = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    bartlett(i, i) = std::sqrt(rng.chi_square(df - i));
    for (int j = 0; j < i; ++j) bartlett(i, j) = rng.normal();
  }
  const Eigen::MatrixXd b = bartlett.triangularView<Eigen::Lower>().solve(
      scale_chol.transpose().eval());
  Eigen::MatrixXd draw = b.transpose() * b;
  draw = 0.5 * (draw + draw.transpose()).eval();
  return draw;
}

double log_prior(const GroupState& gs) {
  const int d = gs.dim();
  // mu ~ N(0, I)
  double out = -0.5 * d * kLog2Pi - 0.5 * gs.mu.squaredNorm();
  // sigma | aux ~ IW(nu + D - 1, 2 nu diag(1/a))
  const Eigen::MatrixXd sigma_chol = robust_cholesky(gs.sigma);
  const Eigen::MatrixXd sigma_inv = sigma_chol.transpose().triangularView<Eigen::Upper>().solve(
      sigma_chol.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(d, d)));
  Eigen::MatrixXd prior_scale = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    if (!(gs.aux[i] > 0.0)) throw InvalidInput("auxiliaries must be positive");
    prior_scale(i, i) = 2.0 * gs.nu / gs.aux[i];
  }
  out += log_inverse_wishart(sigma_chol, sigma_inv, gs.nu + d - 1.0, prior_scale);
  // a_d ~ InvGamma(1/2, 1/A_d^2)
  for (int i = 0; i < d; ++i) {
    out += log_inverse_gamma(gs.aux[i], 0.5, 1.0 / (gs.aux_scale[i] * gs.aux_scale[i]));
  }
  return out;
}

Eigen::VectorXd sample_group_mean(const std::vector<Eigen::VectorXd>& alphas,
                                  const Eigen::MatrixXd& sigma, RngStream& rng) {
  const int d = static_cast<int>(sigma.rows());
  const double n_subj = static_cast<double>(alphas.size());
  const Eigen::MatrixXd sigma_chol = robust_cholesky(sigma);
  const Eigen::MatrixXd sigma_inv = sigma_chol.transpose().triangularView<Eigen::Upper>().solve(
      sigma_chol.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(d, d)));
  const Eigen::MatrixXd post_prec = Eigen::MatrixXd::Identity(d, d) + n_subj * sigma_inv;
  const Eigen::MatrixXd prec_chol = robust_cholesky(post_prec);
  const Eigen::MatrixXd post_cov = prec_chol.transpose().triangularView<Eigen::Upper>().solve(
      prec_chol.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(d, d)));
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  for (const auto& a : alphas) sum += a;
  const Eigen::VectorXd mean = post_cov * (sigma_inv * sum);
  return sample_mvn(mean, robust_cholesky(post_cov), rng);
}

Eigen::MatrixXd sample_group_cov(const std::vector<Eigen::VectorXd>& alphas,
                                 const Eigen::VectorXd& mu, const Eigen::VectorXd& aux, double nu,
                                 RngStream& rng) {
  const int d = static_cast<int>(mu.size());
  Eigen::MatrixXd scale = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    if (!(aux[i] > 0.0)) throw InvalidInput("auxiliaries must be positive");
    scale(i, i) = 2.0 * nu / aux[i];
  }
  for (const auto& a : alphas) {
    const Eigen::VectorXd dev = a - mu;
    scale.noalias() += dev * dev.transpose();
  }
  const double df = nu + d - 1.0 + static_cast<double>(alphas.size());
  return sample_inverse_wishart(df, scale, rng);
}

Eigen::VectorXd sample_aux(const Eigen::MatrixXd& sigma, double nu,
                           const Eigen::VectorXd& aux_scale, RngStream& rng) {
  const int d = static_cast<int>(sigma.rows());
  const Eigen::MatrixXd sigma_chol = robust_cholesky(sigma);
  const Eigen::MatrixXd sigma_inv = sigma_chol.transpose().triangularView<Eigen::Upper>().solve(
      sigma_chol.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(d, d)));
  Eigen::VectorXd out(d);
  const double shape = 0.5 * (nu + d);
  for (int i = 0; i < d; ++i) {
    const double rate = nu * sigma_inv(i, i) + 1.0 / (aux_scale[i] * aux_scale[i]);
    out[i] = rng.inverse_gamma(shape, rate);
  }
  return out;
}

}  // namespace accjoint
