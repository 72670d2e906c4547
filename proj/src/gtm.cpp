#include "tempomap/gtm.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "tempomap/errors.hpp"
#include "tempomap/rng.hpp"

namespace tempomap {
namespace {

Eigen::VectorXd axis(int n) {
  if (n == 1) return Eigen::VectorXd::Zero(1);
  return Eigen::VectorXd::LinSpaced(n, -1.0, 1.0);
}

Eigen::MatrixXd lattice(int rows, int cols) {
  const Eigen::VectorXd xs = axis(cols);
  const Eigen::VectorXd ys = axis(rows);
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(rows) * cols, 2);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      pts(r * cols + c, 0) = xs(c);
      pts(r * cols + c, 1) = ys(r);
    }
  }
  return pts;
}

double lattice_spacing(int rows, int cols) {
  double s = std::numeric_limits<double>::infinity();
  if (cols > 1) s = std::min(s, 2.0 / (cols - 1));
  if (rows > 1) s = std::min(s, 2.0 / (rows - 1));
  return s;
}

}  // namespace

double LatentGrid::spacing() const { return lattice_spacing(rows, cols); }

LatentGrid build_grid(int rows, int cols) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("build_grid: rows and cols must be >= 1");
  if (rows * cols < 2) throw std::invalid_argument("build_grid: need at least 2 latent points");
  return {lattice(rows, cols), rows, cols};
}

BasisSet make_basis(int rows, int cols, double width_factor, bool includes_bias) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("make_basis: rows and cols must be >= 1");
  if (!(width_factor > 0.0)) throw std::invalid_argument("make_basis: width factor must be positive");
  BasisSet b;
  b.rows = rows;
  b.cols = cols;
  b.centers = lattice(rows, cols);
  const double s = lattice_spacing(rows, cols);
  b.width = width_factor * (std::isfinite(s) ? s : 1.0);
  b.includes_bias = includes_bias;
  return b;
}

Eigen::MatrixXd compute_phi(const LatentGrid& grid, const BasisSet& basis) {
  if (!(basis.width > 0.0)) throw std::invalid_argument("compute_phi: basis width must be positive");
  const auto k = grid.size();
  const auto m = basis.size();
  Eigen::MatrixXd phi(k, basis.columns());
  const double denom = 2.0 * basis.width * basis.width;
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      phi(i, j) = std::exp(-(grid.points.row(i) - basis.centers.row(j)).squaredNorm() / denom);
    }
  }
  if (basis.includes_bias) phi.col(m).setOnes();
  return phi;
}

Eigen::MatrixXd map_prototypes(const GtmParams& params) {
  if (params.phi.cols() != params.W.rows()) {
    throw std::invalid_argument("map_prototypes: Phi has " + std::to_string(params.phi.cols()) +
                                " columns but W has " + std::to_string(params.W.rows()) + " rows");
  }
  return params.phi * params.W;
}

double emission_logpdf(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y_k,
                       double beta, const MetricParams& metric) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw std::invalid_argument("emission_logpdf: beta must be positive");
  if (!x.allFinite() || !y_k.allFinite()) throw NumericalError("emission_logpdf: non-finite input");
  const double d = static_cast<double>(x.size());
  return 0.5 * d * std::log(beta / (2.0 * std::numbers::pi)) - 0.5 * beta * metric.distance(x, y_k);
}

Eigen::MatrixXd metric_distances(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const MetricParams& metric) {
  if (X.cols() != Y.cols() || X.cols() != metric.dims()) {
    throw std::invalid_argument("metric_distances: dimension mismatch");
  }
  const Eigen::MatrixXd zx = metric.project(X);
  const Eigen::MatrixXd zy = metric.project(Y);
  Eigen::MatrixXd out(X.rows(), Y.rows());
  for (Eigen::Index n = 0; n < X.rows(); ++n) {
    for (Eigen::Index k = 0; k < Y.rows(); ++k) {
      out(n, k) = (zx.row(n) - zy.row(k)).squaredNorm();
    }
  }
  return out;
}

Eigen::MatrixXd log_emissions(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, double beta,
                              const MetricParams& metric) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw std::invalid_argument("log_emissions: beta must be positive");
  if (!X.allFinite() || !Y.allFinite()) throw NumericalError("log_emissions: non-finite input");
  const double d = static_cast<double>(X.cols());
  const double norm = 0.5 * d * std::log(beta / (2.0 * std::numbers::pi));
  return (norm - 0.5 * beta * metric_distances(X, Y, metric).array()).matrix();
}

namespace {

// Row-wise log-sum-exp.
Eigen::VectorXd row_logsumexp(const Eigen::MatrixXd& L) {
  const Eigen::VectorXd mx = L.rowwise().maxCoeff();
  return mx.array() + (L.colwise() - mx).array().exp().rowwise().sum().log();
}

}  // namespace

Eigen::MatrixXd gtm_responsibilities(const Eigen::MatrixXd& X, const GtmParams& params,
                                     const MetricParams& metric) {
  const Eigen::MatrixXd L = log_emissions(X, map_prototypes(params), params.beta, metric);
  const Eigen::VectorXd mx = L.rowwise().maxCoeff();
  Eigen::MatrixXd R = (L.colwise() - mx).array().exp().matrix();
  const Eigen::VectorXd s = R.rowwise().sum();
  return s.cwiseInverse().asDiagonal() * R;
}

double gtm_loglik(const Eigen::MatrixXd& X, const GtmParams& params, const MetricParams& metric) {
  const Eigen::MatrixXd L = log_emissions(X, map_prototypes(params), params.beta, metric);
  return row_logsumexp(L).sum() - static_cast<double>(X.rows()) * std::log(static_cast<double>(L.cols()));
}

Eigen::MatrixXd solve_weights(const Eigen::MatrixXd& phi, const Eigen::MatrixXd& R, const Eigen::MatrixXd& X) {
  if (R.cols() != phi.rows() || R.rows() != X.rows()) {
    throw std::invalid_argument("solve_weights: shape mismatch between Phi, R and X");
  }
  const Eigen::VectorXd g = R.colwise().sum().transpose();
  const Eigen::MatrixXd A = phi.transpose() * g.asDiagonal() * phi;
  const Eigen::MatrixXd B = phi.transpose() * (R.transpose() * X);
  const double ridge = 1e-8 * A.trace() / static_cast<double>(A.rows());

  Eigen::MatrixXd jittered = A;
  jittered.diagonal().array() += ridge;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(jittered);
  if (ldlt.info() != Eigen::Success || !(ridge > 0.0)) {
    throw NumericalError("solve_weights: singular system");
  }
  Eigen::MatrixXd W = ldlt.solve(B);
  for (int it = 0; it < 3; ++it) {
    W += ldlt.solve(B - A * W);
  }
  if (!W.allFinite()) throw NumericalError("solve_weights: non-finite solution");
  return W;
}

double weighted_residual(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& R, const Eigen::MatrixXd& X,
                         const MetricParams& metric) {
  return R.cwiseProduct(metric_distances(X, Y, metric)).sum();
}

double beta_from_residual(double residual, double points, double dims) {
  if (!(residual > 0.0)) return kBetaMax;
  const double beta = points * dims / residual;
  if (!std::isfinite(beta) || beta > kBetaMax) return kBetaMax;
  return beta;
}

double update_beta(const Eigen::MatrixXd& phi, const Eigen::MatrixXd& W_new, const Eigen::MatrixXd& R,
                   const Eigen::MatrixXd& X, const MetricParams& metric) {
  const Eigen::MatrixXd Y = phi * W_new;
  return beta_from_residual(weighted_residual(Y, R, X, metric), static_cast<double>(X.rows()),
                            static_cast<double>(X.cols()));
}

GtmParams init_from_pca(const Eigen::MatrixXd& X_flat, const LatentGrid& grid, const BasisSet& basis,
                        std::uint64_t seed) {
  if (X_flat.rows() < 2) throw std::invalid_argument("init_from_pca: need at least 2 observations");
  GtmParams params;
  params.phi = compute_phi(grid, basis);
  const auto d = X_flat.cols();
  const double n = static_cast<double>(X_flat.rows());

  const Eigen::RowVectorXd mu = X_flat.colwise().mean();
  const Eigen::MatrixXd C = X_flat.rowwise() - mu;
  const Eigen::MatrixXd cov = (C.transpose() * C) / n;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  // Eigenvalues ascend.
  const Eigen::VectorXd ev = eig.eigenvalues().cwiseMax(0.0);
  const double ev1 = ev(d - 1);
  const double ev2 = d >= 2 ? ev(d - 2) : 0.0;
  const double ev3 = d >= 3 ? ev(d - 3) : 0.0;

  if (!(ev1 > 0.0) || !(ev2 > 1e-12 * ev1)) {
    Rng rng(seed);
    params.W.resize(params.phi.cols(), d);
    for (Eigen::Index i = 0; i < params.W.size(); ++i) params.W.data()[i] = 1e-2 * rng.normal();
    if (basis.includes_bias) params.W.row(params.W.rows() - 1) = mu;
    const double var = cov.trace() / static_cast<double>(d);
    params.beta = beta_from_residual(var, 1.0, 1.0);
    return params;
  }

  Eigen::MatrixXd plane(2, d);
  plane.row(0) = std::sqrt(ev1) * eig.eigenvectors().col(d - 1).transpose();
  plane.row(1) = std::sqrt(ev2) * eig.eigenvectors().col(d - 2).transpose();
  const Eigen::MatrixXd target = (grid.points * plane).rowwise() + mu;
  params.W = params.phi.colPivHouseholderQr().solve(target);

  const Eigen::MatrixXd Y = params.phi * params.W;
  double nearest_sum = 0.0;
  for (Eigen::Index k = 0; k < Y.rows(); ++k) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < Y.rows(); ++j) {
      if (j != k) best = std::min(best, (Y.row(k) - Y.row(j)).squaredNorm());
    }
    nearest_sum += best;
  }
  const double half_nearest = 0.5 * nearest_sum / static_cast<double>(Y.rows());
  params.beta = beta_from_residual(std::max(ev3, half_nearest), 1.0, 1.0);
  return params;
}

}  // namespace tempomap
