#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "tempomap/metric.hpp"

namespace tempomap {

inline constexpr double kBetaMax = 1e8;

// K = rows * cols latent points spanning [-1, 1]^2, x varying fastest.
struct LatentGrid {
  Eigen::MatrixXd points;  // K x 2
  int rows = 0;
  int cols = 0;

  Eigen::Index size() const { return points.rows(); }
  // Distance between horizontally or vertically adjacent points (the
  // smaller of the two when both axes have more than one point).
  double spacing() const;
};

LatentGrid build_grid(int rows, int cols);

// Gaussian RBF centres on a regular rows x cols sub-grid of the latent square.
struct BasisSet {
  Eigen::MatrixXd centers;  // M x 2
  double width = 1.0;
  bool includes_bias = true;
  int rows = 0;
  int cols = 0;

  Eigen::Index size() const { return centers.rows(); }
  Eigen::Index columns() const { return centers.rows() + (includes_bias ? 1 : 0); }
};

// Centres on a rows x cols grid; width defaults to `width_factor` times the
// centre spacing (2 for a single centre).
BasisSet make_basis(int rows, int cols, double width_factor = 2.0, bool includes_bias = true);

struct GtmParams {
  Eigen::MatrixXd phi;  // K x M'
  Eigen::MatrixXd W;    // M' x D
  double beta = 1.0;
};

// Phi(k, m) = exp(-||w_k - c_m||^2 / (2 width^2)), plus a trailing column of
// ones when the basis carries a bias.
Eigen::MatrixXd compute_phi(const LatentGrid& grid, const BasisSet& basis);

// Y = Phi W, one prototype per row.
Eigen::MatrixXd map_prototypes(const GtmParams& params);

// ln N(x | y_k, beta) with the metric distance in place of ||x - y_k||^2.
double emission_logpdf(const Eigen::Ref<const Eigen::VectorXd>& x,
                       const Eigen::Ref<const Eigen::VectorXd>& y_k, double beta,
                       const MetricParams& metric);

// N x K matrix of emission log-densities for the rows of X against the rows
// of Y.
Eigen::MatrixXd log_emissions(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, double beta,
                              const MetricParams& metric);

// N x K squared metric distances between the rows of X and Y.
Eigen::MatrixXd metric_distances(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                                 const MetricParams& metric);

// Posterior over latent points under equal priors 1/K. Rows sum to one.
Eigen::MatrixXd gtm_responsibilities(const Eigen::MatrixXd& X, const GtmParams& params,
                                     const MetricParams& metric);

// Mixture log-likelihood sum_n ln (1/K) sum_k p(x_n | k).
double gtm_loglik(const Eigen::MatrixXd& X, const GtmParams& params, const MetricParams& metric);

// Solves Phi^T G Phi W = Phi^T R^T X with G = diag(column sums of R), where
// R is N x K. A ridge of 1e-8 trace/M' stabilizes the factorization and
// iterative refinement removes its bias.
Eigen::MatrixXd solve_weights(const Eigen::MatrixXd& phi, const Eigen::MatrixXd& R,
                              const Eigen::MatrixXd& X);

// Responsibility-weighted sum of squared metric distances between prototypes
// and data points.
double weighted_residual(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& R, const Eigen::MatrixXd& X,
                         const MetricParams& metric);

// beta from the residual sum over `points` observations of dimension `dims`.
// Capped at kBetaMax.
double beta_from_residual(double residual, double points, double dims);

// 1/beta = (1/ND) sum_{k,n} r_nk d(Phi_k W_new, x_n).
double update_beta(const Eigen::MatrixXd& phi, const Eigen::MatrixXd& W_new, const Eigen::MatrixXd& R,
                   const Eigen::MatrixXd& X, const MetricParams& metric);

// Prototypes on the plane of the two leading principal components, scaled by
// their standard deviations. Falls back to small random weights when the
// data has rank < 2.
GtmParams init_from_pca(const Eigen::MatrixXd& X_flat, const LatentGrid& grid, const BasisSet& basis,
                        std::uint64_t seed = 0);

}  // namespace tempomap
