#pragma once

#include <span>
#include <string>

#include <Eigen/Dense>

namespace tempomap {

enum class MetricKind { diagonal, full };

std::string to_string(MetricKind kind);
MetricKind metric_kind_from_string(const std::string& s);

// Global adaptive metric. Diagonal: d(x, t) = sum_d lambda_d^2 (x_d - t_d)^2
// with ||lambda|| = 1 and lambda >= 0. Full: d(x, t) = (x-t)^T Omega^T Omega (x-t)
// with trace(Omega^T Omega) = 1.
struct MetricParams {
  MetricKind kind = MetricKind::diagonal;
  Eigen::VectorXd lambda;
  Eigen::MatrixXd omega;

  // lambda = 1/sqrt(D) everywhere, or Omega = I/sqrt(D).
  static MetricParams uniform(Eigen::Index d, MetricKind kind = MetricKind::diagonal);

  Eigen::Index dims() const;
  // ||lambda|| or trace(Omega^T Omega).
  double constraint_value() const;
  bool constraint_satisfied(double tol = 1e-12) const;
  // Rescales onto the constraint surface. Throws std::domain_error for the
  // zero metric.
  void normalize();

  double distance(const Eigen::Ref<const Eigen::VectorXd>& a,
                  const Eigen::Ref<const Eigen::VectorXd>& b) const;
  // Maps each row r to z with d(r, r') = ||z - z'||^2.
  Eigen::MatrixXd project(const Eigen::MatrixXd& rows) const;
  // lambda, or sqrt(diag(Omega^T Omega)) for the full metric. Unit norm.
  Eigen::VectorXd relevance() const;
};

// Metric applied to per-dimension time-domain distances d^t:
// diagonal sum_i lambda_i^2 v_i^2, full v^T Omega^T Omega v.
double weighted_distance(const Eigen::Ref<const Eigen::VectorXd>& per_dim, const MetricParams& metric);

// Functional L^p norm of the difference series w = u - v for sampling period
// tau, with zero padding at both ends. Sign changes between neighbours shrink
// the triangle areas A_k, B_k.
double func_norm(std::span<const double> w, double tau, int p);
double func_distance(std::span<const double> u, std::span<const double> v, double tau, int p);

enum class TimeDistanceKind { functional, euclidean };

struct TimeDistance {
  TimeDistanceKind kind = TimeDistanceKind::functional;
  double tau = 1.0;
  int p = 2;
};

// One d^t value per feature column, comparing the time courses of x and x_hat.
Eigen::VectorXd per_dimension_distances(const Eigen::MatrixXd& x, const Eigen::MatrixXd& x_hat,
                                        const TimeDistance& dist);

double sigmoid(double x);
// sgd((d+ - d-)/(d+ + d-)); 0.5 when both distances vanish.
double grgtm_cost(double d_plus, double d_minus);

struct MetricGradient {
  MetricKind kind = MetricKind::diagonal;
  // D x 1 for diagonal, D x D for full.
  Eigen::MatrixXd values;
  double cost = 0.5;
  double d_plus = 0.0;
  double d_minus = 0.0;
};

// dE/dTheta for one sequence given the per-dimension distances to the
// correct-class (plus) and closest wrong-class (minus) reconstructions.
// The two contributions share the global metric and are summed.
MetricGradient metric_gradient(const Eigen::VectorXd& dt_plus, const Eigen::VectorXd& dt_minus,
                               const MetricParams& metric);

MetricGradient metric_gradient(const Eigen::MatrixXd& x, const Eigen::MatrixXd& recon_plus,
                               const Eigen::MatrixXd& recon_minus, const MetricParams& metric,
                               const TimeDistance& dist);

// Gradient step of size epsilon, clipping of negative relevances (diagonal)
// and renormalization. A metric that clips to zero is reset to uniform.
MetricParams apply_metric_update(const MetricParams& metric, const Eigen::MatrixXd& avg_gradient,
                                 double epsilon);

// Metric adaptation runs only after `start_epoch` pure EM epochs.
constexpr bool relevance_schedule(int epoch, int start_epoch = 10) { return epoch > start_epoch; }

}  // namespace tempomap
