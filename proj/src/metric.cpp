#include "tempomap/metric.hpp"

#include <cmath>
#include <stdexcept>

#include "tempomap/errors.hpp"

namespace tempomap {

std::string to_string(MetricKind kind) { return kind == MetricKind::diagonal ? "diagonal" : "full"; }

MetricKind metric_kind_from_string(const std::string& s) {
  if (s == "diagonal") return MetricKind::diagonal;
  if (s == "full") return MetricKind::full;
  throw std::invalid_argument("unknown metric kind '" + s + "' (expected diagonal|full)");
}

MetricParams MetricParams::uniform(Eigen::Index d, MetricKind kind) {
  if (d < 1) throw std::invalid_argument("metric dimension must be >= 1");
  MetricParams m;
  m.kind = kind;
  const double w = 1.0 / std::sqrt(static_cast<double>(d));
  if (kind == MetricKind::diagonal) {
    m.lambda = Eigen::VectorXd::Constant(d, w);
  } else {
    m.omega = Eigen::MatrixXd::Identity(d, d) * w;
  }
  return m;
}

Eigen::Index MetricParams::dims() const {
  return kind == MetricKind::diagonal ? lambda.size() : omega.cols();
}

double MetricParams::constraint_value() const {
  return kind == MetricKind::diagonal ? lambda.norm() : omega.squaredNorm();
}

bool MetricParams::constraint_satisfied(double tol) const {
  if (kind == MetricKind::diagonal && (lambda.array() < 0.0).any()) return false;
  return std::abs(constraint_value() - 1.0) <= tol;
}

void MetricParams::normalize() {
  if (kind == MetricKind::diagonal) {
    const double n = lambda.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw std::domain_error("cannot normalize a zero relevance vector");
    lambda /= n;
  } else {
    // trace(Omega^T Omega) is the squared Frobenius norm.
    const double n = omega.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw std::domain_error("cannot normalize a zero metric matrix");
    omega /= n;
  }
}

double MetricParams::distance(const Eigen::Ref<const Eigen::VectorXd>& a,
                              const Eigen::Ref<const Eigen::VectorXd>& b) const {
  if (kind == MetricKind::diagonal) {
    return (lambda.array().square() * (a - b).array().square()).sum();
  }
  return (omega * (a - b)).squaredNorm();
}

Eigen::MatrixXd MetricParams::project(const Eigen::MatrixXd& rows) const {
  if (kind == MetricKind::diagonal) return rows * lambda.asDiagonal();
  return rows * omega.transpose();
}

Eigen::VectorXd MetricParams::relevance() const {
  if (kind == MetricKind::diagonal) return lambda;
  return omega.colwise().squaredNorm().transpose().cwiseSqrt();
}

double weighted_distance(const Eigen::Ref<const Eigen::VectorXd>& per_dim, const MetricParams& metric) {
  if (per_dim.size() != metric.dims()) {
    throw std::invalid_argument("weighted_distance: expected " + std::to_string(metric.dims()) +
                                " distances, got " + std::to_string(per_dim.size()));
  }
  if ((per_dim.array() < 0.0).any()) throw std::invalid_argument("weighted_distance: negative distance");
  if (metric.kind == MetricKind::diagonal) {
    return (metric.lambda.array().square() * per_dim.array().square()).sum();
  }
  return (metric.omega * per_dim).squaredNorm();
}

double func_norm(std::span<const double> w, double tau, int p) {
  if (w.empty()) throw std::invalid_argument("func_norm: empty series");
  if (!(tau > 0.0)) throw std::invalid_argument("func_norm: tau must be positive");
  if (p < 1) throw std::invalid_argument("func_norm: p must be a positive integer");
  const auto n = w.size();
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double v = w[k];
    const double prev = k == 0 ? 0.0 : w[k - 1];
    const double next = k + 1 == n ? 0.0 : w[k + 1];
    const double a = v * prev >= 0.0 ? 0.5 * tau * std::abs(v)
                                     : 0.5 * tau * v * v / (std::abs(v) + std::abs(prev));
    const double b = v * next >= 0.0 ? 0.5 * tau * std::abs(v)
                                     : 0.5 * tau * v * v / (std::abs(v) + std::abs(next));
    sum += p == 1 ? a + b : std::pow(a + b, p);
  }
  return p == 1 ? sum : p == 2 ? std::sqrt(sum) : std::pow(sum, 1.0 / p);
}

double func_distance(std::span<const double> u, std::span<const double> v, double tau, int p) {
  if (u.size() != v.size()) throw std::invalid_argument("func_distance: length mismatch");
  std::vector<double> w(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) w[i] = u[i] - v[i];
  return func_norm(w, tau, p);
}

Eigen::VectorXd per_dimension_distances(const Eigen::MatrixXd& x, const Eigen::MatrixXd& x_hat,
                                        const TimeDistance& dist) {
  if (x.rows() != x_hat.rows() || x.cols() != x_hat.cols()) {
    throw std::invalid_argument("per_dimension_distances: shape mismatch");
  }
  Eigen::VectorXd out(x.cols());
  std::vector<double> w(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    if (dist.kind == TimeDistanceKind::euclidean) {
      out(i) = (x.col(i) - x_hat.col(i)).norm();
      continue;
    }
    for (Eigen::Index t = 0; t < x.rows(); ++t) w[t] = x(t, i) - x_hat(t, i);
    out(i) = func_norm(w, dist.tau, dist.p);
  }
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double grgtm_cost(double d_plus, double d_minus) {
  if (d_plus < 0.0 || d_minus < 0.0) throw std::invalid_argument("grgtm_cost: negative distance");
  const double denom = d_plus + d_minus;
  if (denom == 0.0) return 0.5;
  return sigmoid((d_plus - d_minus) / denom);
}

MetricGradient metric_gradient(const Eigen::VectorXd& dt_plus, const Eigen::VectorXd& dt_minus,
                               const MetricParams& metric) {
  const auto d = metric.dims();
  MetricGradient g;
  g.kind = metric.kind;
  g.d_plus = weighted_distance(dt_plus, metric);
  g.d_minus = weighted_distance(dt_minus, metric);
  g.cost = grgtm_cost(g.d_plus, g.d_minus);
  const double denom = g.d_plus + g.d_minus;
  if (metric.kind == MetricKind::diagonal) {
    g.values = Eigen::MatrixXd::Zero(d, 1);
  } else {
    g.values = Eigen::MatrixXd::Zero(d, d);
  }
  if (denom == 0.0) return g;

  const double s = g.cost * (1.0 - g.cost);  // sgd' at the margin argument
  const double coef_plus = 2.0 * s * g.d_minus / (denom * denom);
  const double coef_minus = -2.0 * s * g.d_plus / (denom * denom);

  if (metric.kind == MetricKind::diagonal) {
    // d d_lambda / d lambda_i = 2 lambda_i (d^t_i)^2
    const Eigen::ArrayXd two_lambda = 2.0 * metric.lambda.array();
    g.values.col(0) = (coef_plus * two_lambda * dt_plus.array().square() +
                       coef_minus * two_lambda * dt_minus.array().square())
                          .matrix();
  } else {
    // d d_Omega / d Omega_ij = 2 v_j (Omega v)_i
    g.values = coef_plus * 2.0 * (metric.omega * dt_plus) * dt_plus.transpose() +
               coef_minus * 2.0 * (metric.omega * dt_minus) * dt_minus.transpose();
  }
  if (!g.values.allFinite()) throw NumericalError("metric_gradient: non-finite gradient");
  return g;
}

MetricGradient metric_gradient(const Eigen::MatrixXd& x, const Eigen::MatrixXd& recon_plus,
                               const Eigen::MatrixXd& recon_minus, const MetricParams& metric,
                               const TimeDistance& dist) {
  return metric_gradient(per_dimension_distances(x, recon_plus, dist),
                         per_dimension_distances(x, recon_minus, dist), metric);
}

MetricParams apply_metric_update(const MetricParams& metric, const Eigen::MatrixXd& avg_gradient,
                                 double epsilon) {
  MetricParams out = metric;
  if (metric.kind == MetricKind::diagonal) {
    if (avg_gradient.rows() != metric.dims() || avg_gradient.cols() != 1) {
      throw std::invalid_argument("apply_metric_update: gradient shape mismatch");
    }
    out.lambda = (metric.lambda - epsilon * avg_gradient.col(0)).cwiseMax(0.0);
    if (!(out.lambda.norm() > 0.0)) {
      warn("apply_metric_update: all relevances clipped to zero; resetting to uniform");
      return MetricParams::uniform(metric.dims(), metric.kind);
    }
  } else {
    if (avg_gradient.rows() != metric.dims() || avg_gradient.cols() != metric.dims()) {
      throw std::invalid_argument("apply_metric_update: gradient shape mismatch");
    }
    out.omega = metric.omega - epsilon * avg_gradient;
    if (!(out.omega.norm() > 0.0)) {
      warn("apply_metric_update: metric matrix vanished; resetting to uniform");
      return MetricParams::uniform(metric.dims(), metric.kind);
    }
  }
  if (!(out.kind == MetricKind::diagonal ? out.lambda.allFinite() : out.omega.allFinite())) {
    throw NumericalError("apply_metric_update: non-finite metric");
  }
  out.normalize();
  return out;
}

}  // namespace tempomap
