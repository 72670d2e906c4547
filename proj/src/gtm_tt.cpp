#include "tempomap/gtm_tt.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "tempomap/dataset.hpp"
#include "tempomap/errors.hpp"

namespace tempomap {

void GtmTtModel::validate(double tol) const {
  const auto k = states();
  if (gtm.phi.rows() != k) throw std::invalid_argument("GtmTtModel: Phi rows do not match grid size");
  if (gtm.phi.cols() != gtm.W.rows()) throw std::invalid_argument("GtmTtModel: Phi/W shape mismatch");
  if (!(gtm.beta > 0.0)) throw std::invalid_argument("GtmTtModel: beta must be positive");
  if (pi.size() != k || A.rows() != k || A.cols() != k) {
    throw std::invalid_argument("GtmTtModel: pi/A shape does not match grid size");
  }
  if ((pi.array() < 0.0).any() || std::abs(pi.sum() - 1.0) > tol) {
    throw std::invalid_argument("GtmTtModel: pi is not a probability vector");
  }
  if ((A.array() < 0.0).any() || ((A.rowwise().sum().array() - 1.0).abs() > tol).any()) {
    throw std::invalid_argument("GtmTtModel: A is not row-stochastic");
  }
}

Eigen::MatrixXd topology_transitions(const LatentGrid& grid, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("topology_transitions: sigma must be positive");
  const auto k = grid.size();
  Eigen::MatrixXd A(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      A(i, j) = std::exp(-(grid.points.row(i) - grid.points.row(j)).squaredNorm() / (2.0 * sigma * sigma));
    }
    A.row(i) /= A.row(i).sum();
  }
  return A;
}

Eigen::VectorXd floored_normalize(const Eigen::VectorXd& counts, double floor) {
  const auto k = counts.size();
  if (k == 0) throw std::invalid_argument("floored_normalize: empty vector");
  if (static_cast<double>(k) * floor > 1.0) throw std::invalid_argument("floored_normalize: floor too large");
  std::vector<bool> pinned(static_cast<std::size_t>(k), false);
  Eigen::VectorXd p(k);
  for (;;) {
    double free_sum = 0.0;
    Eigen::Index n_pinned = 0;
    for (Eigen::Index i = 0; i < k; ++i) {
      if (pinned[i]) {
        ++n_pinned;
      } else {
        free_sum += std::max(counts(i), 0.0);
      }
    }
    const double mass = 1.0 - static_cast<double>(n_pinned) * floor;
    const auto n_free = k - n_pinned;
    bool changed = false;
    for (Eigen::Index i = 0; i < k; ++i) {
      if (pinned[i]) {
        p(i) = floor;
        continue;
      }
      p(i) = free_sum > 0.0 ? mass * std::max(counts(i), 0.0) / free_sum : mass / static_cast<double>(n_free);
    }
    for (Eigen::Index i = 0; i < k; ++i) {
      if (!pinned[i] && p(i) < floor) {
        pinned[i] = true;
        changed = true;
      }
    }
    if (!changed) return p;
  }
}

GtmTtModel init_gtm_tt(const std::vector<Eigen::MatrixXd>& sequences, const LatentGrid& grid,
                       const BasisSet& basis, const MetricParams& metric, std::uint64_t seed) {
  if (sequences.empty()) throw std::invalid_argument("init_gtm_tt: no sequences");
  const Eigen::MatrixXd X = flatten(sequences);
  GtmTtModel model;
  model.grid = grid;
  model.basis = basis;
  model.gtm = init_from_pca(X, grid, basis, seed);

  // init_from_pca works in Euclidean units; match the mean exponent under the
  // metric.
  const Eigen::MatrixXd Y = model.prototypes();
  const double euclid = metric_distances(X, Y, MetricParams::uniform(X.cols())).sum() * static_cast<double>(X.cols());
  const double weighted = metric_distances(X, Y, metric).sum();
  if (weighted > 0.0 && euclid > 0.0) {
    model.gtm.beta = std::min(kBetaMax, model.gtm.beta * euclid / weighted);
  }

  const auto k = grid.size();
  model.pi = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  model.A = topology_transitions(grid, grid.spacing());
  return model;
}

Eigen::MatrixXd sequence_log_emissions(const GtmTtModel& model, const Eigen::MatrixXd& x_seq,
                                       const MetricParams& metric) {
  return log_emissions(x_seq, model.prototypes(), model.gtm.beta, metric);
}

ForwardResult forward(const GtmTtModel& model, const Eigen::MatrixXd& log_emit) {
  const auto t_len = log_emit.rows();
  const auto k = model.states();
  if (t_len == 0) throw std::invalid_argument("forward: empty sequence");
  if (log_emit.cols() != k) throw std::invalid_argument("forward: emission table has wrong number of states");

  ForwardResult out;
  out.alpha_hat.resize(t_len, k);
  out.log_scale.resize(t_len);
  const Eigen::ArrayXd log_pi = model.pi.array().log();
  Eigen::ArrayXd lp(k);
  for (Eigen::Index n = 0; n < t_len; ++n) {
    if (n == 0) {
      lp = log_pi + log_emit.row(0).transpose().array();
    } else {
      const Eigen::VectorXd prior = model.A.transpose() * out.alpha_hat.row(n - 1).transpose();
      lp = prior.array().log() + log_emit.row(n).transpose().array();
    }
    const double m = lp.maxCoeff();
    if (!std::isfinite(m)) {
      throw NumericalError("forward: emission mass vanished at time index " + std::to_string(n));
    }
    const Eigen::ArrayXd e = (lp - m).exp();
    const double s = e.sum();
    out.alpha_hat.row(n) = (e / s).matrix().transpose();
    out.log_scale(n) = m + std::log(s);
  }
  out.loglik = out.log_scale.sum();
  if (!std::isfinite(out.loglik)) throw NumericalError("forward: non-finite log-likelihood");
  return out;
}

ForwardResult forward(const GtmTtModel& model, const Eigen::MatrixXd& x_seq, const MetricParams& metric) {
  return forward(model, sequence_log_emissions(model, x_seq, metric));
}

Eigen::MatrixXd backward(const GtmTtModel& model, const Eigen::MatrixXd& log_emit, const Eigen::VectorXd& log_scale) {
  const auto t_len = log_emit.rows();
  const auto k = model.states();
  if (log_scale.size() != t_len) throw std::invalid_argument("backward: scale length mismatch");
  Eigen::MatrixXd beta_hat(t_len, k);
  beta_hat.row(t_len - 1).setOnes();
  for (Eigen::Index n = t_len - 2; n >= 0; --n) {
    const Eigen::VectorXd w =
        ((log_emit.row(n + 1).transpose().array() - log_scale(n + 1)).exp() * beta_hat.row(n + 1).transpose().array())
            .matrix();
    beta_hat.row(n) = (model.A * w).transpose();
  }
  if (!beta_hat.allFinite()) throw NumericalError("backward: non-finite backward table");
  return beta_hat;
}

Eigen::MatrixXd backward(const GtmTtModel& model, const Eigen::MatrixXd& x_seq, const MetricParams& metric,
                         const Eigen::VectorXd& log_scale) {
  return backward(model, sequence_log_emissions(model, x_seq, metric), log_scale);
}

ForwardBackwardResult forward_backward(const GtmTtModel& model, const Eigen::MatrixXd& log_emit) {
  ForwardResult fwd = forward(model, log_emit);
  ForwardBackwardResult out;
  out.beta_hat = backward(model, log_emit, fwd.log_scale);
  out.alpha_hat = std::move(fwd.alpha_hat);
  out.log_scale = std::move(fwd.log_scale);
  out.loglik = fwd.loglik;

  out.resp = out.alpha_hat.cwiseProduct(out.beta_hat);
  const Eigen::VectorXd norm = out.resp.rowwise().sum();
  out.resp = norm.cwiseInverse().asDiagonal() * out.resp;

  const auto k = model.states();
  out.xi_sum = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index n = 1; n < log_emit.rows(); ++n) {
    const Eigen::RowVectorXd w =
        ((log_emit.row(n).array() - out.log_scale(n)).exp() * out.beta_hat.row(n).array()).matrix();
    out.xi_sum += (out.alpha_hat.row(n - 1).transpose() * w).cwiseProduct(model.A);
  }
  return out;
}

ForwardBackwardResult responsibilities_tt(const GtmTtModel& model, const Eigen::MatrixXd& x_seq,
                                          const MetricParams& metric) {
  return forward_backward(model, sequence_log_emissions(model, x_seq, metric));
}

double sequence_loglik(const GtmTtModel& model, const Eigen::MatrixXd& x_seq, const MetricParams& metric) {
  return forward(model, x_seq, metric).loglik;
}

EmStepResult em_step(const GtmTtModel& model, const std::vector<Eigen::MatrixXd>& sequences,
                     const MetricParams& metric) {
  if (sequences.empty()) throw std::invalid_argument("em_step: no sequences");
  const auto k = model.states();
  Eigen::Index total = 0;
  for (const auto& s : sequences) total += s.rows();

  const Eigen::MatrixXd Y = model.prototypes();
  Eigen::VectorXd pi_counts = Eigen::VectorXd::Zero(k);
  Eigen::MatrixXd trans_counts = Eigen::MatrixXd::Zero(k, k);
  Eigen::MatrixXd R(total, k);
  Eigen::MatrixXd X(total, sequences.front().cols());
  double loglik = 0.0;
  Eigen::Index row = 0;
  for (const auto& x : sequences) {
    const auto fb = forward_backward(model, log_emissions(x, Y, model.gtm.beta, metric));
    loglik += fb.loglik;
    pi_counts += fb.resp.row(0).transpose();
    trans_counts += fb.xi_sum;
    R.middleRows(row, x.rows()) = fb.resp;
    X.middleRows(row, x.rows()) = x;
    row += x.rows();
  }

  EmStepResult out{model, loglik};
  auto& m = out.model;
  m.pi = floored_normalize(pi_counts);
  for (Eigen::Index i = 0; i < k; ++i) {
    // States never left (all sequences of length one) keep their old row.
    if (trans_counts.row(i).sum() > 0.0) {
      m.A.row(i) = floored_normalize(trans_counts.row(i).transpose()).transpose();
    }
  }
  m.gtm.W = solve_weights(m.gtm.phi, R, X);
  return out;
}

double optimize_beta_tt(const GtmTtModel& model, const std::vector<Eigen::MatrixXd>& sequences,
                        const MetricParams& metric) {
  if (sequences.empty()) throw std::invalid_argument("optimize_beta_tt: no sequences");
  const Eigen::MatrixXd Y = model.prototypes();
  double residual = 0.0;
  double points = 0.0;
  for (const auto& x : sequences) {
    const Eigen::MatrixXd dist = metric_distances(x, Y, metric);
    const Eigen::MatrixXd L = (0.5 * static_cast<double>(x.cols()) *
                                   std::log(model.gtm.beta / (2.0 * std::numbers::pi)) -
                               0.5 * model.gtm.beta * dist.array())
                                  .matrix();
    const auto fb = forward_backward(model, L);
    residual += fb.resp.cwiseProduct(dist).sum();
    points += static_cast<double>(x.rows());
  }
  return beta_from_residual(residual, points, static_cast<double>(sequences.front().cols()));
}

std::vector<int> viterbi_path(const GtmTtModel& model, const Eigen::MatrixXd& log_emit) {
  const auto t_len = log_emit.rows();
  const auto k = model.states();
  if (t_len == 0) return {};
  const Eigen::MatrixXd logA = model.A.array().log().matrix();
  Eigen::MatrixXd delta(t_len, k);
  Eigen::MatrixXi back(t_len, k);
  delta.row(0) = model.pi.array().log().matrix().transpose() + log_emit.row(0);
  for (Eigen::Index n = 1; n < t_len; ++n) {
    for (Eigen::Index j = 0; j < k; ++j) {
      double best = -std::numeric_limits<double>::infinity();
      int arg = 0;
      for (Eigen::Index i = 0; i < k; ++i) {
        const double v = delta(n - 1, i) + logA(i, j);
        if (v > best) {
          best = v;
          arg = static_cast<int>(i);
        }
      }
      delta(n, j) = best + log_emit(n, j);
      back(n, j) = arg;
    }
  }
  std::vector<int> path(static_cast<std::size_t>(t_len));
  Eigen::Index last = 0;
  delta.row(t_len - 1).maxCoeff(&last);
  path.back() = static_cast<int>(last);
  for (Eigen::Index n = t_len - 1; n > 0; --n) {
    path[n - 1] = back(n, path[n]);
  }
  return path;
}

std::vector<int> viterbi_path(const GtmTtModel& model, const Eigen::MatrixXd& x_seq, const MetricParams& metric) {
  return viterbi_path(model, sequence_log_emissions(model, x_seq, metric));
}

double path_log_probability(const GtmTtModel& model, const Eigen::MatrixXd& log_emit, const std::vector<int>& path) {
  if (static_cast<Eigen::Index>(path.size()) != log_emit.rows()) {
    throw std::invalid_argument("path_log_probability: path length mismatch");
  }
  double lp = std::log(model.pi(path[0])) + log_emit(0, path[0]);
  for (std::size_t n = 1; n < path.size(); ++n) {
    lp += std::log(model.A(path[n - 1], path[n])) + log_emit(static_cast<Eigen::Index>(n), path[n]);
  }
  return lp;
}

}  // namespace tempomap
