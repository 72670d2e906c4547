#include "tempomap/relevance.hpp"

#include <limits>
#include <stdexcept>

namespace tempomap {

Reconstruction reconstruct_from_responsibilities(const Eigen::MatrixXd& resp, const Eigen::MatrixXd& prototypes) {
  if (resp.cols() != prototypes.rows()) {
    throw std::invalid_argument("reconstruct: responsibilities and prototypes disagree on state count");
  }
  Reconstruction r;
  r.x_hat.resize(resp.rows(), prototypes.cols());
  r.winner_path.resize(static_cast<std::size_t>(resp.rows()));
  for (Eigen::Index n = 0; n < resp.rows(); ++n) {
    Eigen::Index k = 0;
    resp.row(n).maxCoeff(&k);
    r.winner_path[n] = static_cast<int>(k);
    r.x_hat.row(n) = prototypes.row(k);
  }
  return r;
}

Reconstruction reconstruct(const Eigen::MatrixXd& x_seq, const GtmTtModel& submodel, const MetricParams& metric,
                           std::string source_label) {
  const auto fb = responsibilities_tt(submodel, x_seq, metric);
  auto r = reconstruct_from_responsibilities(fb.resp, submodel.prototypes());
  r.source_label = std::move(source_label);
  return r;
}

RelevanceStep relevance_epoch(const std::vector<GtmTtModel>& submodels, const std::vector<Eigen::MatrixXd>& sequences,
                              const std::vector<int>& labels, const MetricParams& metric, const TimeDistance& dist,
                              double epsilon) {
  if (submodels.size() < 2) throw std::invalid_argument("relevance_epoch: need at least two submodels");
  if (sequences.empty() || labels.size() != sequences.size()) {
    throw std::invalid_argument("relevance_epoch: sequences and labels must be non-empty and aligned");
  }
  const auto d = metric.dims();
  Eigen::MatrixXd grad_sum = metric.kind == MetricKind::diagonal ? Eigen::MatrixXd::Zero(d, 1)
                                                                 : Eigen::MatrixXd::Zero(d, d);
  double cost_sum = 0.0;
  const auto n_models = submodels.size();
  for (std::size_t n = 0; n < sequences.size(); ++n) {
    const auto& x = sequences[n];
    const auto own = static_cast<std::size_t>(labels[n]);
    if (own >= n_models) throw std::invalid_argument("relevance_epoch: label index out of range");

    std::vector<Eigen::VectorXd> dt(n_models);
    for (std::size_t m = 0; m < n_models; ++m) {
      dt[m] = per_dimension_distances(x, reconstruct(x, submodels[m], metric).x_hat, dist);
    }
    std::size_t wrong = n_models;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < n_models; ++m) {
      if (m == own) continue;
      const double dm = weighted_distance(dt[m], metric);
      if (dm < best) {
        best = dm;
        wrong = m;
      }
    }
    const auto g = metric_gradient(dt[own], dt[wrong], metric);
    grad_sum += g.values;
    cost_sum += g.cost;
  }
  const double count = static_cast<double>(sequences.size());
  RelevanceStep step;
  step.avg_gradient = grad_sum / count;
  step.mean_cost = cost_sum / count;
  step.metric = apply_metric_update(metric, step.avg_gradient, epsilon);
  return step;
}

}  // namespace tempomap
