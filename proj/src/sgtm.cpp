#include "tempomap/sgtm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "tempomap/errors.hpp"
#include "tempomap/relevance.hpp"

namespace tempomap {

std::size_t SgtmModel::label_index(const std::string& label) const {
  auto it = std::find(label_set.begin(), label_set.end(), label);
  if (it == label_set.end()) throw std::out_of_range("unknown label '" + label + "'");
  return static_cast<std::size_t>(it - label_set.begin());
}

std::map<std::string, SequenceDataset> split_by_label(const SequenceDataset& data) {
  std::map<std::string, std::vector<std::size_t>> idx;
  for (std::size_t n = 0; n < data.size(); ++n) idx[data.labels[n]].push_back(n);
  if (idx.size() < 2) throw DataError("split_by_label: need at least two labels, got " + std::to_string(idx.size()));
  std::map<std::string, SequenceDataset> out;
  for (const auto& [label, members] : idx) {
    if (members.size() < 2) throw DataError("split_by_label: degenerate class '" + label + "' with a single sample");
    out.emplace(label, data.subset(members));
  }
  return out;
}

std::vector<bool> convergence_check(const TrainingLog& log, double tol) {
  if (log.loglik.empty()) return {};
  const auto models = log.loglik.back().size();
  std::vector<bool> out(models, false);
  if (log.loglik.size() < 2) return out;
  const auto& cur = log.loglik[log.loglik.size() - 1];
  const auto& prev = log.loglik[log.loglik.size() - 2];
  for (std::size_t m = 0; m < models; ++m) {
    out[m] = std::abs(cur[m] - prev[m]) / (std::abs(cur[m]) + 1.0) < tol;
  }
  return out;
}

SgtmModel fit_submodels(const std::vector<std::vector<Eigen::MatrixXd>>& groups, const std::vector<std::string>& labels,
                        const TrainConfig& config) {
  config.validate();
  if (groups.empty() || groups.size() != labels.size()) {
    throw std::invalid_argument("fit_submodels: groups and labels must be non-empty and aligned");
  }
  for (const auto& g : groups) {
    if (g.empty()) throw std::invalid_argument("fit_submodels: empty class group");
  }
  const auto d = groups.front().front().cols();
  const auto n_models = groups.size();

  SgtmModel model;
  model.label_set = labels;
  model.config = config;
  model.metric = MetricParams::uniform(d, config.metric_kind);

  const auto grid = build_grid(config.grid_rows, config.grid_cols);
  const auto basis = make_basis(config.basis_rows, config.basis_cols, config.basis_width_factor, true);
  double beta_sum = 0.0;
  for (const auto& g : groups) {
    model.submodels.push_back(init_gtm_tt(g, grid, basis, model.metric, config.seed));
    beta_sum += model.submodels.back().gtm.beta;
  }
  model.shared_beta = beta_sum / static_cast<double>(n_models);
  for (auto& s : model.submodels) s.gtm.beta = model.shared_beta;

  // Flattened view for metric adaptation.
  std::vector<Eigen::MatrixXd> all_sequences;
  std::vector<int> all_labels;
  for (std::size_t m = 0; m < n_models; ++m) {
    for (const auto& x : groups[m]) {
      all_sequences.push_back(x);
      all_labels.push_back(static_cast<int>(m));
    }
  }
  const bool adapt_metric = config.relevance && n_models >= 2;
  double epsilon = config.epsilon;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::vector<double> ll(n_models);
    for (std::size_t m = 0; m < n_models; ++m) {
      auto step = em_step(model.submodels[m], groups[m], model.metric);
      if (!std::isfinite(step.loglik)) {
        throw NumericalError("train: non-finite log-likelihood at epoch " + std::to_string(epoch));
      }
      ll[m] = step.loglik;
      model.submodels[m] = std::move(step.model);
    }
    model.log.loglik.push_back(ll);
    const auto converged = convergence_check(model.log, config.tol);

    double cost = std::numeric_limits<double>::quiet_NaN();
    if (adapt_metric && relevance_schedule(epoch, config.relevance_start_epoch)) {
      auto step = relevance_epoch(model.submodels, all_sequences, all_labels, model.metric,
                                  config.time_distance_config(), epsilon);
      model.metric = std::move(step.metric);
      cost = step.mean_cost;
      epsilon *= config.epsilon_decay;
    }
    model.log.relevance_cost.push_back(cost);

    double candidate_sum = 0.0;
    for (std::size_t m = 0; m < n_models; ++m) {
      candidate_sum += optimize_beta_tt(model.submodels[m], groups[m], model.metric);
    }
    model.shared_beta = candidate_sum / static_cast<double>(n_models);
    if (!std::isfinite(model.shared_beta)) {
      throw NumericalError("train: non-finite beta at epoch " + std::to_string(epoch));
    }
    for (auto& s : model.submodels) s.gtm.beta = model.shared_beta;
    model.log.beta.push_back(model.shared_beta);
    model.log.epochs = epoch;

    // With metric learning on, a stop is only accepted once logliks reflect an adapted metric.
    const bool may_stop = !adapt_metric || epoch > config.relevance_start_epoch + 1;
    if (may_stop && std::all_of(converged.begin(), converged.end(), [](bool b) { return b; })) {
      model.log.converged = true;
      break;
    }
  }
  return model;
}

SgtmModel train(const SequenceDataset& data, const TrainConfig& config) {
  data.validate();
  const SequenceDataset complete = impute(data);
  auto [normalized, params] = normalize(complete);
  const auto groups_by_label = split_by_label(normalized);
  std::vector<std::vector<Eigen::MatrixXd>> groups;
  std::vector<std::string> labels;
  for (const auto& [label, subset] : groups_by_label) {
    labels.push_back(label);
    groups.push_back(subset.sequences);
  }
  SgtmModel model = fit_submodels(groups, labels, config);
  model.norm_params = std::move(params);
  model.feature_names = data.feature_names;
  return model;
}

SequenceDataset prepare_for_model(const SgtmModel& model, const SequenceDataset& data) {
  data.validate();
  if (data.dims() != model.metric.dims()) {
    throw DataError("data has " + std::to_string(data.dims()) + " features, model expects " +
                    std::to_string(model.metric.dims()));
  }
  return apply_normalization(impute(data, model.norm_params.mean), model.norm_params);
}

}  // namespace tempomap
