#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tempomap/config.hpp"
#include "tempomap/dataset.hpp"
#include "tempomap/gtm_tt.hpp"
#include "tempomap/metric.hpp"

namespace tempomap {

struct TrainingLog {
  // loglik[e][m]: total log-likelihood of class m's sequences at the start of
  // epoch e + 1, before that epoch's update.
  std::vector<std::vector<double>> loglik;
  // Shared beta assigned at the end of each epoch.
  std::vector<double> beta;
  // Mean GRGTM cost per epoch (NaN while the metric is frozen).
  std::vector<double> relevance_cost;
  int epochs = 0;
  bool converged = false;
};

// One GTM-TT per label on a shared latent grid with a shared metric and a
// linked beta.
struct SgtmModel {
  std::vector<std::string> label_set;
  std::vector<GtmTtModel> submodels;  // aligned with label_set
  double shared_beta = 1.0;
  MetricParams metric;
  NormalizationParams norm_params;
  std::vector<std::string> feature_names;
  TrainConfig config;
  TrainingLog log;

  std::size_t label_index(const std::string& label) const;
  const GtmTtModel& submodel(const std::string& label) const { return submodels[label_index(label)]; }
};

// Partition by label (sorted label order), preserving sample order within
// each class. Throws DataError for fewer than two labels or a class with
// fewer than two samples.
std::map<std::string, SequenceDataset> split_by_label(const SequenceDataset& data);

// Per model: |loglik_e - loglik_{e-1}| / (|loglik_e| + 1) < tol on the last
// two logged epochs. All false with fewer than two epochs.
std::vector<bool> convergence_check(const TrainingLog& log, double tol);

// The linked training loop on already-normalized class groups. Used by
// train(); exposed so a single group can be driven as a plain GTM-TT.
SgtmModel fit_submodels(const std::vector<std::vector<Eigen::MatrixXd>>& groups,
                        const std::vector<std::string>& labels, const TrainConfig& config);

// Imputes, normalizes, splits by label and runs the linked loop.
SgtmModel train(const SequenceDataset& data, const TrainConfig& config);

// Imputation and the model's normalization applied to new data.
SequenceDataset prepare_for_model(const SgtmModel& model, const SequenceDataset& data);

}  // namespace tempomap
