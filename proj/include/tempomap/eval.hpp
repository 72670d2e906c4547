#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tempomap/config.hpp"
#include "tempomap/dataset.hpp"

namespace tempomap {

struct CvOptions {
  int folds = 4;
  int reps = 5;
  std::uint64_t seed = 42;
  // Worker threads for independent folds; results do not depend on it.
  int threads = 1;
};

struct CvReport {
  int folds = 0;
  int reps = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> label_set;
  std::vector<std::string> feature_names;
  // reps x folds fraction of correctly classified test sequences.
  Eigen::MatrixXd svm_accuracy;
  Eigen::MatrixXd ml_accuracy;
  double svm_mean = 0.0;
  double svm_std = 0.0;
  double ml_mean = 0.0;
  double ml_std = 0.0;
  // Learned relevance per fold, in rep-major order.
  std::vector<Eigen::VectorXd> per_fold_relevance;
  std::vector<int> per_fold_epochs;
  // Rows: true label, columns: predicted label (SVM path).
  Eigen::MatrixXi confusion;
  Eigen::MatrixXi ml_confusion;
  TrainConfig config;
};

// Fold index per sample for one repetition. Each class is shuffled and dealt
// round-robin, continuing where the previous class stopped, so per-fold class
// counts differ by at most one.
std::vector<int> stratified_assignment(const std::vector<std::string>& labels, int folds, std::uint64_t seed);

// Repeated stratified k-fold CV. Each fold normalizes on its training part,
// trains an SGTM model, and scores both the SVM and the max-likelihood
// classifier on the held-out part.
CvReport stratified_cv(const SequenceDataset& data, const TrainConfig& config, const CvOptions& options);

// Mean and sample standard deviation of all entries.
std::pair<double, double> mean_and_std(const Eigen::MatrixXd& values);

struct RelevanceProfile {
  Eigen::VectorXd mean;
  Eigen::VectorXd min;
  Eigen::VectorXd std;
  // mu + sigma of the entries of `mean`.
  double zeta = 0.0;
  std::vector<int> selected;  // indices with mean > zeta, ascending
};

RelevanceProfile relevance_profile(const std::vector<Eigen::VectorXd>& per_fold_relevance);

// Indices of the k largest mean relevances, largest first (lower index on ties).
std::vector<int> top_features(const RelevanceProfile& profile, int k);

}  // namespace tempomap
