#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tempomap/sgtm.hpp"

namespace tempomap {

// Per-class sequence likelihoods of one sequence. `lik` holds
// exp(l_l / T - max_l l_l / T), so the best class scores exactly 1.
struct LikelihoodFeatures {
  Eigen::VectorXd lik;
  Eigen::VectorXd loglik_raw;  // ln p(X | class submodel)
};

// x_seq must already be normalized with the model's parameters.
LikelihoodFeatures likelihood_features(const SgtmModel& model, const Eigen::MatrixXd& x_seq);
LikelihoodFeatures features_from_logliks(const Eigen::VectorXd& loglik, Eigen::Index length);

// Index of the largest log-likelihood, first one on ties.
std::size_t argmax_label(const Eigen::VectorXd& loglik);
std::string classify_ml(const SgtmModel& model, const Eigen::MatrixXd& x_seq);

// K(X_j, X_k) = sum_l Lik_j^l Lik_k^l.
double likelihood_kernel(const LikelihoodFeatures& a, const LikelihoodFeatures& b);
Eigen::MatrixXd gram_matrix(const std::vector<LikelihoodFeatures>& features);

// Two-class soft-margin machine on the likelihood kernel: f(x) = sum_i
// coef_i K(x_i, x) + bias with coef_i = alpha_i y_i.
struct BinarySvm {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd alpha;
  std::vector<LikelihoodFeatures> support_features;
  double bias = 0.0;
  // Maximal KKT violation at termination.
  double kkt_gap = 0.0;
  int iterations = 0;

  double decision(const LikelihoodFeatures& f) const;
};

struct SvmOptions {
  double c = 1.0;
  double tolerance = 1e-3;
  int max_iterations = 100000;
};

// SMO with second-order working set selection on a precomputed Gram matrix.
// y entries are +1 / -1. Samples are put in a canonical order first, so the
// result does not depend on input order.
BinarySvm train_binary_svm(const std::vector<LikelihoodFeatures>& features, const std::vector<int>& y,
                           const SvmOptions& options = {});

// One machine for two labels (label_set[0] is the positive class), one
// machine per label (one-vs-rest) otherwise.
struct SvmModel {
  std::vector<std::string> label_set;
  std::vector<BinarySvm> machines;
  double c_param = 1.0;
};

SvmModel svm_train(const std::vector<LikelihoodFeatures>& features, const std::vector<std::string>& labels,
                   const std::vector<std::string>& label_set, const SvmOptions& options = {});

struct SvmPrediction {
  std::string label;
  // Two labels: f(x) (>= 0 selects label_set[0]). One-vs-rest: the winning
  // machine's value.
  double decision = 0.0;
};

SvmPrediction svm_predict(const SvmModel& svm, const LikelihoodFeatures& f);

}  // namespace tempomap
