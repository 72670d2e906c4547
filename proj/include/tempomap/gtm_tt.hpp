#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "tempomap/gtm.hpp"
#include "tempomap/metric.hpp"

namespace tempomap {

inline constexpr double kProbabilityFloor = 1e-8;

// HMM whose hidden states are the latent grid points and whose emissions are
// the GTM Gaussians centred on the prototypes Phi W.
struct GtmTtModel {
  LatentGrid grid;
  BasisSet basis;
  GtmParams gtm;
  Eigen::VectorXd pi;  // K
  Eigen::MatrixXd A;   // K x K, rows sum to one

  Eigen::Index states() const { return grid.size(); }
  Eigen::MatrixXd prototypes() const { return map_prototypes(gtm); }
  // Throws std::invalid_argument when a stochastic or shape invariant fails.
  void validate(double tol = 1e-8) const;
};

// a_ij proportional to exp(-||w_i - w_j||^2 / (2 sigma^2)), rows normalized.
Eigen::MatrixXd topology_transitions(const LatentGrid& grid, double sigma);

// Maximizes sum_k counts_k ln p_k over the simplex with p_k >= floor. This
// is the floor-then-renormalize step done exactly, so EM stays monotone.
Eigen::VectorXd floored_normalize(const Eigen::VectorXd& counts, double floor = kProbabilityFloor);

// PCA-initialized weights, uniform pi and topology-constrained transitions.
// beta is rescaled from Euclidean to metric units.
GtmTtModel init_gtm_tt(const std::vector<Eigen::MatrixXd>& sequences, const LatentGrid& grid,
                       const BasisSet& basis, const MetricParams& metric, std::uint64_t seed = 0);

// T x K emission log-densities of one sequence.
Eigen::MatrixXd sequence_log_emissions(const GtmTtModel& model, const Eigen::MatrixXd& x_seq,
                                       const MetricParams& metric);

struct ForwardResult {
  Eigen::MatrixXd alpha_hat;  // T x K, rows sum to one
  // ln c_n where c_n is the per-step normalizer of the forward recursion.
  // Stored as logs: raw factors underflow for long or high-dimensional input.
  Eigen::VectorXd log_scale;
  double loglik = 0.0;
};

struct ForwardBackwardResult {
  Eigen::MatrixXd alpha_hat;
  Eigen::MatrixXd beta_hat;
  Eigen::VectorXd log_scale;
  Eigen::MatrixXd resp;    // T x K posterior state probabilities
  Eigen::MatrixXd xi_sum;  // K x K expected transition counts
  double loglik = 0.0;
};

ForwardResult forward(const GtmTtModel& model, const Eigen::MatrixXd& log_emit);
ForwardResult forward(const GtmTtModel& model, const Eigen::MatrixXd& x_seq, const MetricParams& metric);

Eigen::MatrixXd backward(const GtmTtModel& model, const Eigen::MatrixXd& log_emit,
                         const Eigen::VectorXd& log_scale);
Eigen::MatrixXd backward(const GtmTtModel& model, const Eigen::MatrixXd& x_seq, const MetricParams& metric,
                         const Eigen::VectorXd& log_scale);

ForwardBackwardResult forward_backward(const GtmTtModel& model, const Eigen::MatrixXd& log_emit);
ForwardBackwardResult responsibilities_tt(const GtmTtModel& model, const Eigen::MatrixXd& x_seq,
                                          const MetricParams& metric);

// ln p(X | model).
double sequence_loglik(const GtmTtModel& model, const Eigen::MatrixXd& x_seq, const MetricParams& metric);

struct EmStepResult {
  GtmTtModel model;
  // Total log-likelihood of the sequences under the model before the update.
  double loglik = 0.0;
};

// One Baum-Welch step over all sequences: pi, A and W are re-estimated; beta
// is left untouched.
EmStepResult em_step(const GtmTtModel& model, const std::vector<Eigen::MatrixXd>& sequences,
                     const MetricParams& metric);

// Candidate beta from responsibilities pooled over every time point of every
// sequence. The model is not modified.
double optimize_beta_tt(const GtmTtModel& model, const std::vector<Eigen::MatrixXd>& sequences,
                        const MetricParams& metric);

// Most probable state path (0-based indices). Ties go to the lower index.
std::vector<int> viterbi_path(const GtmTtModel& model, const Eigen::MatrixXd& x_seq, const MetricParams& metric);
std::vector<int> viterbi_path(const GtmTtModel& model, const Eigen::MatrixXd& log_emit);

// ln p(Z, X) for a given state path.
double path_log_probability(const GtmTtModel& model, const Eigen::MatrixXd& log_emit, const std::vector<int>& path);

}  // namespace tempomap
