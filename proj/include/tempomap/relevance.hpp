#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tempomap/gtm_tt.hpp"
#include "tempomap/metric.hpp"

namespace tempomap {

// Prototype path of the most responsible state per time step under one
// class submodel.
struct Reconstruction {
  Eigen::MatrixXd x_hat;         // T x D
  std::vector<int> winner_path;  // 0-based state indices
  std::string source_label;
};

// Winner per row of `resp` (lowest index on ties) and the matching
// prototype rows.
Reconstruction reconstruct_from_responsibilities(const Eigen::MatrixXd& resp, const Eigen::MatrixXd& prototypes);

Reconstruction reconstruct(const Eigen::MatrixXd& x_seq, const GtmTtModel& submodel, const MetricParams& metric,
                           std::string source_label = {});

struct RelevanceStep {
  MetricParams metric;
  Eigen::MatrixXd avg_gradient;
  double mean_cost = 0.0;
};

// One epoch of metric adaptation: every sequence is reconstructed by its
// own-label submodel (plus) and by the other-label submodel with the smallest
// distance (minus); the per-sequence GRGTM gradients are averaged and a step
// of size epsilon is taken. `labels[n]` indexes into `submodels`.
RelevanceStep relevance_epoch(const std::vector<GtmTtModel>& submodels, const std::vector<Eigen::MatrixXd>& sequences,
                              const std::vector<int>& labels, const MetricParams& metric, const TimeDistance& dist,
                              double epsilon);

}  // namespace tempomap
