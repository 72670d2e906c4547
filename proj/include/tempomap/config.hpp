#pragma once

#include <cstdint>

#include <json.hpp>

#include "tempomap/metric.hpp"

namespace tempomap {

// Training and evaluation settings. Defaults: 3x3 latent grid, 2x2 basis,
// 200 epochs, tol 1e-5, diagonal relevance learning with epsilon 0.1 after
// 10 EM epochs, FUNC time distance with p = 2 and tau = 1, SVM C = 1.
struct TrainConfig {
  int grid_rows = 3;
  int grid_cols = 3;
  int basis_rows = 2;
  int basis_cols = 2;
  int max_epochs = 200;
  double tol = 1e-5;
  bool relevance = true;
  MetricKind metric_kind = MetricKind::diagonal;
  double epsilon = 0.1;
  int relevance_start_epoch = 10;
  int func_p = 2;
  double tau = 1.0;
  double svm_c = 1.0;
  std::uint64_t seed = 42;

  // Multiplies epsilon once per relevance epoch; 1 keeps it fixed.
  double epsilon_decay = 1.0;
  TimeDistanceKind time_distance = TimeDistanceKind::functional;
  double basis_width_factor = 2.0;

  TimeDistance time_distance_config() const { return {time_distance, tau, func_p}; }
  // Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
// Keys absent from `j` keep the values already in `config`; unknown keys are
// rejected.
void merge_json(const nlohmann::json& j, TrainConfig& config);
TrainConfig config_from_json(const nlohmann::json& j);

}  // namespace tempomap
