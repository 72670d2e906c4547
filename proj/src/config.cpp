#include "tempomap/config.hpp"

#include <set>
#include <stdexcept>
#include <string>

namespace tempomap {

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("config: ") + what);
  };
  require(grid_rows >= 1 && grid_cols >= 1 && grid_rows * grid_cols >= 2, "grid must have at least 2 points");
  require(basis_rows >= 1 && basis_cols >= 1, "basis rows/cols must be >= 1");
  require(max_epochs >= 1, "max_epochs must be >= 1");
  require(tol >= 0.0, "tol must be non-negative");
  require(epsilon > 0.0, "epsilon must be positive");
  require(relevance_start_epoch >= 0, "relevance_start_epoch must be >= 0");
  require(func_p >= 1, "func_p must be >= 1");
  require(tau > 0.0, "tau must be positive");
  require(svm_c > 0.0, "svm_c must be positive");
  require(epsilon_decay > 0.0 && epsilon_decay <= 1.0, "epsilon_decay must lie in (0, 1]");
  require(basis_width_factor > 0.0, "basis_width_factor must be positive");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"grid_rows", c.grid_rows},
          {"grid_cols", c.grid_cols},
          {"basis_rows", c.basis_rows},
          {"basis_cols", c.basis_cols},
          {"max_epochs", c.max_epochs},
          {"tol", c.tol},
          {"relevance", c.relevance},
          {"metric_kind", to_string(c.metric_kind)},
          {"epsilon", c.epsilon},
          {"relevance_start_epoch", c.relevance_start_epoch},
          {"func_p", c.func_p},
          {"tau", c.tau},
          {"svm_c", c.svm_c},
          {"seed", c.seed},
          {"epsilon_decay", c.epsilon_decay},
          {"time_distance", c.time_distance == TimeDistanceKind::functional ? "functional" : "euclidean"},
          {"basis_width_factor", c.basis_width_factor}};
}

void merge_json(const nlohmann::json& j, TrainConfig& c) {
  if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
  static const std::set<std::string> known = {
      "grid_rows", "grid_cols", "basis_rows", "basis_cols", "max_epochs", "tol",
      "relevance", "metric_kind", "epsilon", "relevance_start_epoch", "func_p", "tau",
      "svm_c", "seed", "epsilon_decay", "time_distance", "basis_width_factor"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("grid_rows", c.grid_rows);
    get("grid_cols", c.grid_cols);
    get("basis_rows", c.basis_rows);
    get("basis_cols", c.basis_cols);
    get("max_epochs", c.max_epochs);
    get("tol", c.tol);
    get("relevance", c.relevance);
    get("epsilon", c.epsilon);
    get("relevance_start_epoch", c.relevance_start_epoch);
    get("func_p", c.func_p);
    get("tau", c.tau);
    get("svm_c", c.svm_c);
    get("seed", c.seed);
    get("epsilon_decay", c.epsilon_decay);
    get("basis_width_factor", c.basis_width_factor);
    if (j.contains("metric_kind")) c.metric_kind = metric_kind_from_string(j.at("metric_kind").get<std::string>());
    if (j.contains("time_distance")) {
      const auto s = j.at("time_distance").get<std::string>();
      if (s == "functional") {
        c.time_distance = TimeDistanceKind::functional;
      } else if (s == "euclidean") {
        c.time_distance = TimeDistanceKind::euclidean;
      } else {
        throw std::invalid_argument("config: time_distance must be functional|euclidean");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  merge_json(j, c);
  return c;
}

}  // namespace tempomap
