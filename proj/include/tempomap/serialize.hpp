#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "tempomap/classify.hpp"
#include "tempomap/eval.hpp"
#include "tempomap/gtm_tt.hpp"
#include "tempomap/metric.hpp"
#include "tempomap/sgtm.hpp"

namespace tempomap {

inline constexpr const char* kModelVersion = "sgtmtt-1";
inline constexpr const char* kReportVersion = "tempomap-cv-1";

// Matrices are stored as {"rows", "cols", "data"} with row-major data.
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

nlohmann::json to_json(const MetricParams& metric);
MetricParams metric_from_json(const nlohmann::json& j);

nlohmann::json to_json(const GtmTtModel& model, const std::string& metric_ref = "shared");
GtmTtModel gtm_tt_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SvmModel& svm);
SvmModel svm_from_json(const nlohmann::json& j);

struct ModelBundle {
  SgtmModel model;
  std::optional<SvmModel> svm;
};

nlohmann::json to_json(const ModelBundle& bundle);
// Throws DataError on a missing or unknown version.
ModelBundle bundle_from_json(const nlohmann::json& j);
void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path);

nlohmann::json to_json(const CvReport& report);
CvReport report_from_json(const nlohmann::json& j);

// CSV outputs start with a "# schema=<name>" line.
void write_cv_summary_csv(const CvReport& report, const std::filesystem::path& path);
void write_relevance_csv(const RelevanceProfile& profile, const std::vector<std::string>& feature_names,
                         const std::filesystem::path& path);

// Writes `j` as pretty JSON with a trailing newline.
void write_json(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace tempomap
