#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace tempomap {

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// N labeled multivariate sequences sharing one time grid. Each sequence is a
// T x D matrix with time points as rows and features as columns.
struct SequenceDataset {
  std::vector<Eigen::MatrixXd> sequences;
  std::vector<std::string> sample_ids;
  std::vector<std::string> labels;
  std::vector<std::string> feature_names;
  std::vector<double> time_stamps;
  // Empty when every entry is observed; otherwise one mask per sequence
  // (true = observed).
  std::vector<Mask> mask;
  // Free-form provenance (generator parameters for synthetic data).
  nlohmann::json metadata = nlohmann::json::object();

  std::size_t size() const { return sequences.size(); }
  Eigen::Index length() const;
  Eigen::Index dims() const;

  bool has_missing() const;
  // Sorted distinct labels.
  std::vector<std::string> label_set() const;
  // Throws DataError when shapes or bookkeeping are inconsistent.
  void validate() const;
  // Subset by sample index, preserving the given order.
  SequenceDataset subset(const std::vector<std::size_t>& indices) const;
};

struct CsvSchema {
  std::string sample_id_column = "sample_id";
  std::string time_column = "time_index";
  std::string label_column = "label";
};

SequenceDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
void save_csv(const SequenceDataset& data, const std::filesystem::path& path,
              const CsvSchema& schema = {});

// Sidecar JSON: feature names, label set, time stamps and metadata.
nlohmann::json dataset_metadata(const SequenceDataset& data);
void save_metadata(const SequenceDataset& data, const std::filesystem::path& path);
// Reads a sidecar; throws DataError on an unknown version.
nlohmann::json load_metadata(const std::filesystem::path& path);

struct NormalizationParams {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
};

inline constexpr double kStdFloor = 1e-12;

// Global per-feature z-score over all N*T entries (population std).
std::pair<SequenceDataset, NormalizationParams> normalize(const SequenceDataset& data);
SequenceDataset apply_normalization(const SequenceDataset& data, const NormalizationParams& params);

// Per-feature mean over observed entries. Throws DataError when a feature is
// never observed.
Eigen::VectorXd observed_feature_means(const SequenceDataset& data);

// Fills missing entries by linear interpolation in time, nearest-value
// extension at the ends, and `feature_means` (computed from `data` when
// absent) for features missing for a whole sample.
SequenceDataset impute(const SequenceDataset& data,
                       const std::optional<Eigen::VectorXd>& feature_means = std::nullopt);

struct SimulationParams {
  int n_per_class = 50;
  int t = 8;
  int d = 100;
  int d_informative = 10;
  std::uint64_t seed = 42;
  int breakpoints = 3;
  double min_gap = 1.0;
  double scale_lo = 0.8;
  double scale_hi = 1.2;
  double noise_sigma = 0.1;
};

nlohmann::json to_json(const SimulationParams& params);

// Two-class synthetic study: informative features follow class-specific
// piecewise-linear templates, the rest share one template per feature.
// Metadata records the parameters and the informative feature indices.
SequenceDataset simulate(const SimulationParams& params);

// Stacks all sequences into an (N*T) x D matrix.
Eigen::MatrixXd flatten(const std::vector<Eigen::MatrixXd>& sequences);

}  // namespace tempomap
