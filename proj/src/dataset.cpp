#include "tempomap/dataset.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "tempomap/errors.hpp"
#include "tempomap/rng.hpp"

namespace tempomap {

Eigen::Index SequenceDataset::length() const {
  return sequences.empty() ? 0 : sequences.front().rows();
}

Eigen::Index SequenceDataset::dims() const {
  return sequences.empty() ? static_cast<Eigen::Index>(feature_names.size())
                           : sequences.front().cols();
}

bool SequenceDataset::has_missing() const {
  return std::any_of(mask.begin(), mask.end(), [](const Mask& m) { return !m.all(); });
}

std::vector<std::string> SequenceDataset::label_set() const {
  std::set<std::string> s(labels.begin(), labels.end());
  return {s.begin(), s.end()};
}

void SequenceDataset::validate() const {
  if (labels.size() != sequences.size() || sample_ids.size() != sequences.size()) {
    throw DataError("dataset: labels/sample_ids length does not match number of sequences");
  }
  if (!mask.empty() && mask.size() != sequences.size()) {
    throw DataError("dataset: mask length does not match number of sequences");
  }
  const auto t = length();
  const auto d = dims();
  if (static_cast<std::size_t>(d) != feature_names.size()) {
    throw DataError("dataset: feature_names length does not match feature count");
  }
  if (!sequences.empty() && static_cast<std::size_t>(t) != time_stamps.size()) {
    throw DataError("dataset: time_stamps length does not match sequence length");
  }
  for (std::size_t n = 0; n < sequences.size(); ++n) {
    if (sequences[n].rows() != t || sequences[n].cols() != d) {
      throw DataError("dataset: sequence " + sample_ids[n] + " has shape " +
                      std::to_string(sequences[n].rows()) + "x" +
                      std::to_string(sequences[n].cols()) + ", expected " + std::to_string(t) +
                      "x" + std::to_string(d));
    }
    if (!mask.empty() && (mask[n].rows() != t || mask[n].cols() != d)) {
      throw DataError("dataset: mask shape mismatch for sample " + sample_ids[n]);
    }
  }
}

SequenceDataset SequenceDataset::subset(const std::vector<std::size_t>& indices) const {
  SequenceDataset out;
  out.feature_names = feature_names;
  out.time_stamps = time_stamps;
  out.metadata = metadata;
  for (auto i : indices) {
    out.sequences.push_back(sequences.at(i));
    out.sample_ids.push_back(sample_ids.at(i));
    out.labels.push_back(labels.at(i));
    if (!mask.empty()) out.mask.push_back(mask.at(i));
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::optional<double> parse_double(const std::string& raw) {
  const std::string s = trim(raw);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = s.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument(s);
  }
  return v;
}

bool is_integer(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

// Numeric ids compare numerically, everything else lexicographically.
bool sample_id_less(const std::string& a, const std::string& b) {
  if (is_integer(a) && is_integer(b)) {
    const auto sa = a.substr(std::min(a.find_first_not_of('0'), a.size() - 1));
    const auto sb = b.substr(std::min(b.find_first_not_of('0'), b.size() - 1));
    if (sa.size() != sb.size()) return sa.size() < sb.size();
    if (sa != sb) return sa < sb;
  }
  return a < b;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

SequenceDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_csv_line(line);

  auto find_col = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError(path.string() + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto id_col = find_col(schema.sample_id_column);
  const auto time_col = find_col(schema.time_column);
  const auto label_col = find_col(schema.label_column);

  std::vector<std::size_t> feature_cols;
  std::vector<std::string> feature_names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == id_col || c == time_col || c == label_col) continue;
    feature_cols.push_back(c);
    feature_names.push_back(header[c]);
  }
  if (feature_cols.empty()) throw DataError(path.string() + ": no feature columns");
  const auto d = static_cast<Eigen::Index>(feature_cols.size());

  struct Row {
    std::vector<double> values;
    std::vector<bool> observed;
  };
  struct Sample {
    std::string label;
    std::map<double, Row> rows;
  };
  std::map<std::string, Sample> samples;
  std::set<double> times;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    const std::string id = trim(fields[id_col]);
    double t = 0.0;
    try {
      auto parsed = parse_double(fields[time_col]);
      if (!parsed) throw std::invalid_argument("empty");
      t = *parsed;
    } catch (const std::invalid_argument&) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": invalid time_index '" +
                      fields[time_col] + "'");
    }
    Row row{std::vector<double>(feature_cols.size(), 0.0), std::vector<bool>(feature_cols.size(), false)};
    for (std::size_t j = 0; j < feature_cols.size(); ++j) {
      try {
        if (auto v = parse_double(fields[feature_cols[j]])) {
          row.values[j] = *v;
          row.observed[j] = std::isfinite(*v);
        }
      } catch (const std::invalid_argument&) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": non-numeric value '" +
                        fields[feature_cols[j]] + "' in column '" + feature_names[j] + "'");
      }
    }
    auto& sample = samples[id];
    const std::string label = trim(fields[label_col]);
    if (sample.rows.empty()) {
      sample.label = label;
    } else if (sample.label != label) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": sample '" + id +
                      "' has conflicting labels");
    }
    if (!sample.rows.emplace(t, std::move(row)).second) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": duplicate (sample_id, time_index) = (" +
                      id + ", " + format_double(t) + ")");
    }
    times.insert(t);
  }
  if (samples.empty()) throw DataError(path.string() + ": no data rows");

  std::vector<std::string> ids;
  for (const auto& [id, _] : samples) ids.push_back(id);
  std::sort(ids.begin(), ids.end(), sample_id_less);

  SequenceDataset out;
  out.feature_names = std::move(feature_names);
  out.time_stamps.assign(times.begin(), times.end());
  const auto t_len = static_cast<Eigen::Index>(times.size());
  bool any_missing = false;
  std::vector<Mask> masks;
  for (const auto& id : ids) {
    const auto& sample = samples.at(id);
    if (static_cast<Eigen::Index>(sample.rows.size()) != t_len) {
      throw DataError(path.string() + ": ragged time grid: sample '" + id + "' has " +
                      std::to_string(sample.rows.size()) + " of " + std::to_string(t_len) +
                      " time points");
    }
    Eigen::MatrixXd x(t_len, d);
    Mask m(t_len, d);
    Eigen::Index r = 0;
    for (const auto& [time, row] : sample.rows) {
      for (Eigen::Index j = 0; j < d; ++j) {
        m(r, j) = row.observed[j];
        x(r, j) = row.observed[j] ? row.values[j] : std::numeric_limits<double>::quiet_NaN();
      }
      ++r;
    }
    any_missing = any_missing || !m.all();
    out.sequences.push_back(std::move(x));
    masks.push_back(std::move(m));
    out.sample_ids.push_back(id);
    out.labels.push_back(sample.label);
  }
  if (any_missing) out.mask = std::move(masks);
  out.validate();
  return out;
}

void save_csv(const SequenceDataset& data, const std::filesystem::path& path, const CsvSchema& schema) {
  data.validate();
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << quote_if_needed(schema.sample_id_column) << ',' << quote_if_needed(schema.time_column) << ','
      << quote_if_needed(schema.label_column);
  for (const auto& f : data.feature_names) out << ',' << quote_if_needed(f);
  out << '\n';
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto& x = data.sequences[n];
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
      out << quote_if_needed(data.sample_ids[n]) << ',' << format_double(data.time_stamps[t]) << ','
          << quote_if_needed(data.labels[n]);
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        out << ',';
        const bool observed = data.mask.empty() || data.mask[n](t, j);
        if (observed) out << format_double(x(t, j));
      }
      out << '\n';
    }
  }
}

nlohmann::json dataset_metadata(const SequenceDataset& data) {
  nlohmann::json j;
  j["version"] = "tempomap-dataset-1";
  j["feature_names"] = data.feature_names;
  j["label_set"] = data.label_set();
  j["time_stamps"] = data.time_stamps;
  j["n_samples"] = data.size();
  j["metadata"] = data.metadata;
  return j;
}

void save_metadata(const SequenceDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << dataset_metadata(data).dump(2) << '\n';
}

nlohmann::json load_metadata(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (!j.is_object() || j.value("version", std::string{}) != "tempomap-dataset-1") {
    throw DataError(path.string() + ": unsupported metadata version");
  }
  return j;
}

std::pair<SequenceDataset, NormalizationParams> normalize(const SequenceDataset& data) {
  if (data.has_missing()) throw DataError("normalize: dataset has missing values; impute first");
  if (data.sequences.empty()) throw DataError("normalize: empty dataset");
  const Eigen::MatrixXd flat = flatten(data.sequences);
  const double count = static_cast<double>(flat.rows());
  NormalizationParams params;
  params.mean = flat.colwise().mean().transpose();
  params.std.resize(flat.cols());
  for (Eigen::Index j = 0; j < flat.cols(); ++j) {
    const double var = (flat.col(j).array() - params.mean(j)).square().sum() / count;
    double s = std::sqrt(var);
    if (!(s > kStdFloor)) {
      warn("normalize: feature '" + data.feature_names[j] + "' is constant; std floored at 1e-12");
      s = kStdFloor;
    }
    params.std(j) = s;
  }
  return {apply_normalization(data, params), params};
}

SequenceDataset apply_normalization(const SequenceDataset& data, const NormalizationParams& params) {
  if (params.mean.size() != data.dims() || params.std.size() != data.dims()) {
    throw DataError("apply_normalization: parameters have " + std::to_string(params.mean.size()) +
                    " features, data has " + std::to_string(data.dims()));
  }
  SequenceDataset out = data;
  const Eigen::RowVectorXd mu = params.mean.transpose();
  const Eigen::RowVectorXd inv = params.std.cwiseInverse().transpose();
  for (auto& x : out.sequences) {
    x = ((x.rowwise() - mu).array().rowwise() * inv.array()).matrix();
  }
  return out;
}

Eigen::VectorXd observed_feature_means(const SequenceDataset& data) {
  const auto d = data.dims();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd count = Eigen::VectorXd::Zero(d);
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto& x = data.sequences[n];
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
      for (Eigen::Index j = 0; j < d; ++j) {
        if (data.mask.empty() || data.mask[n](t, j)) {
          sum(j) += x(t, j);
          count(j) += 1.0;
        }
      }
    }
  }
  for (Eigen::Index j = 0; j < d; ++j) {
    if (count(j) == 0.0) {
      throw DataError("feature '" + data.feature_names[j] + "' is missing in every sample");
    }
  }
  return sum.cwiseQuotient(count);
}

SequenceDataset impute(const SequenceDataset& data, const std::optional<Eigen::VectorXd>& feature_means) {
  if (!data.has_missing()) {
    SequenceDataset out = data;
    out.mask.clear();
    return out;
  }
  const Eigen::VectorXd means = feature_means ? *feature_means : observed_feature_means(data);
  if (means.size() != data.dims()) throw DataError("impute: feature mean vector has wrong length");

  SequenceDataset out = data;
  const auto& ts = data.time_stamps;
  for (std::size_t n = 0; n < out.size(); ++n) {
    auto& x = out.sequences[n];
    const auto& m = data.mask[n];
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      std::vector<Eigen::Index> obs;
      for (Eigen::Index t = 0; t < x.rows(); ++t) {
        if (m(t, j)) obs.push_back(t);
      }
      if (obs.empty()) {
        x.col(j).setConstant(means(j));
        continue;
      }
      for (Eigen::Index t = 0; t < x.rows(); ++t) {
        if (m(t, j)) continue;
        auto hi = std::lower_bound(obs.begin(), obs.end(), t);
        if (hi == obs.begin()) {
          x(t, j) = x(obs.front(), j);
        } else if (hi == obs.end()) {
          x(t, j) = x(obs.back(), j);
        } else {
          const auto t1 = *hi;
          const auto t0 = *(hi - 1);
          const double w = (ts[t] - ts[t0]) / (ts[t1] - ts[t0]);
          x(t, j) = (1.0 - w) * x(t0, j) + w * x(t1, j);
        }
      }
    }
  }
  out.mask.clear();
  return out;
}

nlohmann::json to_json(const SimulationParams& p) {
  return {{"n_per_class", p.n_per_class}, {"t", p.t},
          {"d", p.d},                     {"d_informative", p.d_informative},
          {"seed", p.seed},               {"breakpoints", p.breakpoints},
          {"min_gap", p.min_gap},         {"scale_lo", p.scale_lo},
          {"scale_hi", p.scale_hi},       {"noise_sigma", p.noise_sigma}};
}

namespace {

// Piecewise-linear curve through `knots` equally spaced breakpoints spanning
// [0, t-1], sampled at integer time points.
Eigen::VectorXd sample_template(Rng& rng, int t, int knots) {
  Eigen::VectorXd heights(knots);
  for (int i = 0; i < knots; ++i) heights(i) = rng.uniform(-1.0, 1.0);
  Eigen::VectorXd curve(t);
  const double span = static_cast<double>(t - 1);
  for (int s = 0; s < t; ++s) {
    const double pos = static_cast<double>(s) / span * (knots - 1);
    const int seg = std::min(static_cast<int>(pos), knots - 2);
    const double w = pos - seg;
    curve(s) = (1.0 - w) * heights(seg) + w * heights(seg + 1);
  }
  return curve;
}

}  // namespace

SequenceDataset simulate(const SimulationParams& p) {
  if (p.n_per_class < 1) throw std::invalid_argument("simulate: n_per_class must be >= 1");
  if (p.t < 3) throw std::invalid_argument("simulate: t must be >= 3");
  if (p.d < 1) throw std::invalid_argument("simulate: d must be >= 1");
  if (p.d_informative < 0 || p.d_informative > p.d) {
    throw std::invalid_argument("simulate: d_informative must lie in [0, d]");
  }
  if (p.breakpoints < 2) throw std::invalid_argument("simulate: breakpoints must be >= 2");
  if (!(p.noise_sigma >= 0.0) || !(p.scale_lo <= p.scale_hi)) {
    throw std::invalid_argument("simulate: invalid noise or scale range");
  }
  if (p.d_informative == 0) warn("simulate: d_informative = 0, classes are indistinguishable");

  Rng rng(p.seed);
  std::vector<int> order(p.d);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order.begin(), order.end());
  std::vector<int> informative(order.begin(), order.begin() + p.d_informative);
  std::sort(informative.begin(), informative.end());
  std::vector<bool> is_informative(p.d, false);
  for (int i : informative) is_informative[i] = true;

  // templates[c] is t x d
  std::array<Eigen::MatrixXd, 2> templates{Eigen::MatrixXd(p.t, p.d), Eigen::MatrixXd(p.t, p.d)};
  for (int j = 0; j < p.d; ++j) {
    if (is_informative[j]) {
      constexpr int kMaxAttempts = 100000;
      int attempt = 0;
      for (;; ++attempt) {
        if (attempt == kMaxAttempts) {
          throw std::invalid_argument("simulate: cannot reach min_gap with the given template shape");
        }
        Eigen::VectorXd a = sample_template(rng, p.t, p.breakpoints);
        Eigen::VectorXd b = sample_template(rng, p.t, p.breakpoints);
        if ((a - b).cwiseAbs().maxCoeff() >= p.min_gap) {
          templates[0].col(j) = a;
          templates[1].col(j) = b;
          break;
        }
      }
    } else {
      Eigen::VectorXd shared = sample_template(rng, p.t, p.breakpoints);
      templates[0].col(j) = shared;
      templates[1].col(j) = shared;
    }
  }

  SequenceDataset out;
  const int width = p.d >= 1000 ? 4 : 3;
  for (int j = 0; j < p.d; ++j) {
    std::string num = std::to_string(j + 1);
    out.feature_names.push_back("f" + std::string(std::max(0, width - static_cast<int>(num.size())), '0') + num);
  }
  for (int s = 0; s < p.t; ++s) out.time_stamps.push_back(s);

  const int total = 2 * p.n_per_class;
  const int id_width = static_cast<int>(std::to_string(total - 1).size());
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < p.n_per_class; ++i) {
      const double scale = rng.uniform(p.scale_lo, p.scale_hi);
      Eigen::MatrixXd x = scale * templates[c];
      for (Eigen::Index r = 0; r < x.rows(); ++r) {
        for (Eigen::Index k = 0; k < x.cols(); ++k) x(r, k) += p.noise_sigma * rng.normal();
      }
      const int idx = c * p.n_per_class + i;
      std::string num = std::to_string(idx);
      out.sample_ids.push_back("s" + std::string(id_width - num.size(), '0') + num);
      out.labels.push_back(std::to_string(c));
      out.sequences.push_back(std::move(x));
    }
  }
  out.metadata = {{"generator", to_json(p)}, {"informative_features", informative}};
  out.validate();
  return out;
}

Eigen::MatrixXd flatten(const std::vector<Eigen::MatrixXd>& sequences) {
  if (sequences.empty()) return {};
  Eigen::Index rows = 0;
  for (const auto& s : sequences) rows += s.rows();
  Eigen::MatrixXd out(rows, sequences.front().cols());
  Eigen::Index r = 0;
  for (const auto& s : sequences) {
    out.middleRows(r, s.rows()) = s;
    r += s.rows();
  }
  return out;
}

}  // namespace tempomap
