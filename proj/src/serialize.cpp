#include "tempomap/serialize.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "tempomap/errors.hpp"

namespace tempomap {

using nlohmann::json;

namespace {

json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json imatrix_to_json(const Eigen::MatrixXi& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<int> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[c] = m(r, c);
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXi imatrix_from_json(const json& j) {
  const auto rows = j.get<std::vector<std::vector<int>>>();
  Eigen::MatrixXi m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  }
  return m;
}

// JSON has no NaN; store null.
json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double from_nullable(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

void require_version(const json& j, const char* expected, const char* what) {
  if (!j.is_object() || !j.contains("version")) throw DataError(std::string(what) + ": missing version field");
  const auto v = j.at("version").get<std::string>();
  if (v != expected) {
    throw DataError(std::string(what) + ": unsupported version '" + v + "' (expected '" + expected + "')");
  }
}

template <typename F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw DataError(std::string(what) + ": malformed JSON: " + e.what());
  }
}

}  // namespace

json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw DataError("matrix: data length does not match shape");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  }
  return m;
}

json to_json(const MetricParams& metric) {
  json j{{"kind", to_string(metric.kind)}};
  if (metric.kind == MetricKind::diagonal) {
    j["lambda"] = vector_to_json(metric.lambda);
  } else {
    j["omega"] = matrix_to_json(metric.omega);
  }
  return j;
}

MetricParams metric_from_json(const json& j) {
  MetricParams m;
  m.kind = metric_kind_from_string(j.at("kind").get<std::string>());
  if (m.kind == MetricKind::diagonal) {
    m.lambda = vector_from_json(j.at("lambda"));
  } else {
    m.omega = matrix_from_json(j.at("omega"));
  }
  return m;
}

json to_json(const GtmTtModel& model, const std::string& metric_ref) {
  return {{"version", kModelVersion},
          {"grid", {{"rows", model.grid.rows}, {"cols", model.grid.cols}, {"points", matrix_to_json(model.grid.points)}}},
          {"basis",
           {{"rows", model.basis.rows},
            {"cols", model.basis.cols},
            {"centers", matrix_to_json(model.basis.centers)},
            {"width", model.basis.width},
            {"includes_bias", model.basis.includes_bias}}},
          {"W", matrix_to_json(model.gtm.W)},
          {"beta", model.gtm.beta},
          {"pi", vector_to_json(model.pi)},
          {"A", matrix_to_json(model.A)},
          {"metric_ref", metric_ref}};
}

GtmTtModel gtm_tt_from_json(const json& j) {
  return guarded("GTM-TT model", [&] {
    require_version(j, kModelVersion, "GTM-TT model");
    GtmTtModel m;
    const auto& g = j.at("grid");
    m.grid.rows = g.at("rows").get<int>();
    m.grid.cols = g.at("cols").get<int>();
    m.grid.points = matrix_from_json(g.at("points"));
    const auto& b = j.at("basis");
    m.basis.rows = b.at("rows").get<int>();
    m.basis.cols = b.at("cols").get<int>();
    m.basis.centers = matrix_from_json(b.at("centers"));
    m.basis.width = b.at("width").get<double>();
    m.basis.includes_bias = b.at("includes_bias").get<bool>();
    m.gtm.phi = compute_phi(m.grid, m.basis);
    m.gtm.W = matrix_from_json(j.at("W"));
    m.gtm.beta = j.at("beta").get<double>();
    m.pi = vector_from_json(j.at("pi"));
    m.A = matrix_from_json(j.at("A"));
    try {
      m.validate();
    } catch (const std::invalid_argument& e) {
      throw DataError(e.what());
    }
    return m;
  });
}

json to_json(const SvmModel& svm) {
  json machines = json::array();
  for (const auto& m : svm.machines) {
    json support = json::array();
    for (const auto& f : m.support_features) {
      support.push_back({{"lik", vector_to_json(f.lik)}, {"loglik", vector_to_json(f.loglik_raw)}});
    }
    machines.push_back({{"coefficients", vector_to_json(m.coefficients)},
                        {"alpha", vector_to_json(m.alpha)},
                        {"bias", m.bias},
                        {"kkt_gap", m.kkt_gap},
                        {"iterations", m.iterations},
                        {"support_features", support}});
  }
  return {{"label_set", svm.label_set}, {"c_param", svm.c_param}, {"machines", machines}};
}

SvmModel svm_from_json(const json& j) {
  SvmModel svm;
  svm.label_set = j.at("label_set").get<std::vector<std::string>>();
  svm.c_param = j.at("c_param").get<double>();
  for (const auto& m : j.at("machines")) {
    BinarySvm b;
    b.coefficients = vector_from_json(m.at("coefficients"));
    b.alpha = vector_from_json(m.at("alpha"));
    b.bias = m.at("bias").get<double>();
    b.kkt_gap = m.at("kkt_gap").get<double>();
    b.iterations = m.at("iterations").get<int>();
    for (const auto& f : m.at("support_features")) {
      b.support_features.push_back({vector_from_json(f.at("lik")), vector_from_json(f.at("loglik"))});
    }
    svm.machines.push_back(std::move(b));
  }
  return svm;
}

json to_json(const ModelBundle& bundle) {
  const auto& m = bundle.model;
  json submodels = json::array();
  for (const auto& s : m.submodels) submodels.push_back(to_json(s, "shared"));
  json ll = json::array();
  for (const auto& row : m.log.loglik) ll.push_back(row);
  json cost = json::array();
  for (double c : m.log.relevance_cost) cost.push_back(nullable(c));
  json j{{"version", kModelVersion},
         {"label_set", m.label_set},
         {"submodels", submodels},
         {"shared_beta", m.shared_beta},
         {"metric", to_json(m.metric)},
         {"norm_params", {{"mean", vector_to_json(m.norm_params.mean)}, {"std", vector_to_json(m.norm_params.std)}}},
         {"feature_names", m.feature_names},
         {"config", to_json(m.config)},
         {"training_log",
          {{"loglik", ll}, {"beta", m.log.beta}, {"relevance_cost", cost}, {"epochs", m.log.epochs},
           {"converged", m.log.converged}}}};
  if (bundle.svm) j["svm"] = to_json(*bundle.svm);
  return j;
}

ModelBundle bundle_from_json(const json& j) {
  return guarded("model bundle", [&] {
    require_version(j, kModelVersion, "model bundle");
    ModelBundle b;
    auto& m = b.model;
    m.label_set = j.at("label_set").get<std::vector<std::string>>();
    for (const auto& s : j.at("submodels")) m.submodels.push_back(gtm_tt_from_json(s));
    if (m.submodels.size() != m.label_set.size()) throw DataError("model bundle: submodel count does not match label set");
    m.shared_beta = j.at("shared_beta").get<double>();
    m.metric = metric_from_json(j.at("metric"));
    m.norm_params.mean = vector_from_json(j.at("norm_params").at("mean"));
    m.norm_params.std = vector_from_json(j.at("norm_params").at("std"));
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    try {
      m.config = config_from_json(j.at("config"));
    } catch (const std::invalid_argument& e) {
      throw DataError(std::string("model bundle: ") + e.what());
    }
    const auto& log = j.at("training_log");
    m.log.loglik = log.at("loglik").get<std::vector<std::vector<double>>>();
    m.log.beta = log.at("beta").get<std::vector<double>>();
    for (const auto& c : log.at("relevance_cost")) m.log.relevance_cost.push_back(from_nullable(c));
    m.log.epochs = log.at("epochs").get<int>();
    m.log.converged = log.at("converged").get<bool>();
    if (j.contains("svm")) b.svm = svm_from_json(j.at("svm"));
    return b;
  });
}

void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path) { write_json(to_json(bundle), path); }

ModelBundle load_bundle(const std::filesystem::path& path) { return bundle_from_json(read_json(path)); }

json to_json(const CvReport& r) {
  json rel = json::array();
  for (const auto& v : r.per_fold_relevance) rel.push_back(vector_to_json(v));
  return {{"version", kReportVersion},
          {"folds", r.folds},
          {"reps", r.reps},
          {"seed", r.seed},
          {"label_set", r.label_set},
          {"feature_names", r.feature_names},
          {"svm", {{"fold_accuracies", matrix_to_json(r.svm_accuracy)}, {"mean", r.svm_mean}, {"std", r.svm_std}}},
          {"ml", {{"fold_accuracies", matrix_to_json(r.ml_accuracy)}, {"mean", r.ml_mean}, {"std", r.ml_std}}},
          {"per_fold_relevance", rel},
          {"per_fold_epochs", r.per_fold_epochs},
          {"confusion", imatrix_to_json(r.confusion)},
          {"ml_confusion", imatrix_to_json(r.ml_confusion)},
          {"config", to_json(r.config)}};
}

CvReport report_from_json(const json& j) {
  return guarded("CV report", [&] {
    require_version(j, kReportVersion, "CV report");
    CvReport r;
    r.folds = j.at("folds").get<int>();
    r.reps = j.at("reps").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.label_set = j.at("label_set").get<std::vector<std::string>>();
    r.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    r.svm_accuracy = matrix_from_json(j.at("svm").at("fold_accuracies"));
    r.svm_mean = j.at("svm").at("mean").get<double>();
    r.svm_std = j.at("svm").at("std").get<double>();
    r.ml_accuracy = matrix_from_json(j.at("ml").at("fold_accuracies"));
    r.ml_mean = j.at("ml").at("mean").get<double>();
    r.ml_std = j.at("ml").at("std").get<double>();
    for (const auto& v : j.at("per_fold_relevance")) r.per_fold_relevance.push_back(vector_from_json(v));
    r.per_fold_epochs = j.at("per_fold_epochs").get<std::vector<int>>();
    r.confusion = imatrix_from_json(j.at("confusion"));
    r.ml_confusion = imatrix_from_json(j.at("ml_confusion"));
    try {
      r.config = config_from_json(j.at("config"));
    } catch (const std::invalid_argument& e) {
      throw DataError(std::string("CV report: ") + e.what());
    }
    return r;
  });
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void write_cv_summary_csv(const CvReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  const auto n_selected =
      report.per_fold_relevance.empty() ? 0 : relevance_profile(report.per_fold_relevance).selected.size();
  out << "# schema=tempomap-cv-summary-1\n";
  out << "classifier,mean_acc,std_acc,n_selected_features\n";
  out << "svm," << fmt(report.svm_mean) << ',' << fmt(report.svm_std) << ',' << n_selected << '\n';
  out << "ml," << fmt(report.ml_mean) << ',' << fmt(report.ml_std) << ',' << n_selected << '\n';
}

void write_relevance_csv(const RelevanceProfile& profile, const std::vector<std::string>& feature_names,
                         const std::filesystem::path& path) {
  if (static_cast<Eigen::Index>(feature_names.size()) != profile.mean.size()) {
    throw DataError("relevance export: feature name count does not match profile length");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "# schema=tempomap-relevance-1 zeta=" << fmt(profile.zeta) << '\n';
  out << "feature_name,relevance_mean,relevance_min,relevance_std,selected\n";
  std::vector<bool> selected(feature_names.size(), false);
  for (int i : profile.selected) selected[static_cast<std::size_t>(i)] = true;
  for (std::size_t i = 0; i < feature_names.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out << feature_names[i] << ',' << fmt(profile.mean(k)) << ',' << fmt(profile.min(k)) << ','
        << fmt(profile.std(k)) << ',' << (selected[i] ? 1 : 0) << '\n';
  }
}

}  // namespace tempomap
