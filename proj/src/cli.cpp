#include "tempomap/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <CLI11.hpp>

#include "tempomap/classify.hpp"
#include "tempomap/dataset.hpp"
#include "tempomap/errors.hpp"
#include "tempomap/eval.hpp"
#include "tempomap/serialize.hpp"
#include "tempomap/sgtm.hpp"

namespace tempomap {
namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Training flags layered over defaults and an optional --config file.
struct TrainFlags {
  std::string config_path;
  TrainConfig cfg;
  std::string metric = "diagonal";
  std::string time_distance = "functional";
  bool no_relevance = false;
  std::vector<std::pair<CLI::Option*, std::function<void(TrainConfig&)>>> setters;

  template <typename T>
  void bind(CLI::App* app, const std::string& name, T TrainConfig::*field, const std::string& help) {
    auto* opt = app->add_option(name, cfg.*field, help);
    setters.emplace_back(opt, [this, field](TrainConfig& c) { c.*field = cfg.*field; });
  }

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON file overriding training defaults");
    bind(app, "--grid-rows", &TrainConfig::grid_rows, "latent grid rows");
    bind(app, "--grid-cols", &TrainConfig::grid_cols, "latent grid columns");
    bind(app, "--basis-rows", &TrainConfig::basis_rows, "basis grid rows");
    bind(app, "--basis-cols", &TrainConfig::basis_cols, "basis grid columns");
    bind(app, "--max-epochs", &TrainConfig::max_epochs, "maximum EM epochs");
    bind(app, "--tol", &TrainConfig::tol, "relative log-likelihood convergence tolerance");
    bind(app, "--epsilon", &TrainConfig::epsilon, "metric learning rate");
    bind(app, "--epsilon-decay", &TrainConfig::epsilon_decay, "learning rate factor per relevance epoch");
    bind(app, "--relevance-start", &TrainConfig::relevance_start_epoch, "EM epochs before metric learning");
    bind(app, "--func-p", &TrainConfig::func_p, "exponent of the functional norm");
    bind(app, "--tau", &TrainConfig::tau, "time step of the functional norm");
    bind(app, "--svm-c", &TrainConfig::svm_c, "SVM box constraint");
    bind(app, "--basis-width", &TrainConfig::basis_width_factor, "basis width in units of basis spacing");
    bind(app, "--seed", &TrainConfig::seed, "random seed");
    auto* m = app->add_option("--metric", metric, "diagonal|full")->check(CLI::IsMember({"diagonal", "full"}));
    setters.emplace_back(m, [this](TrainConfig& c) { c.metric_kind = metric_kind_from_string(metric); });
    auto* t = app->add_option("--time-distance", time_distance, "functional|euclidean")
                  ->check(CLI::IsMember({"functional", "euclidean"}));
    setters.emplace_back(t, [this](TrainConfig& c) {
      c.time_distance = time_distance == "euclidean" ? TimeDistanceKind::euclidean : TimeDistanceKind::functional;
    });
    auto* nr = app->add_flag("--no-relevance", no_relevance, "keep the metric uniform");
    setters.emplace_back(nr, [](TrainConfig& c) { c.relevance = false; });
  }

  TrainConfig resolve() const {
    TrainConfig out;
    if (!config_path.empty()) {
      try {
        merge_json(read_json(config_path), out);
      } catch (const std::invalid_argument& e) {
        throw UsageError(std::string("--config: ") + e.what());
      }
    }
    for (const auto& [opt, set] : setters) {
      if (opt->count() > 0) set(out);
    }
    try {
      out.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return out;
  }
};

int resolve_threads(const CLI::Option* opt, int flag_value) {
  if (opt->count() > 0) return std::max(1, flag_value);
  if (const char* env = std::getenv("TEMPOMAP_THREADS"); env != nullptr && *env != '\0') {
    try {
      return std::max(1, std::stoi(env));
    } catch (const std::exception&) {
      throw UsageError(std::string("TEMPOMAP_THREADS is not an integer: ") + env);
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

SvmModel train_svm(const SgtmModel& model, const SequenceDataset& train_set) {
  const SequenceDataset norm = prepare_for_model(model, train_set);
  std::vector<LikelihoodFeatures> features;
  for (const auto& x : norm.sequences) features.push_back(likelihood_features(model, x));
  SvmOptions options;
  options.c = model.config.svm_c;
  return svm_train(features, norm.labels, model.label_set, options);
}

void cmd_simulate(const SimulationParams& params, const fs::path& out, fs::path meta) {
  const SequenceDataset data = simulate(params);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_csv(data, out);
  if (meta.empty()) meta = fs::path(out).replace_extension(".meta.json");
  save_metadata(data, meta);
  std::cout << "simulated " << data.size() << " sequences, T=" << data.length() << ", D=" << data.dims() << " -> "
            << out.string() << '\n';
}

void cmd_train(const fs::path& data_path, const fs::path& out, const TrainConfig& config) {
  const SequenceDataset data = load_csv(data_path);
  ModelBundle bundle{train(data, config), std::nullopt};
  bundle.svm = train_svm(bundle.model, data);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_bundle(bundle, out);
  std::cout << "trained " << bundle.model.submodels.size() << " class models in " << bundle.model.log.epochs
            << " epochs (converged: " << (bundle.model.log.converged ? "yes" : "no") << ") -> " << out.string()
            << '\n';
}

void cmd_crossval(const fs::path& data_path, const fs::path& out_dir, const TrainConfig& config,
                  const CvOptions& options) {
  const SequenceDataset data = load_csv(data_path);
  const CvReport report = stratified_cv(data, config, options);
  fs::create_directories(out_dir);
  write_json(to_json(report), out_dir / "cv_report.json");
  write_cv_summary_csv(report, out_dir / "cv_summary.csv");
  write_relevance_csv(relevance_profile(report.per_fold_relevance), report.feature_names, out_dir / "relevance.csv");
  std::cout << "svm accuracy " << report.svm_mean << " +/- " << report.svm_std << ", ml accuracy " << report.ml_mean
            << " +/- " << report.ml_std << " -> " << out_dir.string() << '\n';
}

void cmd_predict(const fs::path& model_path, const fs::path& data_path, const fs::path& out) {
  const ModelBundle bundle = load_bundle(model_path);
  if (!bundle.svm) throw DataError(model_path.string() + ": model bundle has no SVM");
  const SgtmModel& model = bundle.model;
  const SequenceDataset data = prepare_for_model(model, load_csv(data_path));
  auto os = open_out(out);
  os << "# schema=tempomap-predictions-1\n";
  os << "sample_id,predicted_label,decision_value,ml_label";
  for (const auto& l : model.label_set) os << ",loglik_" << l;
  os << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto f = likelihood_features(model, data.sequences[i]);
    const auto p = svm_predict(*bundle.svm, f);
    os << data.sample_ids[i] << ',' << p.label << ',' << fmt(p.decision) << ','
       << model.label_set[argmax_label(f.loglik_raw)];
    for (Eigen::Index l = 0; l < f.loglik_raw.size(); ++l) os << ',' << fmt(f.loglik_raw(l));
    os << '\n';
  }
  std::cout << "predicted " << data.size() << " sequences -> " << out.string() << '\n';
}

void cmd_export_map(const fs::path& model_path, const fs::path& data_path, const fs::path& out,
                    const std::string& submodel_label) {
  const ModelBundle bundle = load_bundle(model_path);
  const SgtmModel& model = bundle.model;
  if (!submodel_label.empty()) {
    const auto& ls = model.label_set;
    if (std::find(ls.begin(), ls.end(), submodel_label) == ls.end()) {
      throw UsageError("--submodel: label '" + submodel_label + "' not in model");
    }
  }
  const SequenceDataset data = prepare_for_model(model, load_csv(data_path));
  auto os = open_out(out);
  os << "# schema=tempomap-map-1\n";
  os << "sample_id,label,submodel,t,time,state,grid_x,grid_y,is_start,is_end\n";
  const auto& ls = model.label_set;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& x = data.sequences[i];
    // The sample's own class model; unknown labels fall back to the most likely one.
    std::string target = submodel_label;
    if (target.empty()) {
      target = std::find(ls.begin(), ls.end(), data.labels[i]) != ls.end() ? data.labels[i]
                                                                            : classify_ml(model, x);
    }
    const GtmTtModel& sub = model.submodel(target);
    const auto path = viterbi_path(sub, x, model.metric);
    for (std::size_t t = 0; t < path.size(); ++t) {
      const auto k = path[t];
      os << data.sample_ids[i] << ',' << data.labels[i] << ',' << target << ',' << t << ','
         << fmt(data.time_stamps[t]) << ',' << k + 1 << ',' << fmt(sub.grid.points(k, 0)) << ','
         << fmt(sub.grid.points(k, 1)) << ',' << (t == 0 ? 1 : 0) << ',' << (t + 1 == path.size() ? 1 : 0) << '\n';
    }
  }
  std::cout << "exported " << data.size() << " trajectories -> " << out.string() << '\n';
}

void cmd_relevance(const fs::path& model_path, const fs::path& report_path, const fs::path& out) {
  std::vector<Eigen::VectorXd> per_fold;
  std::vector<std::string> names;
  if (!model_path.empty()) {
    const ModelBundle bundle = load_bundle(model_path);
    per_fold.push_back(bundle.model.metric.relevance());
    names = bundle.model.feature_names;
  } else {
    const CvReport report = report_from_json(read_json(report_path));
    per_fold = report.per_fold_relevance;
    names = report.feature_names;
  }
  if (per_fold.empty()) throw DataError("no relevance vectors to summarize");
  const auto profile = relevance_profile(per_fold);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_relevance_csv(profile, names, out);
  std::cout << profile.selected.size() << " of " << profile.mean.size() << " features above zeta=" << profile.zeta
            << " -> " << out.string() << '\n';
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args);
}

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Supervised generative topographic mapping for labeled time series"};
  app.require_subcommand(1);

  SimulationParams sim;
  std::string sim_out, sim_meta;
  auto* simulate_cmd = app.add_subcommand("simulate", "generate the synthetic two-class study");
  simulate_cmd->add_option("--out", sim_out, "dataset CSV")->required();
  simulate_cmd->add_option("--meta", sim_meta, "metadata JSON (default: <out>.meta.json)");
  simulate_cmd->add_option("--n-per-class", sim.n_per_class)->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--t", sim.t)->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--d", sim.d)->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--d-informative", sim.d_informative)->check(CLI::NonNegativeNumber);
  simulate_cmd->add_option("--seed", sim.seed);
  simulate_cmd->add_option("--breakpoints", sim.breakpoints)->check(CLI::Range(2, 1000));
  simulate_cmd->add_option("--min-gap", sim.min_gap)->check(CLI::NonNegativeNumber);
  simulate_cmd->add_option("--noise-sigma", sim.noise_sigma)->check(CLI::NonNegativeNumber);
  simulate_cmd->add_option("--scale-lo", sim.scale_lo);
  simulate_cmd->add_option("--scale-hi", sim.scale_hi);

  std::string train_data, train_out;
  TrainFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "fit a model on a labeled dataset");
  train_cmd->add_option("--data", train_data, "dataset CSV")->required();
  train_cmd->add_option("--out", train_out, "model bundle JSON")->required();
  train_flags.attach(train_cmd);

  std::string cv_data, cv_out;
  CvOptions cv_options;
  int cv_threads = 1;
  TrainFlags cv_flags;
  auto* cv_cmd = app.add_subcommand("crossval", "repeated stratified cross-validation");
  cv_cmd->add_option("--data", cv_data, "dataset CSV")->required();
  cv_cmd->add_option("--out-dir", cv_out, "directory for report files")->required();
  cv_cmd->add_option("--folds", cv_options.folds)->check(CLI::Range(2, 1000000));
  cv_cmd->add_option("--reps", cv_options.reps)->check(CLI::PositiveNumber);
  auto* cv_seed = cv_cmd->add_option("--cv-seed", cv_options.seed, "fold assignment seed (default: --seed)");
  auto* threads_opt = cv_cmd->add_option("--threads", cv_threads, "worker threads (env TEMPOMAP_THREADS)");
  cv_flags.attach(cv_cmd);

  std::string pred_model, pred_data, pred_out;
  auto* predict_cmd = app.add_subcommand("predict", "classify sequences with a trained model");
  predict_cmd->add_option("--model", pred_model)->required();
  predict_cmd->add_option("--data", pred_data)->required();
  predict_cmd->add_option("--out", pred_out, "predictions CSV")->required();

  std::string map_model, map_data, map_out, map_submodel;
  auto* map_cmd = app.add_subcommand("export-map", "export most likely latent trajectories");
  map_cmd->add_option("--model", map_model)->required();
  map_cmd->add_option("--data", map_data)->required();
  map_cmd->add_option("--out", map_out, "trajectory CSV")->required();
  map_cmd->add_option("--submodel", map_submodel, "map every sample onto this class model");

  std::string rel_model, rel_report, rel_out;
  auto* rel_cmd = app.add_subcommand("relevance", "export a relevance profile");
  auto* rel_model_opt = rel_cmd->add_option("--model", rel_model);
  auto* rel_report_opt = rel_cmd->add_option("--report", rel_report, "crossval report JSON");
  rel_model_opt->excludes(rel_report_opt);
  rel_cmd->add_option("--out", rel_out, "relevance CSV")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (simulate_cmd->parsed()) {
      if (sim.scale_lo <= 0.0 || sim.scale_hi < sim.scale_lo) throw UsageError("scale range must satisfy 0 < lo <= hi");
      cmd_simulate(sim, sim_out, sim_meta);
    } else if (train_cmd->parsed()) {
      cmd_train(train_data, train_out, train_flags.resolve());
    } else if (cv_cmd->parsed()) {
      const TrainConfig cfg = cv_flags.resolve();
      if (cv_seed->count() == 0) cv_options.seed = cfg.seed;
      cv_options.threads = resolve_threads(threads_opt, cv_threads);
      cmd_crossval(cv_data, cv_out, cfg, cv_options);
    } else if (predict_cmd->parsed()) {
      cmd_predict(pred_model, pred_data, pred_out);
    } else if (map_cmd->parsed()) {
      cmd_export_map(map_model, map_data, map_out, map_submodel);
    } else if (rel_cmd->parsed()) {
      if (rel_model.empty() && rel_report.empty()) throw UsageError("relevance: one of --model or --report is required");
      cmd_relevance(rel_model, rel_report, rel_out);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitOk;
}

}  // namespace tempomap
