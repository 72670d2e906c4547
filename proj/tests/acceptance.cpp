// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "tempomap/cli.hpp"
#include "tempomap/serialize.hpp"
#include "test_support.hpp"

using namespace tempomap;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kA1MinAccuracy = 0.88;
constexpr double kA1MaxSeconds = 600.0;
constexpr int kA2MinRecovered = 9;
constexpr double kA4AbsTol = 1e-9;
constexpr double kA5MaxDecrease = 1e-8;
constexpr double kA6Step = 1e-6;
constexpr double kA6RelTol = 1e-4;
constexpr double kA7Tol = 1e-12;
constexpr double kA8Tol = 1e-12;
constexpr double kA9MinEigen = -1e-8;
constexpr double kA9MaxKkt = 1e-3;

int failures = 0;

void report(const std::string& id, bool pass, const std::string& detail) {
  std::cout << id << (pass ? " PASS " : " FAIL ") << detail << std::endl;
  if (!pass) ++failures;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Runs `body`, turning an escaped exception into a FAIL line.
void guarded(const std::string& id, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(id, false, std::string("exception: ") + e.what());
  }
}

struct StudyRun {
  fs::path dir;
  fs::path data;
  std::vector<std::string> crossval_args;
  double seconds = 0.0;
  int exit_code = -1;
};

StudyRun run_default_study() {
  StudyRun run;
  run.dir = testing::scratch_dir("acceptance_study");
  run.data = run.dir / "study.csv";
  if (run_cli({"simulate", "--out", run.data.string()}) != kExitOk) throw std::runtime_error("simulate failed");
  run.crossval_args = {"crossval", "--data", run.data.string(), "--out-dir", (run.dir / "run1").string()};
  const auto start = std::chrono::steady_clock::now();
  run.exit_code = run_cli(run.crossval_args);
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

void a1_a2_a10() {
  StudyRun run;
  try {
    run = run_default_study();
  } catch (const std::exception& e) {
    for (const char* id : {"A1", "A2", "A10"}) report(id, false, std::string("exception: ") + e.what());
    return;
  }
  const auto report_path = run.dir / "run1" / "cv_report.json";
  guarded("A1", [&] {
    const auto r = report_from_json(read_json(report_path));
    const bool pass = run.exit_code == kExitOk && r.svm_mean >= kA1MinAccuracy && run.seconds <= kA1MaxSeconds;
    report("A1", pass,
           "svm accuracy " + fmt(r.svm_mean) + " +/- " + fmt(r.svm_std) + " over " + std::to_string(r.folds) + "x" +
               std::to_string(r.reps) + " CV (>= " + fmt(kA1MinAccuracy) + "), runtime " + fmt(run.seconds) +
               " s (<= " + fmt(kA1MaxSeconds) + ")");
  });
  guarded("A2", [&] {
    const auto r = report_from_json(read_json(report_path));
    const auto meta = load_metadata(fs::path(run.data).replace_extension(".meta.json"));
    const std::set<int> planted = meta["metadata"]["informative_features"].get<std::set<int>>();
    const auto top = top_features(relevance_profile(r.per_fold_relevance), 10);
    const auto hits = std::count_if(top.begin(), top.end(), [&](int i) { return planted.count(i) > 0; });
    report("A2", hits >= kA2MinRecovered,
           std::to_string(hits) + " of " + std::to_string(planted.size()) +
               " planted features in the top 10 by mean relevance (>= " + std::to_string(kA2MinRecovered) + ")");
  });
  guarded("A10", [&] {
    auto args = run.crossval_args;
    args[4] = (run.dir / "run2").string();
    const int code = run_cli(args);
    bool same = code == kExitOk;
    for (const char* f : {"cv_report.json", "cv_summary.csv", "relevance.csv"}) {
      same = same && slurp(run.dir / "run1" / f) == slurp(run.dir / "run2" / f);
    }
    report("A10", same, "two crossval runs with identical flags produce byte-identical report files");
  });
}

void a4() {
  Rng rng(404);
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const int k = 1 + static_cast<int>(rng.below(4));
    const auto t = 1 + static_cast<Eigen::Index>(rng.below(5));
    const auto d = 1 + static_cast<Eigen::Index>(rng.below(3));
    const auto model = testing::random_model(rng, k, d);
    const auto metric = MetricParams::uniform(d, MetricKind::diagonal);
    const Eigen::MatrixXd x = testing::random_matrix(rng, t, d, 1.5);
    const Eigen::MatrixXd log_emit = log_emissions(x, model.prototypes(), model.gtm.beta, metric);
    const double fwd = sequence_loglik(model, x, metric);
    worst = std::max(worst, std::abs(fwd - testing::brute_force_loglik(model, log_emit)));
  }
  report("A4", worst <= kA4AbsTol,
         "max |forward - enumeration| = " + fmt(worst) + " over 200 models (<= " + fmt(kA4AbsTol) + ")");
}

void a5() {
  Rng rng(505);
  double worst = 0.0;
  int runs = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const int k_side = 2 + static_cast<int>(rng.below(3));
    const auto d = 1 + static_cast<Eigen::Index>(rng.below(6));
    const auto t = 1 + static_cast<Eigen::Index>(rng.below(8));
    const auto sequences = testing::random_sequences(rng, 5 + static_cast<int>(rng.below(20)), t, d);
    TrainConfig cfg;
    cfg.grid_rows = k_side;
    cfg.grid_cols = k_side;
    cfg.relevance = false;
    cfg.tol = 0.0;
    cfg.max_epochs = 51;
    cfg.seed = rng.below(1u << 30);
    // One model per run: per-model beta, so each run is a plain EM sequence.
    const auto model = fit_submodels({sequences}, {"only"}, cfg);
    const auto& ll = model.log.loglik;
    for (std::size_t e = 1; e < ll.size(); ++e) worst = std::max(worst, ll[e - 1][0] - ll[e][0]);
    runs += ll.size() == 51;
  }
  report("A5", worst <= kA5MaxDecrease && runs == 20,
         "largest per-epoch decrease " + fmt(worst) + " over 20 runs x 50 epochs (<= " + fmt(kA5MaxDecrease) + ")");
}

MetricParams random_metric(Rng& rng, Eigen::Index d, MetricKind kind) {
  MetricParams m = MetricParams::uniform(d, kind);
  if (kind == MetricKind::diagonal) {
    m.lambda = testing::random_matrix(rng, d, 1).cwiseAbs().array() + 0.05;
  } else {
    m.omega = testing::random_matrix(rng, d, d);
  }
  m.normalize();
  return m;
}

void a6() {
  Rng rng(606);
  const TimeDistance dist{TimeDistanceKind::functional, 1.0, 2};
  for (auto kind : {MetricKind::diagonal, MetricKind::full}) {
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
      // Scale invariance of the cost makes the D = 1 gradient identically zero, so D starts at 2.
      const auto d = 2 + static_cast<Eigen::Index>(rng.below(9));
      const auto t = 1 + static_cast<Eigen::Index>(rng.below(6));
      const auto metric = random_metric(rng, d, kind);
      const Eigen::MatrixXd x = testing::random_matrix(rng, t, d);
      const Eigen::MatrixXd plus = testing::random_matrix(rng, t, d);
      const Eigen::MatrixXd minus = testing::random_matrix(rng, t, d);
      const Eigen::MatrixXd g = metric_gradient(x, plus, minus, metric, dist).values;
      const Eigen::VectorXd dp = per_dimension_distances(x, plus, dist);
      const Eigen::VectorXd dm = per_dimension_distances(x, minus, dist);
      auto cost = [&](const MetricParams& m) {
        return grgtm_cost(weighted_distance(dp, m), weighted_distance(dm, m));
      };
      Eigen::MatrixXd fd = Eigen::MatrixXd::Zero(g.rows(), g.cols());
      for (Eigen::Index i = 0; i < g.size(); ++i) {
        auto hi = metric;
        auto lo = metric;
        (kind == MetricKind::diagonal ? hi.lambda.data() : hi.omega.data())[i] += kA6Step;
        (kind == MetricKind::diagonal ? lo.lambda.data() : lo.omega.data())[i] -= kA6Step;
        fd.data()[i] = (cost(hi) - cost(lo)) / (2.0 * kA6Step);
      }
      worst = std::max(worst, (g - fd).norm() / fd.norm());
    }
    const std::string id = kind == MetricKind::diagonal ? "A6 (diagonal)" : "A6 (full)";
    report(id, worst <= kA6RelTol,
           "max relative error vs central differences " + fmt(worst) + " over 100 instances (<= " + fmt(kA6RelTol) +
               ")");
  }
}

void a7() {
  Rng rng(707);
  for (auto kind : {MetricKind::diagonal, MetricKind::full}) {
    const Eigen::Index d = 8;
    auto m = MetricParams::uniform(d, kind);
    double worst = 0.0;
    bool nonneg = true;
    for (int step = 0; step < 1000; ++step) {
      const Eigen::MatrixXd grad = testing::random_matrix(rng, d, kind == MetricKind::diagonal ? 1 : d);
      m = apply_metric_update(m, grad, rng.uniform(1e-3, 0.5));
      worst = std::max(worst, std::abs(m.constraint_value() - 1.0));
      if (kind == MetricKind::diagonal) nonneg = nonneg && (m.lambda.array() >= 0.0).all();
    }
    const std::string id = kind == MetricKind::diagonal ? "A7 (diagonal)" : "A7 (full)";
    report(id, worst < kA7Tol && nonneg,
           "max constraint deviation " + fmt(worst) + " over 1000 updates (< " + fmt(kA7Tol) + ")");
  }
}

void a8() {
  Rng rng(808);
  double worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const auto n = 1 + static_cast<std::size_t>(rng.below(20));
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const double tau = rng.uniform(0.1, 3.0);
    const int p = 1 + static_cast<int>(rng.below(3));
    std::vector<double> u(n), v(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double mag = rng.uniform() < 0.1 ? 0.0 : rng.uniform(0.0, 1.0);
      u[i] = rng.uniform(-1.0, 1.0);
      v[i] = u[i] - sign * mag;
      w[i] = u[i] - v[i];
    }
    double acc = 0.0;
    for (double x : w) acc += std::pow(std::abs(x), p);
    const double expected = tau * std::pow(acc, 1.0 / p);
    worst = std::max(worst, std::abs(func_distance(u, v, tau, p) - expected));
  }
  const std::vector<double> a{1.0, -1.0};
  const std::vector<double> zero{0.0, 0.0};
  const double crossing = func_distance(a, zero, 1.0, 1);
  report("A8", worst <= kA8Tol && std::abs(crossing - 1.5) <= kA8Tol,
         "max deviation from tau * p-norm " + fmt(worst) + " over 1000 series (<= " + fmt(kA8Tol) +
             "), crossing case (1,-1) = " + fmt(crossing));
}

// Largest KKT violation of a trained machine, recomputed from its decision function.
double kkt_residual(const BinarySvm& svm, const std::vector<LikelihoodFeatures>& xs, const std::vector<int>& ys,
                    double c) {
  double worst = 0.0;
  for (std::size_t j = 0; j < svm.support_features.size(); ++j) {
    const auto& f = svm.support_features[j];
    int y = 0;
    for (std::size_t i = 0; i < xs.size() && y == 0; ++i) {
      if (xs[i].lik == f.lik) y = ys[i];
    }
    const double a = svm.alpha(static_cast<Eigen::Index>(j));
    if (a > 0.0) y = svm.coefficients(static_cast<Eigen::Index>(j)) > 0.0 ? 1 : -1;
    const double margin = y * svm.decision(f);
    if (a <= 0.0) {
      worst = std::max(worst, 1.0 - margin);
    } else if (a >= c) {
      worst = std::max(worst, margin - 1.0);
    } else {
      worst = std::max(worst, std::abs(margin - 1.0));
    }
  }
  return worst;
}

void a9() {
  Rng rng(909);
  double min_eig = std::numeric_limits<double>::infinity();
  double worst_kkt = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    SimulationParams sp;
    sp.n_per_class = 8 + static_cast<int>(rng.below(8));
    sp.t = 3 + static_cast<int>(rng.below(5));
    sp.d = 3 + static_cast<int>(rng.below(6));
    sp.d_informative = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(sp.d)));
    sp.noise_sigma = rng.uniform(0.05, 0.6);
    sp.seed = rng.below(1u << 30);
    const auto data = simulate(sp);
    TrainConfig cfg;
    cfg.max_epochs = 12;
    cfg.relevance_start_epoch = 4;
    cfg.seed = rng.below(1u << 30);
    const auto model = train(data, cfg);
    const auto norm = prepare_for_model(model, data);
    std::vector<LikelihoodFeatures> feats;
    std::vector<int> ys;
    for (std::size_t i = 0; i < norm.size(); ++i) {
      feats.push_back(likelihood_features(model, norm.sequences[i]));
      ys.push_back(norm.labels[i] == model.label_set[0] ? 1 : -1);
    }
    const Eigen::MatrixXd gram = gram_matrix(feats);
    min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram).eigenvalues().minCoeff());
    SvmOptions opt;
    opt.c = cfg.svm_c;
    const auto svm = train_binary_svm(feats, ys, opt);
    worst_kkt = std::max({worst_kkt, svm.kkt_gap, kkt_residual(svm, feats, ys, opt.c)});
  }
  report("A9", min_eig >= kA9MinEigen && worst_kkt <= kA9MaxKkt,
         "min Gram eigenvalue " + fmt(min_eig) + " (>= " + fmt(kA9MinEigen) + "), max KKT residual " +
             fmt(worst_kkt) + " (<= " + fmt(kA9MaxKkt) + ") over 50 trained models");
}

}  // namespace

int main() {
  std::cout << std::unitbuf;
  guarded("A4", a4);
  guarded("A5", a5);
  guarded("A6", a6);
  guarded("A7", a7);
  guarded("A8", a8);
  guarded("A9", a9);
  std::cout << "A3 INFO documentation only: the clinical cohort results need data that is not distributed here"
            << std::endl;
  a1_a2_a10();
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
