#include "tempomap/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "tempomap/classify.hpp"
#include "tempomap/errors.hpp"
#include "tempomap/rng.hpp"
#include "tempomap/sgtm.hpp"

namespace tempomap {

std::vector<int> stratified_assignment(const std::vector<std::string>& labels, int folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("stratified_assignment: folds must be >= 2");
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (const auto& [label, members] : by_class) {
    if (members.size() < static_cast<std::size_t>(folds)) {
      throw DataError("stratified_cv: class '" + label + "' has " + std::to_string(members.size()) +
                      " samples, fewer than " + std::to_string(folds) + " folds");
    }
  }
  Rng rng(seed);
  std::vector<int> assignment(labels.size(), -1);
  int next = 0;
  for (auto& [label, members] : by_class) {
    rng.shuffle(members.begin(), members.end());
    for (auto i : members) {
      assignment[i] = next;
      next = (next + 1) % folds;
    }
  }
  return assignment;
}

std::pair<double, double> mean_and_std(const Eigen::MatrixXd& values) {
  const auto n = values.size();
  if (n == 0) return {0.0, 0.0};
  const double mean = values.mean();
  if (n == 1) return {mean, 0.0};
  const double ss = (values.array() - mean).square().sum();
  return {mean, std::sqrt(ss / static_cast<double>(n - 1))};
}

namespace {

struct FoldOutcome {
  double svm_acc = 0.0;
  double ml_acc = 0.0;
  Eigen::VectorXd relevance;
  int epochs = 0;
  Eigen::MatrixXi confusion;
  Eigen::MatrixXi ml_confusion;
};

FoldOutcome run_fold(const SequenceDataset& data, const std::vector<int>& assignment, int fold,
                     const TrainConfig& config, const std::vector<std::string>& label_set) {
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    (assignment[i] == fold ? test_idx : train_idx).push_back(i);
  }
  const SequenceDataset train_set = data.subset(train_idx);
  const SequenceDataset test_set = data.subset(test_idx);

  const SgtmModel model = train(train_set, config);
  const SequenceDataset train_norm = prepare_for_model(model, train_set);
  const SequenceDataset test_norm = prepare_for_model(model, test_set);

  std::vector<LikelihoodFeatures> train_features;
  for (const auto& x : train_norm.sequences) train_features.push_back(likelihood_features(model, x));
  SvmOptions svm_options;
  svm_options.c = config.svm_c;
  const SvmModel svm = svm_train(train_features, train_norm.labels, model.label_set, svm_options);

  const auto n_labels = static_cast<Eigen::Index>(label_set.size());
  FoldOutcome out;
  out.confusion = Eigen::MatrixXi::Zero(n_labels, n_labels);
  out.ml_confusion = Eigen::MatrixXi::Zero(n_labels, n_labels);
  auto index_of = [&](const std::string& l) {
    return static_cast<Eigen::Index>(std::find(label_set.begin(), label_set.end(), l) - label_set.begin());
  };
  int svm_correct = 0;
  int ml_correct = 0;
  for (std::size_t i = 0; i < test_norm.size(); ++i) {
    const auto f = likelihood_features(model, test_norm.sequences[i]);
    const std::string& truth = test_norm.labels[i];
    const std::string svm_label = svm_predict(svm, f).label;
    const std::string& ml_label = model.label_set[argmax_label(f.loglik_raw)];
    svm_correct += svm_label == truth;
    ml_correct += ml_label == truth;
    out.confusion(index_of(truth), index_of(svm_label)) += 1;
    out.ml_confusion(index_of(truth), index_of(ml_label)) += 1;
  }
  const double n_test = static_cast<double>(test_norm.size());
  out.svm_acc = svm_correct / n_test;
  out.ml_acc = ml_correct / n_test;
  out.relevance = model.metric.relevance();
  out.epochs = model.log.epochs;
  return out;
}

}  // namespace

CvReport stratified_cv(const SequenceDataset& data, const TrainConfig& config, const CvOptions& options) {
  data.validate();
  config.validate();
  if (options.folds < 2) throw std::invalid_argument("stratified_cv: folds must be >= 2");
  if (options.reps < 1) throw std::invalid_argument("stratified_cv: reps must be >= 1");

  CvReport report;
  report.folds = options.folds;
  report.reps = options.reps;
  report.seed = options.seed;
  report.config = config;
  report.label_set = data.label_set();
  report.feature_names = data.feature_names;

  std::vector<std::vector<int>> assignments;
  for (int r = 0; r < options.reps; ++r) {
    assignments.push_back(stratified_assignment(data.labels, options.folds,
                                                options.seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(r)));
  }

  const std::size_t jobs = static_cast<std::size_t>(options.reps) * static_cast<std::size_t>(options.folds);
  std::vector<FoldOutcome> outcomes(jobs);
  std::vector<std::exception_ptr> errors(jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t job = next++; job < jobs; job = next++) {
      try {
        const int rep = static_cast<int>(job / static_cast<std::size_t>(options.folds));
        const int fold = static_cast<int>(job % static_cast<std::size_t>(options.folds));
        outcomes[job] = run_fold(data, assignments[rep], fold, config, report.label_set);
      } catch (...) {
        errors[job] = std::current_exception();
      }
    }
  };
  const auto n_threads = static_cast<std::size_t>(std::clamp(options.threads, 1, static_cast<int>(jobs)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  const auto n_labels = static_cast<Eigen::Index>(report.label_set.size());
  report.svm_accuracy.resize(options.reps, options.folds);
  report.ml_accuracy.resize(options.reps, options.folds);
  report.confusion = Eigen::MatrixXi::Zero(n_labels, n_labels);
  report.ml_confusion = Eigen::MatrixXi::Zero(n_labels, n_labels);
  for (std::size_t job = 0; job < jobs; ++job) {
    const auto r = static_cast<Eigen::Index>(job / static_cast<std::size_t>(options.folds));
    const auto f = static_cast<Eigen::Index>(job % static_cast<std::size_t>(options.folds));
    report.svm_accuracy(r, f) = outcomes[job].svm_acc;
    report.ml_accuracy(r, f) = outcomes[job].ml_acc;
    report.per_fold_relevance.push_back(outcomes[job].relevance);
    report.per_fold_epochs.push_back(outcomes[job].epochs);
    report.confusion += outcomes[job].confusion;
    report.ml_confusion += outcomes[job].ml_confusion;
  }
  std::tie(report.svm_mean, report.svm_std) = mean_and_std(report.svm_accuracy);
  std::tie(report.ml_mean, report.ml_std) = mean_and_std(report.ml_accuracy);
  return report;
}

RelevanceProfile relevance_profile(const std::vector<Eigen::VectorXd>& per_fold) {
  if (per_fold.empty()) throw std::invalid_argument("relevance_profile: no relevance vectors");
  const auto d = per_fold.front().size();
  Eigen::MatrixXd stack(static_cast<Eigen::Index>(per_fold.size()), d);
  for (std::size_t i = 0; i < per_fold.size(); ++i) {
    if (per_fold[i].size() != d) throw std::invalid_argument("relevance_profile: inconsistent lengths");
    stack.row(static_cast<Eigen::Index>(i)) = per_fold[i].transpose();
  }
  RelevanceProfile p;
  p.mean = stack.colwise().mean().transpose();
  p.min = stack.colwise().minCoeff().transpose();
  p.std = ((stack.rowwise() - p.mean.transpose()).array().square().colwise().sum() /
           static_cast<double>(stack.rows()))
              .sqrt()
              .matrix()
              .transpose();
  const double mu = p.mean.mean();
  const double sigma = std::sqrt((p.mean.array() - mu).square().sum() / static_cast<double>(d));
  p.zeta = mu + sigma;
  for (Eigen::Index i = 0; i < d; ++i) {
    if (p.mean(i) > p.zeta) p.selected.push_back(static_cast<int>(i));
  }
  return p;
}

std::vector<int> top_features(const RelevanceProfile& profile, int k) {
  std::vector<int> idx(static_cast<std::size_t>(profile.mean.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return profile.mean(a) > profile.mean(b); });
  idx.resize(std::min<std::size_t>(idx.size(), static_cast<std::size_t>(std::max(k, 0))));
  return idx;
}

}  // namespace tempomap
