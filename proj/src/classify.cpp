#include "tempomap/classify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "tempomap/errors.hpp"

namespace tempomap {

LikelihoodFeatures features_from_logliks(const Eigen::VectorXd& loglik, Eigen::Index length) {
  if (length < 1) throw std::invalid_argument("likelihood features: sequence length must be >= 1");
  if (!loglik.allFinite()) throw NumericalError("likelihood features: non-finite log-likelihood");
  LikelihoodFeatures f;
  f.loglik_raw = loglik;
  const Eigen::ArrayXd per_step = loglik.array() / static_cast<double>(length);
  f.lik = (per_step - per_step.maxCoeff()).exp().matrix();
  return f;
}

LikelihoodFeatures likelihood_features(const SgtmModel& model, const Eigen::MatrixXd& x_seq) {
  Eigen::VectorXd ll(static_cast<Eigen::Index>(model.submodels.size()));
  for (std::size_t l = 0; l < model.submodels.size(); ++l) {
    ll(static_cast<Eigen::Index>(l)) = sequence_loglik(model.submodels[l], x_seq, model.metric);
  }
  return features_from_logliks(ll, x_seq.rows());
}

std::size_t argmax_label(const Eigen::VectorXd& loglik) {
  Eigen::Index best = 0;
  loglik.maxCoeff(&best);
  return static_cast<std::size_t>(best);
}

std::string classify_ml(const SgtmModel& model, const Eigen::MatrixXd& x_seq) {
  return model.label_set[argmax_label(likelihood_features(model, x_seq).loglik_raw)];
}

double likelihood_kernel(const LikelihoodFeatures& a, const LikelihoodFeatures& b) {
  if (a.lik.size() != b.lik.size()) throw std::invalid_argument("likelihood_kernel: feature length mismatch");
  return a.lik.dot(b.lik);
}

Eigen::MatrixXd gram_matrix(const std::vector<LikelihoodFeatures>& features) {
  const auto n = static_cast<Eigen::Index>(features.size());
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      K(i, j) = K(j, i) = likelihood_kernel(features[i], features[j]);
    }
  }
  return K;
}

double BinarySvm::decision(const LikelihoodFeatures& f) const {
  double s = bias;
  for (std::size_t i = 0; i < support_features.size(); ++i) {
    const double c = coefficients(static_cast<Eigen::Index>(i));
    if (c != 0.0) s += c * likelihood_kernel(support_features[i], f);
  }
  return s;
}

namespace {

bool lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

}  // namespace

BinarySvm train_binary_svm(const std::vector<LikelihoodFeatures>& features, const std::vector<int>& y_in,
                           const SvmOptions& options) {
  const auto n = features.size();
  if (n == 0 || y_in.size() != n) throw std::invalid_argument("svm: features and labels must be non-empty and aligned");
  if (!(options.c > 0.0)) throw std::invalid_argument("svm: C must be positive");
  bool has_pos = false;
  bool has_neg = false;
  for (int v : y_in) {
    if (v == 1) {
      has_pos = true;
    } else if (v == -1) {
      has_neg = true;
    } else {
      throw std::invalid_argument("svm: labels must be +1 or -1");
    }
  }
  if (!has_pos || !has_neg) throw std::invalid_argument("svm: both classes must be present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (lex_less(features[a].lik, features[b].lik)) return true;
    if (lex_less(features[b].lik, features[a].lik)) return false;
    return y_in[a] < y_in[b];
  });

  BinarySvm svm;
  for (auto i : order) svm.support_features.push_back(features[i]);
  const auto m = static_cast<Eigen::Index>(n);
  Eigen::VectorXd y(m);
  for (Eigen::Index i = 0; i < m; ++i) y(i) = y_in[order[i]];

  const Eigen::MatrixXd K = gram_matrix(svm.support_features);
  if (m > 1) {
    const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(K, Eigen::EigenvaluesOnly).eigenvalues()(0);
    if (min_eig < -1e-8) throw NumericalError("svm: Gram matrix is not positive semi-definite");
  }
  const Eigen::MatrixXd Q = y.asDiagonal() * K * y.asDiagonal();
  const double C = options.c;

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd G = Eigen::VectorXd::Constant(m, -1.0);
  auto in_up = [&](Eigen::Index t) { return (y(t) > 0 && alpha(t) < C) || (y(t) < 0 && alpha(t) > 0); };
  auto in_low = [&](Eigen::Index t) { return (y(t) > 0 && alpha(t) > 0) || (y(t) < 0 && alpha(t) < C); };

  int iter = 0;
  double gap = 0.0;
  for (;; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    Eigen::Index i = -1;
    for (Eigen::Index t = 0; t < m; ++t) {
      const double u = -y(t) * G(t);
      if (in_up(t) && u > gmax) {
        gmax = u;
        i = t;
      }
      if (in_low(t)) gmin = std::min(gmin, u);
    }
    gap = gmax - gmin;
    if (i < 0 || gap < options.tolerance) break;
    if (iter >= options.max_iterations) {
      warn("svm: iteration limit reached with KKT gap " + std::to_string(gap));
      break;
    }

    Eigen::Index j = -1;
    double best_obj = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < m; ++t) {
      if (!in_low(t)) continue;
      const double u = -y(t) * G(t);
      const double b = gmax - u;
      if (b <= 0.0) continue;
      double a = K(i, i) + K(t, t) - 2.0 * K(i, t);
      if (a <= 0.0) a = 1e-12;
      const double obj = -(b * b) / a;
      if (obj < best_obj) {
        best_obj = obj;
        j = t;
      }
    }
    if (j < 0) break;

    const double old_ai = alpha(i);
    const double old_aj = alpha(j);
    double quad = K(i, i) + K(j, j) - 2.0 * K(i, j);
    if (quad <= 0.0) quad = 1e-12;
    if (y(i) != y(j)) {
      const double delta = (-G(i) - G(j)) / quad;
      const double diff = alpha(i) - alpha(j);
      alpha(i) += delta;
      alpha(j) += delta;
      if (diff > 0) {
        if (alpha(j) < 0) {
          alpha(j) = 0;
          alpha(i) = diff;
        }
      } else if (alpha(i) < 0) {
        alpha(i) = 0;
        alpha(j) = -diff;
      }
      if (diff > 0) {
        if (alpha(i) > C) {
          alpha(i) = C;
          alpha(j) = C - diff;
        }
      } else if (alpha(j) > C) {
        alpha(j) = C;
        alpha(i) = C + diff;
      }
    } else {
      const double delta = (G(i) - G(j)) / quad;
      const double sum = alpha(i) + alpha(j);
      alpha(i) -= delta;
      alpha(j) += delta;
      if (sum > C) {
        if (alpha(i) > C) {
          alpha(i) = C;
          alpha(j) = sum - C;
        }
      } else if (alpha(j) < 0) {
        alpha(j) = 0;
        alpha(i) = sum;
      }
      if (sum > C) {
        if (alpha(j) > C) {
          alpha(j) = C;
          alpha(i) = sum - C;
        }
      } else if (alpha(i) < 0) {
        alpha(i) = 0;
        alpha(j) = sum;
      }
    }
    const double dai = alpha(i) - old_ai;
    const double daj = alpha(j) - old_aj;
    G += Q.col(i) * dai + Q.col(j) * daj;
  }

  // Offset from free variables, or the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  int n_free = 0;
  for (Eigen::Index t = 0; t < m; ++t) {
    const double yg = y(t) * G(t);
    if (alpha(t) >= C) {
      if (y(t) < 0) {
        ub = std::min(ub, yg);
      } else {
        lb = std::max(lb, yg);
      }
    } else if (alpha(t) <= 0) {
      if (y(t) > 0) {
        ub = std::min(ub, yg);
      } else {
        lb = std::max(lb, yg);
      }
    } else {
      ++n_free;
      free_sum += yg;
    }
  }
  const double rho = n_free > 0 ? free_sum / n_free : 0.5 * (ub + lb);

  svm.alpha = alpha;
  svm.coefficients = alpha.cwiseProduct(y);
  svm.bias = -rho;
  svm.kkt_gap = std::max(gap, 0.0);
  svm.iterations = iter;
  return svm;
}

SvmModel svm_train(const std::vector<LikelihoodFeatures>& features, const std::vector<std::string>& labels,
                   const std::vector<std::string>& label_set, const SvmOptions& options) {
  if (label_set.size() < 2) throw std::invalid_argument("svm_train: need at least two labels");
  if (features.size() != labels.size()) throw std::invalid_argument("svm_train: features and labels not aligned");
  SvmModel model;
  model.label_set = label_set;
  model.c_param = options.c;
  const std::size_t machines = label_set.size() == 2 ? 1 : label_set.size();
  for (std::size_t m = 0; m < machines; ++m) {
    std::vector<int> y;
    y.reserve(labels.size());
    for (const auto& l : labels) {
      if (std::find(label_set.begin(), label_set.end(), l) == label_set.end()) {
        throw std::invalid_argument("svm_train: label '" + l + "' not in label set");
      }
      y.push_back(l == label_set[m] ? 1 : -1);
    }
    model.machines.push_back(train_binary_svm(features, y, options));
  }
  return model;
}

SvmPrediction svm_predict(const SvmModel& svm, const LikelihoodFeatures& f) {
  if (svm.machines.empty()) throw std::invalid_argument("svm_predict: untrained model");
  if (svm.machines.size() == 1) {
    const double v = svm.machines.front().decision(f);
    return {v >= 0.0 ? svm.label_set[0] : svm.label_set[1], v};
  }
  std::size_t best = 0;
  double best_v = -std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < svm.machines.size(); ++m) {
    const double v = svm.machines[m].decision(f);
    if (v > best_v) {
      best_v = v;
      best = m;
    }
  }
  return {svm.label_set[best], best_v};
}

}  // namespace tempomap
