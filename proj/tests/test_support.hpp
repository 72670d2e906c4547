#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tempomap/errors.hpp"
#include "tempomap/gtm_tt.hpp"
#include "tempomap/rng.hpp"

namespace tempomap::testing {

// Latent grid with K points for any K >= 1 (build_grid rejects K = 1).
inline LatentGrid line_grid(int k) {
  if (k >= 2) return build_grid(1, k);
  return {Eigen::MatrixXd::Zero(1, 2), 1, 1};
}

inline Eigen::VectorXd random_simplex(Rng& rng, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = 0.05 + rng.uniform();
  return v / v.sum();
}

inline Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

// Random HMM with GTM emissions: K states on a line grid, one basis centre
// per state, random weights, beta, pi and A.
inline GtmTtModel random_model(Rng& rng, int k, Eigen::Index d) {
  GtmTtModel m;
  m.grid = line_grid(k);
  m.basis = make_basis(1, k, 2.0, true);
  m.gtm.phi = compute_phi(m.grid, m.basis);
  m.gtm.W = random_matrix(rng, m.gtm.phi.cols(), d);
  m.gtm.beta = rng.uniform(0.5, 3.0);
  m.pi = random_simplex(rng, k);
  m.A.resize(k, k);
  for (int i = 0; i < k; ++i) m.A.row(i) = random_simplex(rng, k).transpose();
  return m;
}

inline std::vector<Eigen::MatrixXd> random_sequences(Rng& rng, int n, Eigen::Index t, Eigen::Index d) {
  std::vector<Eigen::MatrixXd> out;
  for (int i = 0; i < n; ++i) out.push_back(random_matrix(rng, t, d));
  return out;
}

// Visits every state path of length t over k states.
inline void for_each_path(int k, Eigen::Index t, const std::function<void(const std::vector<int>&)>& visit) {
  std::vector<int> path(static_cast<std::size_t>(t), 0);
  for (;;) {
    visit(path);
    std::size_t pos = 0;
    while (pos < path.size() && ++path[pos] == k) path[pos++] = 0;
    if (pos == path.size()) return;
  }
}

// ln p(Z, X) from the complete-data likelihood, written out directly.
inline double joint_log_prob(const GtmTtModel& m, const Eigen::MatrixXd& log_emit, const std::vector<int>& z) {
  double lp = std::log(m.pi(z[0])) + log_emit(0, z[0]);
  for (std::size_t n = 1; n < z.size(); ++n) {
    lp += std::log(m.A(z[n - 1], z[n])) + log_emit(static_cast<Eigen::Index>(n), z[n]);
  }
  return lp;
}

// ln sum over all K^T paths of p(Z, X).
inline double brute_force_loglik(const GtmTtModel& m, const Eigen::MatrixXd& log_emit) {
  std::vector<double> terms;
  for_each_path(static_cast<int>(m.states()), log_emit.rows(),
                [&](const std::vector<int>& z) { terms.push_back(joint_log_prob(m, log_emit, z)); });
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : terms) mx = std::max(mx, v);
  double s = 0.0;
  for (double v : terms) s += std::exp(v - mx);
  return mx + std::log(s);
}

// Posterior state marginals by enumeration.
inline Eigen::MatrixXd brute_force_posteriors(const GtmTtModel& m, const Eigen::MatrixXd& log_emit) {
  const double ll = brute_force_loglik(m, log_emit);
  Eigen::MatrixXd post = Eigen::MatrixXd::Zero(log_emit.rows(), m.states());
  for_each_path(static_cast<int>(m.states()), log_emit.rows(), [&](const std::vector<int>& z) {
    const double p = std::exp(joint_log_prob(m, log_emit, z) - ll);
    for (std::size_t n = 0; n < z.size(); ++n) post(static_cast<Eigen::Index>(n), z[n]) += p;
  });
  return post;
}

// Most probable path by enumeration (first maximum in visiting order).
inline std::vector<int> brute_force_viterbi(const GtmTtModel& m, const Eigen::MatrixXd& log_emit) {
  std::vector<int> best;
  double best_lp = -std::numeric_limits<double>::infinity();
  for_each_path(static_cast<int>(m.states()), log_emit.rows(), [&](const std::vector<int>& z) {
    const double lp = joint_log_prob(m, log_emit, z);
    if (lp > best_lp) {
      best_lp = lp;
      best = z;
    }
  });
  return best;
}

// Fresh scratch directory below the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("tempomap_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Captures warnings for the lifetime of the object.
class WarningCapture {
 public:
  WarningCapture() {
    previous_ = set_warning_handler([this](std::string_view msg) { messages.emplace_back(msg); });
  }
  ~WarningCapture() { set_warning_handler(previous_); }
  WarningCapture(const WarningCapture&) = delete;
  WarningCapture& operator=(const WarningCapture&) = delete;

  std::vector<std::string> messages;

 private:
  WarningHandler previous_;
};

}  // namespace tempomap::testing
