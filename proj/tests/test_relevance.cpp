#include <doctest.h>

#include "tempomap/relevance.hpp"
#include "test_support.hpp"

using namespace tempomap;

TEST_SUITE("relevance") {
  TEST_CASE("reconstruction follows the most responsible state") {
    Eigen::MatrixXd protos(3, 2);
    protos << 0, 0, 1, 1, 2, 2;
    Eigen::MatrixXd resp(3, 3);
    resp << 0, 1, 0, 0, 0, 1, 1, 0, 0;
    const auto r = reconstruct_from_responsibilities(resp, protos);
    CHECK(r.winner_path == std::vector<int>{1, 2, 0});
    for (int n = 0; n < 3; ++n) CHECK(r.x_hat.row(n) == protos.row(r.winner_path[n]));

    Eigen::MatrixXd tie(1, 2);
    tie << 0.5, 0.5;
    CHECK(reconstruct_from_responsibilities(tie, protos.topRows(2)).winner_path == std::vector<int>{0});
  }

  TEST_CASE("one state reconstructs the prototype at every step") {
    Rng rng(1);
    const auto m = testing::random_model(rng, 1, 3);
    const auto r = reconstruct(testing::random_matrix(rng, 5, 3), m, MetricParams::uniform(3), "a");
    CHECK(r.source_label == "a");
    for (int n = 0; n < 5; ++n) CHECK(r.x_hat.row(n) == m.prototypes().row(0));
  }

  TEST_CASE("reconstruction winners match brute-force posteriors") {
    Rng rng(2);
    for (int rep = 0; rep < 20; ++rep) {
      const auto m = testing::random_model(rng, 3, 2);
      const Eigen::MatrixXd x = testing::random_matrix(rng, 4, 2);
      const auto metric = MetricParams::uniform(2);
      const Eigen::MatrixXd post = testing::brute_force_posteriors(m, sequence_log_emissions(m, x, metric));
      const auto r = reconstruct(x, m, metric);
      for (int n = 0; n < 4; ++n) {
        Eigen::Index k = 0;
        post.row(n).maxCoeff(&k);
        CHECK(r.winner_path[n] == k);
      }
    }
  }

  TEST_CASE("relevance_epoch averages per-sequence gradients against the closest wrong model") {
    Rng rng(3);
    const Eigen::Index d = 3;
    std::vector<GtmTtModel> models;
    for (int l = 0; l < 3; ++l) models.push_back(testing::random_model(rng, 2, d));
    const auto seqs = testing::random_sequences(rng, 6, 4, d);
    const std::vector<int> labels{0, 1, 2, 0, 1, 2};
    MetricParams metric = MetricParams::uniform(d);
    metric.lambda << 0.2, 0.5, 0.8;
    metric.normalize();
    const TimeDistance dist{};

    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(d, 1);
    double cost = 0.0;
    for (std::size_t n = 0; n < seqs.size(); ++n) {
      std::vector<Eigen::VectorXd> dt;
      for (const auto& m : models) dt.push_back(per_dimension_distances(seqs[n], reconstruct(seqs[n], m, metric).x_hat, dist));
      int wrong = -1;
      for (int l = 0; l < 3; ++l) {
        if (l == labels[n]) continue;
        if (wrong < 0 || weighted_distance(dt[l], metric) < weighted_distance(dt[wrong], metric)) wrong = l;
      }
      const auto g = metric_gradient(dt[labels[n]], dt[wrong], metric);
      expected += g.values;
      cost += g.cost;
    }
    expected /= 6.0;
    const auto step = relevance_epoch(models, seqs, labels, metric, dist, 0.1);
    CHECK((step.avg_gradient - expected).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(step.mean_cost == doctest::Approx(cost / 6.0));
    CHECK(step.metric.constraint_satisfied(1e-12));
    CHECK(step.metric.lambda.isApprox(apply_metric_update(metric, expected, 0.1).lambda));
  }

  TEST_CASE("relevance grows on the discriminative feature") {
    // Two one-state models that differ only in feature 0.
    Rng rng(4);
    auto a = testing::random_model(rng, 1, 3);
    auto b = a;
    a.gtm.W.setZero();
    b.gtm.W.setZero();
    b.gtm.W(b.gtm.W.rows() - 1, 0) = 2.0;
    std::vector<Eigen::MatrixXd> seqs;
    std::vector<int> labels;
    for (int n = 0; n < 10; ++n) {
      Eigen::MatrixXd x = testing::random_matrix(rng, 4, 3, 0.3);
      const int l = n % 2;
      if (l == 1) x.col(0).array() += 2.0;
      seqs.push_back(x);
      labels.push_back(l);
    }
    auto metric = MetricParams::uniform(3);
    for (int epoch = 0; epoch < 5; ++epoch) {
      metric = relevance_epoch({a, b}, seqs, labels, metric, {}, 0.1).metric;
    }
    CHECK(metric.lambda(0) > metric.lambda(1));
    CHECK(metric.lambda(0) > metric.lambda(2));
  }

  TEST_CASE("relevance_epoch needs two models") {
    Rng rng(5);
    const auto m = testing::random_model(rng, 2, 2);
    CHECK_THROWS_AS(relevance_epoch({m}, testing::random_sequences(rng, 1, 3, 2), {0}, MetricParams::uniform(2), {}, 0.1),
                    std::invalid_argument);
  }
}
