#include <doctest.h>

#include <cmath>

#include "sorb/mlp.hpp"
#include "sorb/mlp_estimator.hpp"

using namespace sorb;

namespace {

Eigen::MatrixXd random_targets(int bins, int batch, Rng& rng) {
  std::exponential_distribution<double> e(1.0);
  std::bernoulli_distribution sparse(0.3);
  Eigen::MatrixXd t(bins, batch);
  for (int j = 0; j < batch; ++j) {
    for (int i = 0; i < bins; ++i) t(i, j) = sparse(rng) ? 0.0 : e(rng);
    if (t.col(j).sum() == 0.0) t(0, j) = 1.0;
    t.col(j) /= t.col(j).sum();
  }
  return t;
}

}  // namespace

TEST_SUITE("distval.mlp") {
  TEST_CASE("zero weights give uniform distributions") {
    Rng rng(1);
    Mlp net({4, 8, kNumActions * 6}, rng);
    std::fill(net.parameters().begin(), net.parameters().end(), 0.0);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 3);
    Eigen::MatrixXd p = action_softmax(net.forward(x), 6);
    CHECK((p.array() - 1.0 / 6.0).abs().maxCoeff() < 1e-15);
  }

  TEST_CASE("forward is pure") {
    Rng rng(2);
    Mlp net({5, 7, 7, 12}, rng);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 1);
    Eigen::MatrixXd xx(5, 2);
    xx << x, x;
    Eigen::MatrixXd y = net.forward(xx);
    CHECK(y.col(0) == y.col(1));
    CHECK(net.forward(x) == net.forward(x));
  }

  TEST_CASE("analytic gradient matches central differences") {
    // 50 draws of random parameters, inputs, actions and targets. The error
    // is measured relative to max(|analytic|, |numeric|, 1e-6) so that
    // entries at round-off level do not dominate.
    double worst = 0.0;
    for (int draw = 0; draw < 50; ++draw) {
      Rng rng(100 + draw);
      const int bins = 2 + draw % 5;
      const int in = 3 + draw % 4;
      std::vector<int> sizes{in};
      for (int h = 0; h < 1 + draw % 3; ++h) sizes.push_back(4 + (draw + h) % 5);
      sizes.push_back(kNumActions * bins);
      Mlp net(sizes, rng);
      std::normal_distribution<double> n(0.0, 0.5);
      for (double& p : net.parameters()) p += n(rng);
      const int batch = 1 + draw % 6;
      Eigen::MatrixXd x(in, batch);
      for (int i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
      std::vector<int> actions(batch);
      std::uniform_int_distribution<int> pick(0, kNumActions - 1);
      for (auto& a : actions) a = pick(rng);
      Eigen::MatrixXd t = random_targets(bins, batch, rng);

      std::vector<double> grad;
      mlp_loss_and_gradient(net, x, bins, actions, t, &grad);
      REQUIRE(grad.size() == net.num_parameters());
      const double h = 1e-5;
      for (std::size_t k = 0; k < net.num_parameters(); ++k) {
        const double saved = net.parameters()[k];
        net.parameters()[k] = saved + h;
        const double up = mlp_loss_and_gradient(net, x, bins, actions, t, nullptr);
        net.parameters()[k] = saved - h;
        const double down = mlp_loss_and_gradient(net, x, bins, actions, t, nullptr);
        net.parameters()[k] = saved;
        const double numeric = (up - down) / (2 * h);
        const double scale = std::max({std::abs(grad[k]), std::abs(numeric), 1e-6});
        worst = std::max(worst, std::abs(grad[k] - numeric) / scale);
      }
    }
    CHECK(worst < 1e-4);
  }

  TEST_CASE("head loss matches the KL definition") {
    Rng rng(3);
    const int bins = 5, batch = 4;
    Eigen::MatrixXd logits = Eigen::MatrixXd::Random(kNumActions * bins, batch);
    std::vector<int> actions{0, 3, 2, 1};
    Eigen::MatrixXd t = random_targets(bins, batch, rng);
    Eigen::MatrixXd p = action_softmax(logits, bins);
    double want = 0.0;
    for (int j = 0; j < batch; ++j) {
      std::vector<double> pred(bins), target(bins);
      for (int i = 0; i < bins; ++i) {
        pred[i] = p(actions[j] * bins + i, j);
        target[i] = t(i, j);
      }
      want += kl_loss(pred, target);
    }
    CHECK(distributional_head_loss(logits, bins, actions, t, nullptr) ==
          doctest::Approx(want / batch));
  }

  TEST_CASE("adam minimizes a quadratic") {
    std::vector<double> x{3.0, -2.0};
    Adam opt(2);
    for (int i = 0; i < 2000; ++i) {
      std::vector<double> g{2 * x[0], 2 * (x[1] - 1)};
      opt.step(x, g, 0.05);
    }
    CHECK(std::abs(x[0]) < 1e-3);
    CHECK(std::abs(x[1] - 1) < 1e-3);
  }

  TEST_CASE("mlp estimator outputs are distributions") {
    GridMap m = builtin_map("four_rooms");
    for (Encoder enc : {Encoder::Coords, Encoder::LocalView}) {
      EstimatorConfig cfg;
      cfg.backend = Backend::Mlp;
      cfg.encoder = enc;
      cfg.hidden = {32, 32};
      MlpEstimator est(cfg, m.name(), 9);
      for (int i = 0; i < 20; ++i) {
        auto p = est.predict(m, m.free_state(i), m.free_state(3 * i + 1));
        for (int a = 0; a < kNumActions; ++a) CHECK(is_simplex(p.action(a), 1e-6));
      }
      std::vector<StatePair> pairs;
      for (int i = 0; i < 50; ++i) pairs.push_back({m.free_state(i), m.free_state(2 * i)});
      std::vector<double> batched(pairs.size());
      est.distances(m, pairs, batched);
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        auto d = est.predict(m, pairs[i].s, pairs[i].g).expected_distances();
        CHECK(batched[i] == doctest::Approx(*std::min_element(d.begin(), d.end())));
      }
    }
  }

  TEST_CASE("encoders") {
    GridMap m = builtin_map("four_rooms");
    std::vector<double> x(encoded_size(Encoder::LocalView));
    encode(Encoder::LocalView, m, {1, 1}, {3, 2}, x);
    // Top-left corner: row above and column left are walls.
    CHECK(x[0] == 1.0);
    CHECK(x[3 * 7 + 3] == 0.0);
    CHECK(x[2 * 7 + 3] == 1.0);
    CHECK(x[3 * 7 + 2] == 1.0);
    CHECK(x[49] == doctest::Approx(2.0 / 20.0));
    CHECK(x[50] == doctest::Approx(1.0 / 20.0));
    std::vector<double> c(encoded_size(Encoder::Coords));
    encode(Encoder::Coords, m, {1, 1}, {19, 19}, c);
    const double want[] = {0.05, 0.05, 0.95, 0.95};
    for (int i = 0; i < 4; ++i) CHECK(c[i] == doctest::Approx(want[i]).epsilon(1e-12));
    CHECK_THROWS(encode(Encoder::Coords, m, {0, 0}, {1, 1}, c));
  }

  TEST_CASE("mlp estimator learns a corridor") {
    GridMap m = GridMap::parse("7 3\n#######\n#.....#\n#######\n", "corridor");
    EstimatorConfig cfg;
    cfg.backend = Backend::Mlp;
    cfg.encoder = Encoder::Coords;
    cfg.num_bins = 8;
    cfg.hidden = {32, 32};
    cfg.learning_rate = 3e-3;
    MlpEstimator est(cfg, m.name(), 4);
    ReplayBuffer buf(1000);
    EpisodeConfig ep;
    ep.slip_prob = 0.0;
    Rng rng(10);
    for (State s : m.free_cells()) {
      for (State g : m.free_cells()) {
        for (Action a : kAllActions) buf.add(step(m, s, a, g, ep, rng));
      }
    }
    const GridMap* maps[] = {&m};
    for (int i = 0; i < 6000; ++i) train_step(est, buf, 64, maps, 0, rng);
    const State a{1, 1}, b{4, 1};
    std::vector<double> d(1);
    StatePair p{a, b};
    est.distances(m, {&p, 1}, d);
    CHECK(std::abs(d[0] - 3.0) < 0.5);
    CHECK(greedy_action(est, m, a, b) == Action::East);
  }
}
