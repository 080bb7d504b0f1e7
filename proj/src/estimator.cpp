#include "sorb/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sorb/mlp_estimator.hpp"
#include "sorb/tabular_estimator.hpp"

namespace sorb {

const char* backend_name(Backend b) { return b == Backend::Tabular ? "tabular" : "mlp"; }
const char* head_name(Head h) { return h == Head::Distributional ? "distributional" : "scalar"; }
const char* encoder_name(Encoder e) {
  switch (e) {
    case Encoder::Cell: return "cell";
    case Encoder::Coords: return "coords";
    case Encoder::LocalView: return "local_view";
  }
  return "?";
}

Backend parse_backend(const std::string& s) {
  if (s == "tabular") return Backend::Tabular;
  if (s == "mlp") return Backend::Mlp;
  throw std::invalid_argument("unknown backend '" + s + "'");
}

Head parse_head(const std::string& s) {
  if (s == "distributional") return Head::Distributional;
  if (s == "scalar") return Head::Scalar;
  throw std::invalid_argument("unknown head '" + s + "'");
}

Encoder parse_encoder(const std::string& s) {
  if (s == "cell") return Encoder::Cell;
  if (s == "coords") return Encoder::Coords;
  if (s == "local_view") return Encoder::LocalView;
  throw std::invalid_argument("unknown encoder '" + s + "'");
}

void EstimatorConfig::validate() const {
  if (num_bins < 1) throw std::invalid_argument("num_bins must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (backend == Backend::Tabular && learning_rate > 1.0) {
    throw std::invalid_argument("tabular mixing rate must be in (0, 1]");
  }
  if (target_update_period < 1) throw std::invalid_argument("target_update_period must be >= 1");
  if (!(target_update_rate > 0.0 && target_update_rate <= 1.0)) {
    throw std::invalid_argument("target_update_rate must be in (0, 1]");
  }
  if (backend == Backend::Tabular && encoder != Encoder::Cell) {
    throw std::invalid_argument("tabular backend uses the cell encoder");
  }
  if (backend == Backend::Mlp && encoder == Encoder::Cell) {
    throw std::invalid_argument("mlp backend needs the coords or local_view encoder");
  }
  for (int h : hidden) {
    if (h <= 0) throw std::invalid_argument("hidden layer sizes must be positive");
  }
}

void TrainConfig::validate() const {
  estimator.validate();
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (epsilon < 0.0 || epsilon > 1.0) throw std::invalid_argument("epsilon outside [0,1]");
  if (discount != 1.0) throw std::invalid_argument("discount is fixed at 1");
  double sum = relabel_probs[0] + relabel_probs[1] + relabel_probs[2];
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("relabel_probs must sum to 1");
  for (double p : relabel_probs) {
    if (p < 0.0) throw std::invalid_argument("relabel_probs must be nonnegative");
  }
  if (total_env_steps < 0 || random_warmup_steps < 0) {
    throw std::invalid_argument("step counts must be nonnegative");
  }
  if (replay_capacity < static_cast<std::size_t>(batch_size)) {
    throw std::invalid_argument("replay_capacity smaller than batch_size");
  }
}

std::array<double, kNumActions> ActionDistributions::expected_distances() const {
  std::array<double, kNumActions> d{};
  for (int a = 0; a < kNumActions; ++a) d[a] = expected_distance(action(a));
  return d;
}

void ValueEstimator::distances(const GridMap& map, std::span<const StatePair> pairs,
                               std::span<double> out) const {
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto d = action_distances(map, pairs[i].s, pairs[i].g);
    out[i] = *std::min_element(d.begin(), d.end());
  }
}

std::unique_ptr<ValueEstimator> make_estimator(const EstimatorConfig& cfg,
                                               const std::string& map_name, int num_cells,
                                               std::uint64_t seed) {
  if (cfg.backend == Backend::Tabular) {
    return std::make_unique<TabularEstimator>(cfg, map_name, num_cells);
  }
  return std::make_unique<MlpEstimator>(cfg, map_name, seed);
}

Action argmin_action(const std::array<double, kNumActions>& distances) {
  int best = 0;
  for (int a = 1; a < kNumActions; ++a) {
    if (distances[a] < distances[best]) best = a;
  }
  return action_from_index(best);
}

Action greedy_action(const ValueEstimator& est, const GridMap& map, State s, State g) {
  return argmin_action(est.action_distances(map, s, g));
}

Action epsilon_greedy_action(const std::array<double, kNumActions>& distances, double epsilon,
                             Rng& rng) {
  std::uniform_int_distribution<int> pick(0, kNumActions - 1);
  if (epsilon > 0.0 && std::bernoulli_distribution(epsilon)(rng)) {
    return action_from_index(pick(rng));
  }
  const double best = distances[action_index(argmin_action(distances))];
  std::array<int, kNumActions> ties{};
  int count = 0;
  for (int a = 0; a < kNumActions; ++a) {
    if (distances[a] == best) ties[count++] = a;
  }
  if (count == 1) return action_from_index(ties[0]);
  return action_from_index(ties[std::uniform_int_distribution<int>(0, count - 1)(rng)]);
}

double train_step(ValueEstimator& est, const ReplayBuffer& buffer, int batch_size, MapSet maps,
                  int goal_radius, Rng& rng) {
  if (buffer.size() < static_cast<std::size_t>(batch_size)) {
    throw std::logic_error("replay buffer smaller than batch size");
  }
  auto batch = buffer.sample(static_cast<std::size_t>(batch_size), rng);
  return est.train_batch(batch, maps, goal_radius);
}

}  // namespace sorb
