#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sorb/distribution.hpp"
#include "sorb/grid_world.hpp"
#include "sorb/replay_buffer.hpp"

namespace sorb {

class BinaryWriter;
class BinaryReader;

enum class Backend : std::uint8_t { Tabular = 0, Mlp = 1 };
// Distributional: categorical over distance bins. Scalar: squared-loss
// regression of the distance, clipped to [0, N].
enum class Head : std::uint8_t { Distributional = 0, Scalar = 1 };
// Tabular estimators key on cells; MLPs see either normalized coordinates of
// (s, g) or an egocentric wall patch around s plus the goal offset.
enum class Encoder : std::uint8_t { Cell = 0, Coords = 1, LocalView = 2 };

const char* backend_name(Backend b);
const char* head_name(Head h);
const char* encoder_name(Encoder e);
Backend parse_backend(const std::string& s);
Head parse_head(const std::string& s);
Encoder parse_encoder(const std::string& s);

struct EstimatorConfig {
  Backend backend = Backend::Tabular;
  Head head = Head::Distributional;
  Encoder encoder = Encoder::Cell;
  int num_bins = 20;
  std::vector<int> hidden = {64, 64};
  double learning_rate = 0.1;
  int target_update_period = 5;
  double target_update_rate = 0.05;

  void validate() const;
};

struct TrainConfig {
  EstimatorConfig estimator;
  int batch_size = 64;
  double epsilon = 0.1;
  double discount = 1.0;
  RelabelProbs relabel_probs = kDefaultRelabelProbs;
  long total_env_steps = 50000;
  long random_warmup_steps = 1000;
  std::size_t replay_capacity = 100000;

  void validate() const;
};

// Per-action distributions, stored action-major.
class ActionDistributions {
 public:
  ActionDistributions(int num_bins) : num_bins_(num_bins), probs_(kNumActions * (num_bins + 1)) {}

  int num_bins() const { return num_bins_; }
  std::span<const double> action(int a) const {
    return std::span<const double>(probs_).subspan(a * (num_bins_ + 1), num_bins_ + 1);
  }
  std::span<double> action(int a) {
    return std::span<double>(probs_).subspan(a * (num_bins_ + 1), num_bins_ + 1);
  }
  ValueDistribution at(Action a) const {
    auto p = action(action_index(a));
    return ValueDistribution(std::vector<double>(p.begin(), p.end()));
  }
  std::array<double, kNumActions> expected_distances() const;

 private:
  int num_bins_;
  std::vector<double> probs_;
};

struct StatePair {
  State s;
  State g;
};

// Maps referenced by Transition::map_id.
using MapSet = std::span<const GridMap* const>;

// Goal-conditioned distance estimator Q(s, a, g) over distance bins.
class ValueEstimator {
 public:
  virtual ~ValueEstimator() = default;

  virtual const EstimatorConfig& config() const = 0;
  int num_bins() const { return config().num_bins; }

  virtual ActionDistributions predict(const GridMap& map, State s, State g,
                                      bool use_target = false) const = 0;

  virtual std::array<double, kNumActions> action_distances(const GridMap& map, State s,
                                                           State g) const {
    return predict(map, s, g).expected_distances();
  }

  // min over actions of the expected distance, for a batch of pairs.
  virtual void distances(const GridMap& map, std::span<const StatePair> pairs,
                         std::span<double> out) const;

  // One gradient (or mixing) step on a batch; returns the mean loss before
  // the update. Soft-updates target parameters on schedule.
  virtual double train_batch(std::span<const Transition> batch, MapSet maps,
                             int goal_radius) = 0;

  virtual std::uint64_t steps() const = 0;
  virtual std::string map_name() const = 0;

  // Parameter payload only; header handling lives in checkpoint.hpp.
  virtual void save_parameters(BinaryWriter& out) const = 0;
  virtual void load_parameters(BinaryReader& in, std::uint64_t steps) = 0;

  virtual std::unique_ptr<ValueEstimator> clone() const = 0;
};

// Creates a freshly initialized estimator bound to `map_name`. `num_cells`
// sizes the tabular key space and is ignored by the MLP.
std::unique_ptr<ValueEstimator> make_estimator(const EstimatorConfig& cfg,
                                               const std::string& map_name, int num_cells,
                                               std::uint64_t seed);

// argmin of the per-action expected distances; ties go to the lowest index.
Action argmin_action(const std::array<double, kNumActions>& distances);

Action greedy_action(const ValueEstimator& est, const GridMap& map, State s, State g);

// With probability epsilon a uniform action, otherwise greedy. Exact ties
// among greedy actions are broken uniformly at random so that untrained
// (uniform) entries do not pin exploration to a single direction.
Action epsilon_greedy_action(const std::array<double, kNumActions>& distances, double epsilon,
                             Rng& rng);

// Samples a batch uniformly and runs one update.
double train_step(ValueEstimator& est, const ReplayBuffer& buffer, int batch_size, MapSet maps,
                  int goal_radius, Rng& rng);

}  // namespace sorb
