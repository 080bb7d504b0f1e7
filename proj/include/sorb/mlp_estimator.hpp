#pragma once

#include "sorb/estimator.hpp"
#include "sorb/mlp.hpp"

namespace sorb {

// Half-width of the egocentric wall patch used by Encoder::LocalView.
inline constexpr int kLocalViewRadius = 3;

int encoded_size(Encoder encoder);
// Writes the network input for (s, g) on `map` into `out`.
void encode(Encoder encoder, const GridMap& map, State s, State g, std::span<double> out);

// MLP estimator. Distributional head: actions x (N+1) logits with a softmax
// per action, trained with the KL loss. Scalar head: one linear output per
// action, trained with squared error against the clipped target. Adam moments
// are not checkpointed.
class MlpEstimator final : public ValueEstimator {
 public:
  MlpEstimator(const EstimatorConfig& cfg, std::string map_name, std::uint64_t seed);

  const EstimatorConfig& config() const override { return cfg_; }
  ActionDistributions predict(const GridMap& map, State s, State g,
                              bool use_target = false) const override;
  void distances(const GridMap& map, std::span<const StatePair> pairs,
                 std::span<double> out) const override;
  double train_batch(std::span<const Transition> batch, MapSet maps, int goal_radius) override;

  std::uint64_t steps() const override { return steps_; }
  std::string map_name() const override { return map_name_; }
  void save_parameters(BinaryWriter& out) const override;
  void load_parameters(BinaryReader& in, std::uint64_t steps) override;
  std::unique_ptr<ValueEstimator> clone() const override;

  const Mlp& network() const { return online_; }
  Mlp& network() { return online_; }
  const Mlp& target_network() const { return target_; }

 private:
  int outputs_per_action() const;
  // Per-action expected distances from a column of outputs.
  std::array<double, kNumActions> column_distances(const Eigen::MatrixXd& out,
                                                   Eigen::Index col) const;

  EstimatorConfig cfg_;
  std::string map_name_;
  Mlp online_;
  Mlp target_;
  Adam adam_;
  std::vector<double> grad_;
  std::uint64_t steps_ = 0;
};

}  // namespace sorb
