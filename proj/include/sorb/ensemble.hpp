#pragma once

#include <memory>
#include <vector>

#include "sorb/estimator.hpp"

namespace sorb {

enum class Aggregation : std::uint8_t { Max = 0, Mean = 1 };

const char* aggregation_name(Aggregation a);
Aggregation parse_aggregation(const std::string& s);

struct EnsembleConfig {
  int size = 3;
  Aggregation aggregation = Aggregation::Max;

  void validate() const;
};

// K estimators with independent parameters and independent batch streams,
// trained on the same replay buffer.
class ValueEnsemble {
 public:
  // Member i is initialized from member_seeds[i] and draws its batches from
  // an engine seeded with batch_seed(member_seeds[i]).
  ValueEnsemble(const EnsembleConfig& cfg, const EstimatorConfig& est_cfg,
                const std::string& map_name, int num_cells,
                const std::vector<std::uint64_t>& member_seeds);
  ValueEnsemble(EnsembleConfig cfg, std::vector<std::unique_ptr<ValueEstimator>> members);

  ValueEnsemble(const ValueEnsemble& other);
  ValueEnsemble& operator=(const ValueEnsemble& other);
  ValueEnsemble(ValueEnsemble&&) noexcept = default;
  ValueEnsemble& operator=(ValueEnsemble&&) noexcept = default;

  // Derives K member seeds from one run seed.
  static std::vector<std::uint64_t> member_seeds(std::uint64_t seed, int size);
  static std::uint64_t batch_seed(std::uint64_t member_seed) {
    return member_seed ^ 0x9e3779b97f4a7c15ULL;
  }

  const EnsembleConfig& config() const { return cfg_; }
  void set_aggregation(Aggregation a) { cfg_.aggregation = a; }
  int size() const { return static_cast<int>(members_.size()); }
  const ValueEstimator& member(int i) const { return *members_[i]; }
  ValueEstimator& member(int i) { return *members_[i]; }
  int num_bins() const { return members_.front()->num_bins(); }

  // One train step per member, each on its own batch. Returns member losses.
  std::vector<double> train_all(const ReplayBuffer& buffer, int batch_size, MapSet maps,
                                int goal_radius);

  // Per member: expected distance of the best action; then max or mean.
  double aggregate_distance(const GridMap& map, State s, State g) const;
  void aggregate_distances(const GridMap& map, std::span<const StatePair> pairs,
                           std::span<double> out) const;

  // Per action: member expected distances combined with the aggregation.
  std::array<double, kNumActions> action_distances(const GridMap& map, State s, State g) const;
  Action greedy_action(const GridMap& map, State s, State g) const;

  // "SRBE" | u32 version | u32 K | u8 aggregation | K x (u64 length, member
  // checkpoint).
  std::vector<std::uint8_t> serialize() const;
  static ValueEnsemble deserialize(std::span<const std::uint8_t> data);
  void save(const std::string& path) const;
  static ValueEnsemble load(const std::string& path);

 private:
  double combine(std::span<const double> values) const;

  EnsembleConfig cfg_;
  std::vector<std::unique_ptr<ValueEstimator>> members_;
  std::vector<Rng> batch_rngs_;
};

}  // namespace sorb
