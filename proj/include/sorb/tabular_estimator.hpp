#pragma once

#include <unordered_map>

#include "sorb/estimator.hpp"

namespace sorb {

// Table over (s, g) pairs of free cells, one block of per-action values per
// pair. Blocks are allocated on first write; unwritten pairs read as the
// initial value (uniform distribution, or N/2 for the scalar head).
//
// Target values are soft-updated lazily: a block's target is brought up to
// date only when its online values change or when it is read. Because online
// values are constant between writes, applying k pending soft updates in
// closed form, theta + (1 - tau)^k (target - theta), matches updating every
// block eagerly.
class TabularEstimator final : public ValueEstimator {
 public:
  TabularEstimator(const EstimatorConfig& cfg, std::string map_name, int num_cells);

  const EstimatorConfig& config() const override { return cfg_; }
  ActionDistributions predict(const GridMap& map, State s, State g,
                              bool use_target = false) const override;
  std::array<double, kNumActions> action_distances(const GridMap& map, State s,
                                                   State g) const override;
  double train_batch(std::span<const Transition> batch, MapSet maps, int goal_radius) override;

  std::uint64_t steps() const override { return steps_; }
  std::string map_name() const override { return map_name_; }
  void save_parameters(BinaryWriter& out) const override;
  void load_parameters(BinaryReader& in, std::uint64_t steps) override;
  std::unique_ptr<ValueEstimator> clone() const override;

  // Exhaustive synchronous sweep over every (s, a, g) using the deterministic
  // (slip-free) dynamics of `map`: each entry moves toward its Bellman target
  // with rate `rate`, targets read from the values before the sweep. Returns
  // the largest absolute change of any probability (or scalar).
  double sweep(const GridMap& map, double rate = 1.0);

  int num_cells() const { return num_cells_; }
  std::size_t num_entries() const { return index_.size(); }

 private:
  std::size_t stride() const { return block_; }
  std::uint64_t key(const GridMap& map, State s, State g) const;
  // Online block, or nullptr when unwritten.
  const double* find(std::uint64_t k) const;
  std::size_t slot(std::uint64_t k);
  void sync_target(std::size_t slot);
  // Writes the target block for key k (current epoch) into out.
  void read_target(std::uint64_t k, std::span<double> out) const;
  void fill_prediction(const double* block, ActionDistributions& out) const;
  double block_action_distance(const double* block, int a) const;

  EstimatorConfig cfg_;
  std::string map_name_;
  int num_cells_;
  std::size_t block_;
  std::vector<double> init_;
  std::unordered_map<std::uint64_t, std::uint32_t> index_;
  std::vector<double> theta_;
  std::vector<double> target_;
  std::vector<std::uint64_t> synced_;
  std::uint64_t steps_ = 0;
  std::uint64_t epoch_ = 0;
};

}  // namespace sorb
