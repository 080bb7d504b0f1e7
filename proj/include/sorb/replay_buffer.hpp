#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "sorb/grid_world.hpp"

namespace sorb {

// Fixed-capacity transition store; overwrites the oldest entry when full.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void add(const Transition& t);
  void add(std::span<const Transition> ts);

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& operator[](std::size_t i) const { return data_[i]; }

  // Uniform with replacement.
  std::vector<Transition> sample(std::size_t batch_size, Rng& rng) const;

  // Distinct states (and next states) currently stored, in first-seen order.
  std::vector<State> distinct_states() const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> data_;
};

// Probabilities of keeping the episode goal, using the current state, or
// using a later state of the same trajectory.
using RelabelProbs = std::array<double, 3>;
inline constexpr RelabelProbs kDefaultRelabelProbs = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};

// Hindsight relabeling of one episode. Each transition independently gets a
// new goal; `done` is recomputed against it. The final transition has no
// later state, so it picks between the other two sources renormalized.
std::vector<Transition> relabel(std::span<const Transition> trajectory, const GridMap& map,
                                int goal_radius, Rng& rng,
                                const RelabelProbs& probs = kDefaultRelabelProbs);

}  // namespace sorb
