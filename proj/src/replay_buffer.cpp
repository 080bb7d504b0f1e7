#include "sorb/replay_buffer.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace sorb {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("replay capacity must be positive");
  data_.reserve(std::min<std::size_t>(capacity_, 1 << 16));
}

void ReplayBuffer::add(const Transition& t) {
  if (data_.size() < capacity_) {
    data_.push_back(t);
  } else {
    data_[next_] = t;
  }
  next_ = (next_ + 1) % capacity_;
}

void ReplayBuffer::add(std::span<const Transition> ts) {
  for (const auto& t : ts) add(t);
}

std::vector<Transition> ReplayBuffer::sample(std::size_t batch_size, Rng& rng) const {
  if (data_.empty()) throw std::logic_error("sampling from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
  std::vector<Transition> batch;
  batch.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) batch.push_back(data_[pick(rng)]);
  return batch;
}

std::vector<State> ReplayBuffer::distinct_states() const {
  std::vector<State> out;
  std::unordered_set<long long> seen;
  auto key = [](State s) { return (static_cast<long long>(s.y) << 32) | static_cast<unsigned>(s.x); };
  for (const auto& t : data_) {
    for (State s : {t.state, t.next_state}) {
      if (seen.insert(key(s)).second) out.push_back(s);
    }
  }
  return out;
}

std::vector<Transition> relabel(std::span<const Transition> trajectory, const GridMap& map,
                                int goal_radius, Rng& rng, const RelabelProbs& probs) {
  if (trajectory.empty()) throw std::invalid_argument("relabel needs a non-empty trajectory");
  double total = probs[0] + probs[1] + probs[2];
  if (std::abs(total - 1.0) > 1e-9 || probs[0] < 0 || probs[1] < 0 || probs[2] < 0) {
    throw std::invalid_argument("relabel probabilities must sum to 1");
  }
  std::vector<Transition> out(trajectory.begin(), trajectory.end());
  const std::size_t n = trajectory.size();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t t = 0; t < n; ++t) {
    Transition& tr = out[t];
    const bool has_future = t + 1 < n;
    double u = unit(rng);
    GoalSource source;
    if (has_future) {
      source = u < probs[0]              ? GoalSource::Original
               : u < probs[0] + probs[1] ? GoalSource::Current
                                         : GoalSource::Future;
    } else {
      double keep = probs[0] + probs[1];
      source = (keep <= 0.0 || u * keep < probs[0]) ? GoalSource::Original : GoalSource::Current;
    }
    switch (source) {
      case GoalSource::Original:
        tr.goal = trajectory[t].goal;
        break;
      case GoalSource::Current:
        tr.goal = trajectory[t].state;
        break;
      case GoalSource::Future: {
        std::uniform_int_distribution<std::size_t> pick(t + 1, n - 1);
        tr.goal = trajectory[pick(rng)].state;
        break;
      }
    }
    tr.goal_source = source;
    tr.done = within_radius(map, tr.next_state, tr.goal, goal_radius);
    tr.timeout = trajectory[t].timeout && !tr.done;
  }
  return out;
}

}  // namespace sorb
