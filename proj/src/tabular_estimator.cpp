#include "sorb/tabular_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sorb/checkpoint.hpp"

namespace sorb {

TabularEstimator::TabularEstimator(const EstimatorConfig& cfg, std::string map_name,
                                   int num_cells)
    : cfg_(cfg), map_name_(std::move(map_name)), num_cells_(num_cells) {
  cfg_.validate();
  const std::size_t per_action = cfg_.head == Head::Distributional ? cfg_.num_bins + 1 : 1;
  block_ = kNumActions * per_action;
  init_.assign(block_, cfg_.head == Head::Distributional ? 1.0 / (cfg_.num_bins + 1)
                                                         : cfg_.num_bins / 2.0);
}

std::uint64_t TabularEstimator::key(const GridMap& map, State s, State g) const {
  int a = map.free_index(s);
  int b = map.free_index(g);
  if (a < 0 || b < 0 || a >= num_cells_ || b >= num_cells_) {
    throw std::out_of_range("state outside the estimator's map");
  }
  return static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(num_cells_) +
         static_cast<std::uint64_t>(b);
}

const double* TabularEstimator::find(std::uint64_t k) const {
  auto it = index_.find(k);
  return it == index_.end() ? nullptr : theta_.data() + it->second * block_;
}

std::size_t TabularEstimator::slot(std::uint64_t k) {
  auto [it, inserted] = index_.try_emplace(k, static_cast<std::uint32_t>(synced_.size()));
  if (inserted) {
    theta_.insert(theta_.end(), init_.begin(), init_.end());
    target_.insert(target_.end(), init_.begin(), init_.end());
    synced_.push_back(epoch_);
  }
  return it->second;
}

void TabularEstimator::sync_target(std::size_t slot) {
  const std::uint64_t pending = epoch_ - synced_[slot];
  if (pending == 0) return;
  const double keep = std::pow(1.0 - cfg_.target_update_rate, static_cast<double>(pending));
  const double* th = theta_.data() + slot * block_;
  double* tg = target_.data() + slot * block_;
  for (std::size_t i = 0; i < block_; ++i) tg[i] = th[i] + keep * (tg[i] - th[i]);
  synced_[slot] = epoch_;
}

void TabularEstimator::read_target(std::uint64_t k, std::span<double> out) const {
  auto it = index_.find(k);
  if (it == index_.end()) {
    std::copy(init_.begin(), init_.end(), out.begin());
    return;
  }
  const std::size_t s = it->second;
  const double* th = theta_.data() + s * block_;
  const double* tg = target_.data() + s * block_;
  const std::uint64_t pending = epoch_ - synced_[s];
  if (pending == 0) {
    std::copy(tg, tg + block_, out.begin());
    return;
  }
  const double keep = std::pow(1.0 - cfg_.target_update_rate, static_cast<double>(pending));
  for (std::size_t i = 0; i < block_; ++i) out[i] = th[i] + keep * (tg[i] - th[i]);
}

double TabularEstimator::block_action_distance(const double* block, int a) const {
  if (cfg_.head == Head::Scalar) return std::clamp(block[a], 0.0, double(cfg_.num_bins));
  const std::size_t n = cfg_.num_bins + 1;
  return expected_distance(std::span<const double>(block + a * n, n));
}

void TabularEstimator::fill_prediction(const double* block, ActionDistributions& out) const {
  for (int a = 0; a < kNumActions; ++a) {
    if (cfg_.head == Head::Scalar) {
      two_point_into(block[a], out.action(a));
    } else {
      auto dst = out.action(a);
      std::copy(block + a * dst.size(), block + (a + 1) * dst.size(), dst.begin());
    }
  }
}

ActionDistributions TabularEstimator::predict(const GridMap& map, State s, State g,
                                              bool use_target) const {
  ActionDistributions out(cfg_.num_bins);
  const auto k = key(map, s, g);
  if (use_target) {
    std::vector<double> block(block_);
    read_target(k, block);
    fill_prediction(block.data(), out);
  } else {
    const double* block = find(k);
    fill_prediction(block ? block : init_.data(), out);
  }
  return out;
}

std::array<double, kNumActions> TabularEstimator::action_distances(const GridMap& map, State s,
                                                                   State g) const {
  const double* block = find(key(map, s, g));
  if (!block) block = init_.data();
  std::array<double, kNumActions> d{};
  for (int a = 0; a < kNumActions; ++a) d[a] = block_action_distance(block, a);
  return d;
}

double TabularEstimator::train_batch(std::span<const Transition> batch, MapSet maps,
                                     int goal_radius) {
  if (batch.empty()) return 0.0;
  const std::size_t bins = cfg_.num_bins + 1;
  const double lr = cfg_.learning_rate;
  std::vector<double> next_block(block_);
  std::vector<double> target(bins);
  double loss_sum = 0.0;
  for (const Transition& tr : batch) {
    const GridMap& map = *maps[tr.map_id];
    const bool reached = within_radius(map, tr.state, tr.goal, goal_radius);
    const int a = action_index(tr.action);
    if (!reached) read_target(key(map, tr.next_state, tr.goal), next_block);

    const std::size_t sl = slot(key(map, tr.state, tr.goal));
    sync_target(sl);
    double* th = theta_.data() + sl * block_;

    if (cfg_.head == Head::Scalar) {
      double y = 0.0;
      if (!reached) {
        double best = *std::min_element(next_block.begin(), next_block.end());
        y = std::min(double(cfg_.num_bins), 1.0 + std::clamp(best, 0.0, double(cfg_.num_bins)));
      }
      const double err = th[a] - y;
      loss_sum += err * err;
      th[a] -= lr * err;
      continue;
    }

    if (reached) {
      std::fill(target.begin(), target.end(), 0.0);
      target[0] = 1.0;
    } else {
      int best = 0;
      double best_d = block_action_distance(next_block.data(), 0);
      for (int b = 1; b < kNumActions; ++b) {
        double d = block_action_distance(next_block.data(), b);
        if (d < best_d) {
          best_d = d;
          best = b;
        }
      }
      distributional_target_into(std::span<const double>(next_block).subspan(best * bins, bins),
                                  false, target);
    }
    std::span<double> pred(th + a * bins, bins);
    loss_sum += kl_loss(pred, target);
    double sum = 0.0;
    for (std::size_t i = 0; i < bins; ++i) {
      pred[i] = (1.0 - lr) * pred[i] + lr * target[i];
      sum += pred[i];
    }
    for (double& p : pred) p /= sum;
  }
  ++steps_;
  if (steps_ % static_cast<std::uint64_t>(cfg_.target_update_period) == 0) ++epoch_;
  return loss_sum / static_cast<double>(batch.size());
}

double TabularEstimator::sweep(const GridMap& map, double rate) {
  if (map.num_free() != num_cells_) throw std::invalid_argument("sweep map does not match table");
  const int n = num_cells_;
  const std::size_t bins = cfg_.num_bins + 1;
  // Snapshot of all online blocks, dense over (s, g).
  std::vector<double> old(static_cast<std::size_t>(n) * n * block_);
  for (int s = 0; s < n; ++s) {
    for (int g = 0; g < n; ++g) {
      const double* b = find(static_cast<std::uint64_t>(s) * n + g);
      std::copy(b ? b : init_.data(), (b ? b : init_.data()) + block_,
                old.begin() + (static_cast<std::size_t>(s) * n + g) * block_);
    }
  }
  auto old_block = [&](int s, int g) { return old.data() + (static_cast<std::size_t>(s) * n + g) * block_; };

  double max_change = 0.0;
  std::vector<double> target(bins);
  for (int si = 0; si < n; ++si) {
    const State s = map.free_state(si);
    for (int gi = 0; gi < n; ++gi) {
      const bool reached = si == gi;
      const std::size_t sl = slot(static_cast<std::uint64_t>(si) * n + gi);
      sync_target(sl);
      double* th = theta_.data() + sl * block_;
      for (int a = 0; a < kNumActions; ++a) {
        State next = moved(s, action_from_index(a));
        if (map.is_wall(next)) next = s;
        const double* nb = old_block(map.free_index(next), gi);
        int best = 0;
        double best_d = block_action_distance(nb, 0);
        for (int b = 1; b < kNumActions; ++b) {
          double d = block_action_distance(nb, b);
          if (d < best_d) {
            best_d = d;
            best = b;
          }
        }
        if (cfg_.head == Head::Scalar) {
          double y = reached ? 0.0 : std::min(double(cfg_.num_bins), 1.0 + best_d);
          double delta = rate * (y - th[a]);
          th[a] += delta;
          max_change = std::max(max_change, std::abs(delta));
          continue;
        }
        if (reached) {
          std::fill(target.begin(), target.end(), 0.0);
          target[0] = 1.0;
        } else {
          distributional_target_into(std::span<const double>(nb + best * bins, bins), false,
                                      target);
        }
        double* p = th + a * bins;
        for (std::size_t i = 0; i < bins; ++i) {
          double v = (1.0 - rate) * p[i] + rate * target[i];
          max_change = std::max(max_change, std::abs(v - p[i]));
          p[i] = v;
        }
      }
    }
  }
  return max_change;
}

void TabularEstimator::save_parameters(BinaryWriter& out) const {
  out.u32(static_cast<std::uint32_t>(num_cells_));
  std::vector<std::uint64_t> keys;
  keys.reserve(index_.size());
  for (const auto& [k, v] : index_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  out.u64(keys.size());
  std::vector<double> tgt(block_);
  for (auto k : keys) {
    const std::size_t sl = index_.at(k);
    out.u64(k);
    out.f64s(std::span<const double>(theta_.data() + sl * block_, block_));
    read_target(k, tgt);
    out.f64s(tgt);
  }
}

void TabularEstimator::load_parameters(BinaryReader& in, std::uint64_t steps) {
  num_cells_ = static_cast<int>(in.u32());
  steps_ = steps;
  epoch_ = steps_ / static_cast<std::uint64_t>(cfg_.target_update_period);
  index_.clear();
  theta_.clear();
  target_.clear();
  synced_.clear();
  const std::uint64_t count = in.u64();
  const std::uint64_t limit = static_cast<std::uint64_t>(num_cells_) * num_cells_;
  if (count > limit) throw CheckpointError("tabular entry count exceeds key space");
  index_.reserve(count);
  theta_.resize(count * block_);
  target_.resize(count * block_);
  synced_.assign(count, epoch_);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t k = in.u64();
    if (k >= limit || !index_.emplace(k, static_cast<std::uint32_t>(i)).second) {
      throw CheckpointError("bad tabular key");
    }
    in.f64s(std::span<double>(theta_.data() + i * block_, block_));
    in.f64s(std::span<double>(target_.data() + i * block_, block_));
  }
}

std::unique_ptr<ValueEstimator> TabularEstimator::clone() const {
  return std::make_unique<TabularEstimator>(*this);
}

}  // namespace sorb
