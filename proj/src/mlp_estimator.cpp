#include "sorb/mlp_estimator.hpp"

#include <algorithm>
#include <cmath>

#include "sorb/checkpoint.hpp"

namespace sorb {

int encoded_size(Encoder encoder) {
  switch (encoder) {
    case Encoder::Coords: return 4;
    case Encoder::LocalView: {
      const int side = 2 * kLocalViewRadius + 1;
      return side * side + 4;
    }
    case Encoder::Cell: break;
  }
  throw std::invalid_argument("encoder has no network input");
}

void encode(Encoder encoder, const GridMap& map, State s, State g, std::span<double> out) {
  if (!map.is_free(s) || !map.is_free(g)) throw std::out_of_range("encode: state outside map");
  const double sx = 1.0 / (map.width() - 1);
  const double sy = 1.0 / (map.height() - 1);
  if (encoder == Encoder::Coords) {
    out[0] = s.x * sx;
    out[1] = s.y * sy;
    out[2] = g.x * sx;
    out[3] = g.y * sy;
    return;
  }
  std::size_t i = 0;
  for (int dy = -kLocalViewRadius; dy <= kLocalViewRadius; ++dy) {
    for (int dx = -kLocalViewRadius; dx <= kLocalViewRadius; ++dx) {
      out[i++] = map.is_wall({s.x + dx, s.y + dy}) ? 1.0 : 0.0;
    }
  }
  const int dx = g.x - s.x;
  const int dy = g.y - s.y;
  const int clip = kLocalViewRadius + 1;
  out[i++] = dx * sx;
  out[i++] = dy * sy;
  out[i++] = std::clamp(dx, -clip, clip) / double(clip);
  out[i++] = std::clamp(dy, -clip, clip) / double(clip);
}

namespace {

std::vector<int> layer_sizes(const EstimatorConfig& cfg) {
  std::vector<int> sizes{encoded_size(cfg.encoder)};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(kNumActions * (cfg.head == Head::Distributional ? cfg.num_bins + 1 : 1));
  return sizes;
}

Mlp init_network(const EstimatorConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  return Mlp(layer_sizes(cfg), rng);
}

Eigen::MatrixXd encode_batch(Encoder encoder, const GridMap& map, std::span<const StatePair> pairs) {
  const int n = encoded_size(encoder);
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t j = 0; j < pairs.size(); ++j) {
    encode(encoder, map, pairs[j].s, pairs[j].g, std::span<double>(x.col(j).data(), n));
  }
  return x;
}

}  // namespace

MlpEstimator::MlpEstimator(const EstimatorConfig& cfg, std::string map_name, std::uint64_t seed)
    : cfg_(cfg), map_name_(std::move(map_name)), online_(init_network(cfg, seed)) {
  cfg_.validate();
  if (cfg_.encoder == Encoder::Cell) throw std::invalid_argument("mlp needs coords or local_view");
  target_ = online_;
  adam_ = Adam(online_.num_parameters());
  grad_.assign(online_.num_parameters(), 0.0);
}

int MlpEstimator::outputs_per_action() const {
  return cfg_.head == Head::Distributional ? cfg_.num_bins + 1 : 1;
}

std::array<double, kNumActions> MlpEstimator::column_distances(const Eigen::MatrixXd& out,
                                                               Eigen::Index col) const {
  std::array<double, kNumActions> d{};
  const int bins = outputs_per_action();
  for (int a = 0; a < kNumActions; ++a) {
    if (cfg_.head == Head::Scalar) {
      d[a] = std::clamp(out(a, col), 0.0, double(cfg_.num_bins));
    } else {
      auto z = out.col(col).segment(a * bins, bins);
      const double mx = z.maxCoeff();
      double total = 0.0;
      double weighted = 0.0;
      for (int i = 0; i < bins; ++i) {
        const double e = std::exp(z[i] - mx);
        total += e;
        weighted += i * e;
      }
      d[a] = weighted / total;
    }
  }
  return d;
}

ActionDistributions MlpEstimator::predict(const GridMap& map, State s, State g,
                                          bool use_target) const {
  StatePair pair{s, g};
  Eigen::MatrixXd x = encode_batch(cfg_.encoder, map, {&pair, 1});
  Eigen::MatrixXd out = (use_target ? target_ : online_).forward(x);
  ActionDistributions result(cfg_.num_bins);
  if (cfg_.head == Head::Scalar) {
    for (int a = 0; a < kNumActions; ++a) two_point_into(out(a, 0), result.action(a));
    return result;
  }
  Eigen::MatrixXd probs = action_softmax(out, cfg_.num_bins + 1);
  for (int a = 0; a < kNumActions; ++a) {
    auto dst = result.action(a);
    for (int i = 0; i <= cfg_.num_bins; ++i) dst[i] = probs(a * (cfg_.num_bins + 1) + i, 0);
  }
  return result;
}

void MlpEstimator::distances(const GridMap& map, std::span<const StatePair> pairs,
                             std::span<double> out) const {
  constexpr std::size_t kChunk = 1024;
  for (std::size_t start = 0; start < pairs.size(); start += kChunk) {
    const auto chunk = pairs.subspan(start, std::min(kChunk, pairs.size() - start));
    Eigen::MatrixXd y = online_.forward(encode_batch(cfg_.encoder, map, chunk));
    for (std::size_t j = 0; j < chunk.size(); ++j) {
      auto d = column_distances(y, static_cast<Eigen::Index>(j));
      out[start + j] = *std::min_element(d.begin(), d.end());
    }
  }
}

double MlpEstimator::train_batch(std::span<const Transition> batch, MapSet maps,
                                 int goal_radius) {
  if (batch.empty()) return 0.0;
  const int n_in = encoded_size(cfg_.encoder);
  const auto batch_size = static_cast<Eigen::Index>(batch.size());
  Eigen::MatrixXd x(n_in, batch_size);
  Eigen::MatrixXd xn(n_in, batch_size);
  std::vector<int> actions(batch.size());
  std::vector<char> reached(batch.size());
  for (Eigen::Index j = 0; j < batch_size; ++j) {
    const Transition& tr = batch[j];
    const GridMap& map = *maps[tr.map_id];
    encode(cfg_.encoder, map, tr.state, tr.goal, std::span<double>(x.col(j).data(), n_in));
    encode(cfg_.encoder, map, tr.next_state, tr.goal, std::span<double>(xn.col(j).data(), n_in));
    actions[j] = action_index(tr.action);
    reached[j] = within_radius(map, tr.state, tr.goal, goal_radius);
  }

  const Eigen::MatrixXd next_out = target_.forward(xn);
  Mlp::Cache cache;
  const Eigen::MatrixXd out = online_.forward(x, cache);
  Eigen::MatrixXd grad_out;
  double loss = 0.0;

  if (cfg_.head == Head::Scalar) {
    grad_out.setZero(out.rows(), out.cols());
    const double n = static_cast<double>(cfg_.num_bins);
    for (Eigen::Index j = 0; j < batch_size; ++j) {
      double y = 0.0;
      if (!reached[j]) {
        auto d = column_distances(next_out, j);
        y = std::min(n, 1.0 + *std::min_element(d.begin(), d.end()));
      }
      const double err = out(actions[j], j) - y;
      loss += err * err;
      grad_out(actions[j], j) = 2.0 * err / static_cast<double>(batch_size);
    }
    loss /= static_cast<double>(batch_size);
  } else {
    const int bins = cfg_.num_bins + 1;
    const Eigen::MatrixXd next_probs = action_softmax(next_out, bins);
    Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(bins, batch_size);
    for (Eigen::Index j = 0; j < batch_size; ++j) {
      std::span<double> t(targets.col(j).data(), bins);
      if (reached[j]) {
        t[0] = 1.0;
        continue;
      }
      auto d = column_distances(next_out, j);
      const int best = action_index(argmin_action(d));
      std::span<const double> q(next_probs.col(j).data() + best * bins, bins);
      distributional_target_into(q, false, t);
    }
    loss = distributional_head_loss(out, bins, actions, targets, &grad_out);
  }

  std::fill(grad_.begin(), grad_.end(), 0.0);
  online_.backward(cache, grad_out, grad_);
  adam_.step(online_.parameters(), grad_, cfg_.learning_rate);

  ++steps_;
  if (steps_ % static_cast<std::uint64_t>(cfg_.target_update_period) == 0) {
    const double tau = cfg_.target_update_rate;
    auto src = online_.parameters();
    auto dst = target_.parameters();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = (1.0 - tau) * dst[i] + tau * src[i];
  }
  return loss;
}

void MlpEstimator::save_parameters(BinaryWriter& out) const {
  out.u64(online_.num_parameters());
  out.f64s(online_.parameters());
  out.f64s(target_.parameters());
}

void MlpEstimator::load_parameters(BinaryReader& in, std::uint64_t steps) {
  const std::uint64_t n = in.u64();
  if (n != online_.num_parameters()) throw CheckpointError("mlp parameter count mismatch");
  in.f64s(online_.parameters());
  in.f64s(target_.parameters());
  steps_ = steps;
  adam_ = Adam(online_.num_parameters());
}

std::unique_ptr<ValueEstimator> MlpEstimator::clone() const {
  return std::make_unique<MlpEstimator>(*this);
}

}  // namespace sorb
