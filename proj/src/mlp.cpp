#include "sorb/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "sorb/distribution.hpp"

namespace sorb {

Mlp::Mlp(std::vector<int> layer_sizes, Rng& rng) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("mlp needs input and output sizes");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] <= 0 || sizes_[l + 1] <= 0) throw std::invalid_argument("mlp layer size <= 0");
    offsets_.push_back(total);
    total += static_cast<std::size_t>(sizes_[l + 1]) * sizes_[l] + sizes_[l + 1];
  }
  params_.assign(total, 0.0);
  for (int l = 0; l < num_layers(); ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> init(-limit, limit);
    double* w = params_.data() + offsets_[l];
    for (int i = 0; i < in * out; ++i) w[i] = init(rng);
  }
}

Eigen::Map<const RowMatrix> Mlp::weights(int layer) const {
  return {params_.data() + offsets_[layer], sizes_[layer + 1], sizes_[layer]};
}

Eigen::Map<const Eigen::VectorXd> Mlp::bias(int layer) const {
  return {params_.data() + offsets_[layer] + static_cast<std::size_t>(sizes_[layer + 1]) * sizes_[layer],
          sizes_[layer + 1]};
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input) const {
  Cache cache;
  return forward(input, cache);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input, Cache& cache) const {
  if (input.rows() != input_size()) throw std::invalid_argument("mlp input shape mismatch");
  cache.activations.clear();
  cache.activations.push_back(input);
  Eigen::MatrixXd h = input;
  for (int l = 0; l < num_layers(); ++l) {
    Eigen::MatrixXd z = weights(l) * h;
    z.colwise() += bias(l);
    if (l + 1 < num_layers()) {
      h = z.array().tanh().matrix();
      cache.activations.push_back(h);
    } else {
      h = std::move(z);
    }
  }
  return h;
}

void Mlp::backward(const Cache& cache, const Eigen::MatrixXd& grad_output,
                   std::span<double> grad) const {
  if (grad.size() != params_.size()) throw std::invalid_argument("gradient size mismatch");
  Eigen::MatrixXd delta = grad_output;
  for (int l = num_layers() - 1; l >= 0; --l) {
    const Eigen::MatrixXd& a = cache.activations[l];
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    Eigen::Map<RowMatrix> gw(grad.data() + offsets_[l], out, in);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + offsets_[l] + static_cast<std::size_t>(out) * in, out);
    gw.noalias() += delta * a.transpose();
    gb += delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = weights(l).transpose() * delta;
      delta = (back.array() * (1.0 - a.array().square())).matrix();
    }
  }
}

Eigen::MatrixXd action_softmax(const Eigen::MatrixXd& logits, int bins) {
  Eigen::MatrixXd probs(logits.rows(), logits.cols());
  const int actions = static_cast<int>(logits.rows()) / bins;
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    for (int a = 0; a < actions; ++a) {
      auto z = logits.col(j).segment(a * bins, bins);
      const double mx = z.maxCoeff();
      auto e = (z.array() - mx).exp();
      probs.col(j).segment(a * bins, bins) = (e / e.sum()).matrix();
    }
  }
  return probs;
}

double distributional_head_loss(const Eigen::MatrixXd& logits, int bins,
                                std::span<const int> actions, const Eigen::MatrixXd& targets,
                                Eigen::MatrixXd* grad_logits) {
  const Eigen::Index batch = logits.cols();
  if (static_cast<Eigen::Index>(actions.size()) != batch || targets.cols() != batch ||
      targets.rows() != bins) {
    throw std::invalid_argument("distributional loss shape mismatch");
  }
  if (grad_logits) grad_logits->setZero(logits.rows(), logits.cols());
  double loss = 0.0;
  const double scale = 1.0 / static_cast<double>(batch);
  Eigen::VectorXd p(bins);
  for (Eigen::Index j = 0; j < batch; ++j) {
    auto z = logits.col(j).segment(actions[j] * bins, bins);
    const double mx = z.maxCoeff();
    p = (z.array() - mx).exp().matrix();
    p /= p.sum();
    // d/dz_k of -sum_i t_i log max(p_i, c) = -t_k [p_k>=c] + p_k sum_i t_i [p_i>=c]
    double active_mass = 0.0;
    for (int i = 0; i < bins; ++i) {
      const double t = targets(i, j);
      if (t > 0.0) loss += t * (std::log(t) - std::log(std::max(p[i], kLogClamp)));
      if (p[i] >= kLogClamp) active_mass += t;
    }
    if (grad_logits) {
      auto g = grad_logits->col(j).segment(actions[j] * bins, bins);
      for (int k = 0; k < bins; ++k) {
        const double own = p[k] >= kLogClamp ? targets(k, j) : 0.0;
        g[k] = scale * (p[k] * active_mass - own);
      }
    }
  }
  return loss * scale;
}

double mlp_loss_and_gradient(const Mlp& net, const Eigen::MatrixXd& inputs, int bins,
                             std::span<const int> actions, const Eigen::MatrixXd& targets,
                             std::vector<double>* grad) {
  Mlp::Cache cache;
  Eigen::MatrixXd logits = net.forward(inputs, cache);
  if (!grad) return distributional_head_loss(logits, bins, actions, targets, nullptr);
  Eigen::MatrixXd dlogits;
  double loss = distributional_head_loss(logits, bins, actions, targets, &dlogits);
  grad->assign(net.num_parameters(), 0.0);
  net.backward(cache, dlogits, *grad);
  return loss;
}

void Adam::step(std::span<double> params, std::span<const double> grad, double lr) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw std::invalid_argument("adam size mismatch");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.epsilon);
  }
}

}  // namespace sorb
