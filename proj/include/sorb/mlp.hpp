#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "sorb/grid_world.hpp"

namespace sorb {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Fully connected network with tanh hidden units and a linear output layer.
// Inputs and outputs are column-major batches (features x batch).
//
// All parameters live in one flat vector, layer by layer: the weight matrix
// (out x in, row-major) followed by the bias (out).
class Mlp {
 public:
  Mlp() = default;
  // layer_sizes = {inputs, hidden..., outputs}; Glorot-uniform weights, zero
  // biases.
  Mlp(std::vector<int> layer_sizes, Rng& rng);

  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  const std::vector<int>& layer_sizes() const { return sizes_; }

  std::size_t num_parameters() const { return params_.size(); }
  std::span<const double> parameters() const { return params_; }
  std::span<double> parameters() { return params_; }

  struct Cache {
    std::vector<Eigen::MatrixXd> activations;  // input, then each hidden layer
  };

  Eigen::MatrixXd forward(const Eigen::MatrixXd& input) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& input, Cache& cache) const;
  // Accumulates dLoss/dtheta into `grad` (same layout as parameters()) given
  // dLoss/doutput.
  void backward(const Cache& cache, const Eigen::MatrixXd& grad_output,
                std::span<double> grad) const;

 private:
  Eigen::Map<const RowMatrix> weights(int layer) const;
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;

  std::vector<int> sizes_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

// Per-action softmax of a (actions * bins) x batch logit matrix.
Eigen::MatrixXd action_softmax(const Eigen::MatrixXd& logits, int bins);

// Mean over the batch of KL(target_j || softmax(logits block of actions[j])),
// with predictions clamped at kLogClamp inside the log. Writes
// dLoss/dlogits into grad_logits when non-null.
double distributional_head_loss(const Eigen::MatrixXd& logits, int bins,
                                std::span<const int> actions, const Eigen::MatrixXd& targets,
                                Eigen::MatrixXd* grad_logits);

// Loss and exact gradient of the distributional head w.r.t. all parameters.
double mlp_loss_and_gradient(const Mlp& net, const Eigen::MatrixXd& inputs, int bins,
                             std::span<const int> actions, const Eigen::MatrixXd& targets,
                             std::vector<double>* grad);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  explicit Adam(std::size_t n, AdamConfig cfg = {}) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}
  void step(std::span<double> params, std::span<const double> grad, double lr);

 private:
  AdamConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  long t_ = 0;
};

}  // namespace sorb
