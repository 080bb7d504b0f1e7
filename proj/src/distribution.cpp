#include "sorb/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sorb {

ValueDistribution::ValueDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.size() < 2) throw DistributionError("distribution needs at least two bins");
  if (!is_simplex(probs_)) throw DistributionError("probabilities do not form a simplex");
}

ValueDistribution ValueDistribution::uniform(int num_bins) {
  if (num_bins < 1) throw DistributionError("num_bins must be >= 1");
  return ValueDistribution(std::vector<double>(num_bins + 1, 1.0 / (num_bins + 1)));
}

ValueDistribution ValueDistribution::point_mass(int num_bins, int bin) {
  if (num_bins < 1 || bin < 0 || bin > num_bins) throw DistributionError("bad point mass");
  std::vector<double> p(num_bins + 1, 0.0);
  p[bin] = 1.0;
  return ValueDistribution(std::move(p));
}

bool is_simplex(std::span<const double> probs, double tol) {
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) return false;
    sum += p;
  }
  return std::abs(sum - 1.0) <= tol;
}

void distributional_target_into(std::span<const double> next_best, bool reached,
                                std::span<double> out) {
  const std::size_t size = next_best.size();
  if (out.size() != size || size < 2) throw DistributionError("target size mismatch");
  if (reached) {
    std::fill(out.begin(), out.end(), 0.0);
    out[0] = 1.0;
    return;
  }
  const std::size_t last = size - 1;
  out[last] = next_best[last - 1] + next_best[last];
  for (std::size_t i = last - 1; i >= 1; --i) out[i] = next_best[i - 1];
  out[0] = 0.0;
}

ValueDistribution distributional_target(const ValueDistribution& next_best, bool reached,
                                        bool /*timeout*/) {
  if (!is_simplex(next_best.probs())) throw DistributionError("target input is not a simplex");
  std::vector<double> out(next_best.size());
  distributional_target_into(next_best.probs(), reached, out);
  return ValueDistribution(std::move(out));
}

double expected_distance(std::span<const double> probs) {
  double d = 0.0;
  for (std::size_t i = 1; i < probs.size(); ++i) d += static_cast<double>(i) * probs[i];
  return d;
}

double kl_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw DistributionError("kl_loss size mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (target[i] <= 0.0) continue;
    loss += target[i] * (std::log(target[i]) - std::log(std::max(pred[i], kLogClamp)));
  }
  return std::max(loss, 0.0);
}

void two_point_into(double mean, std::span<double> out) {
  const double top = static_cast<double>(out.size() - 1);
  mean = std::clamp(mean, 0.0, top);
  std::fill(out.begin(), out.end(), 0.0);
  auto lo = static_cast<std::size_t>(std::floor(mean));
  if (lo >= out.size() - 1) {
    out.back() = 1.0;
    return;
  }
  double frac = mean - static_cast<double>(lo);
  out[lo] = 1.0 - frac;
  out[lo + 1] = frac;
}

}  // namespace sorb
