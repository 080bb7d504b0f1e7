#pragma once

#include <span>
#include <stdexcept>
#include <vector>

namespace sorb {

// Categorical distribution over distance bins 0..N. Bin i < N means "exactly
// i steps"; bin N means "N or more steps".
class ValueDistribution {
 public:
  ValueDistribution() = default;
  explicit ValueDistribution(std::vector<double> probs);

  static ValueDistribution uniform(int num_bins);
  static ValueDistribution point_mass(int num_bins, int bin);

  // N, the index of the catch-all bin.
  int num_bins() const { return static_cast<int>(probs_.size()) - 1; }
  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> probs() const { return probs_; }

  friend bool operator==(const ValueDistribution&, const ValueDistribution&) = default;

 private:
  std::vector<double> probs_;
};

class DistributionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kSimplexTolerance = 1e-6;
inline constexpr double kLogClamp = 1e-8;

bool is_simplex(std::span<const double> probs, double tol = kSimplexTolerance);

// Bellman target under the -1 reward: a point mass at bin 0 once the goal is
// reached, otherwise the right shift of `next_best` with the last two bins
// merged. Timeouts bootstrap like any other non-terminal step.
ValueDistribution distributional_target(const ValueDistribution& next_best, bool reached,
                                        bool timeout = false);
void distributional_target_into(std::span<const double> next_best, bool reached,
                                std::span<double> out);

// sum_i i * p_i, with the catch-all bin valued at N.
double expected_distance(std::span<const double> probs);
inline double expected_distance(const ValueDistribution& d) { return expected_distance(d.probs()); }

// KL(target || pred), pred clamped below at kLogClamp and 0 log 0 = 0.
double kl_loss(std::span<const double> pred, std::span<const double> target);
inline double kl_loss(const ValueDistribution& pred, const ValueDistribution& target) {
  return kl_loss(pred.probs(), target.probs());
}

// A distribution with the given mean, spread over the two neighbouring bins.
// Used to express scalar distance estimates in distribution form.
void two_point_into(double mean, std::span<double> out);

}  // namespace sorb
