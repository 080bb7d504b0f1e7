#pragma once

#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "sorb/ensemble.hpp"
#include "sorb/grid_world.hpp"

namespace sorb {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class BufferSource : std::uint8_t { TrainingSubsample = 0, RandomWalk = 1 };

const char* buffer_source_name(BufferSource s);

// Roadmap nodes: distinct cells, at most the configured size.
struct SearchBuffer {
  std::vector<State> nodes;
  BufferSource source = BufferSource::TrainingSubsample;

  std::size_t size() const { return nodes.size(); }
  bool empty() const { return nodes.empty(); }
};

// Deduplicates `candidates` (first occurrence wins) and keeps a uniform
// subset of at most `max_size` of them, in candidate order.
SearchBuffer make_search_buffer(std::span<const State> candidates, std::size_t max_size,
                                BufferSource source, Rng& rng);

// Dense n x n row-major matrices.
struct ShortestPaths {
  int n = 0;
  std::vector<double> dist;
  // next[i * n + j]: first hop after i on a shortest i -> j path, -1 if none.
  std::vector<int> next;

  double at(int i, int j) const { return dist[static_cast<std::size_t>(i) * n + j]; }
  int next_hop(int i, int j) const { return next[static_cast<std::size_t>(i) * n + j]; }
  // Node indices from u to v inclusive; empty when v is unreachable.
  std::vector<int> path(int u, int v) const;
};

// Weights: n x n, nonnegative, kInfinity for absent edges. The diagonal is
// treated as 0.
ShortestPaths floyd_warshall(std::span<const double> weights, int n);

struct Plan {
  double total = kInfinity;
  // Buffer states from the entry node u to the exit node v; empty when the
  // direct route is used.
  std::vector<State> waypoints;
  std::vector<int> node_indices;
  bool direct = false;
};

class Roadmap {
 public:
  Roadmap(GridMap map, SearchBuffer buffer, double maxdist, std::vector<double> edge_weights);

  const GridMap& map() const { return map_; }
  const SearchBuffer& buffer() const { return buffer_; }
  double maxdist() const { return maxdist_; }
  int num_nodes() const { return static_cast<int>(buffer_.nodes.size()); }
  // Aggregated distances before pruning.
  const std::vector<double>& edge_weights() const { return edge_weights_; }
  double raw_weight(int u, int v) const {
    return edge_weights_[static_cast<std::size_t>(u) * num_nodes() + v];
  }
  const ShortestPaths& apsp() const { return apsp_; }
  bool has_edge(int u, int v) const { return u != v && raw_weight(u, v) < maxdist_; }
  std::size_t num_edges() const;

  // Same nodes and raw weights, different pruning threshold.
  Roadmap with_maxdist(double maxdist) const;

  // CSV "u_index,v_index,weight" over kept edges.
  void write_edges_csv(std::ostream& out) const;
  // CSV "index,x,y".
  void write_nodes_csv(std::ostream& out) const;

 private:
  GridMap map_;
  SearchBuffer buffer_;
  double maxdist_;
  std::vector<double> edge_weights_;
  ShortestPaths apsp_;
};

// Evaluates the ensemble on every ordered node pair, prunes at maxdist and
// caches all-pairs shortest paths.
Roadmap build_roadmap(const GridMap& map, const SearchBuffer& buffer, const ValueEnsemble& ens,
                      double maxdist);

// Rebuilds the cache from the current ensemble parameters.
Roadmap refresh_cache(const Roadmap& rm, const ValueEnsemble& ens);

// min over (u, v) of d(s, u) + D[u][v] + d(v, g), compared against the direct
// d(s, g). Legs at or above maxdist are dropped. The direct route wins ties.
// nullopt when nothing is finite.
std::optional<Plan> shortest_path(const Roadmap& rm, const ValueEnsemble& ens, State s, State g);

}  // namespace sorb
