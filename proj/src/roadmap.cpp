#include "sorb/roadmap.hpp"

#include <algorithm>
#include <iterator>
#include <set>

#include "sorb/parallel.hpp"

namespace sorb {

const char* buffer_source_name(BufferSource s) {
  return s == BufferSource::TrainingSubsample ? "training_subsample" : "random_walk";
}

SearchBuffer make_search_buffer(std::span<const State> candidates, std::size_t max_size,
                                BufferSource source, Rng& rng) {
  std::vector<State> distinct;
  std::set<State> seen;
  for (State s : candidates) {
    if (seen.insert(s).second) distinct.push_back(s);
  }
  SearchBuffer out;
  out.source = source;
  if (distinct.size() <= max_size) {
    out.nodes = std::move(distinct);
  } else {
    out.nodes.reserve(max_size);
    std::sample(distinct.begin(), distinct.end(), std::back_inserter(out.nodes), max_size, rng);
  }
  return out;
}

std::vector<int> ShortestPaths::path(int u, int v) const {
  std::vector<int> out;
  if (u == v) return {u};
  if (next_hop(u, v) < 0) return out;
  out.push_back(u);
  while (u != v) {
    u = next_hop(u, v);
    out.push_back(u);
  }
  return out;
}

ShortestPaths floyd_warshall(std::span<const double> weights, int n) {
  if (weights.size() != static_cast<std::size_t>(n) * n) {
    throw std::invalid_argument("floyd_warshall: weight matrix is not n x n");
  }
  ShortestPaths sp;
  sp.n = n;
  sp.dist.assign(weights.begin(), weights.end());
  sp.next.assign(static_cast<std::size_t>(n) * n, -1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const std::size_t ij = static_cast<std::size_t>(i) * n + j;
      if (i == j) {
        sp.dist[ij] = 0.0;
        sp.next[ij] = i;
      } else if (sp.dist[ij] < kInfinity) {
        if (sp.dist[ij] < 0.0) throw std::invalid_argument("floyd_warshall: negative weight");
        sp.next[ij] = j;
      }
    }
  }
  for (int k = 0; k < n; ++k) {
    const double* dk = sp.dist.data() + static_cast<std::size_t>(k) * n;
    for (int i = 0; i < n; ++i) {
      double* di = sp.dist.data() + static_cast<std::size_t>(i) * n;
      const double dik = di[k];
      if (dik == kInfinity || i == k) continue;
      int* ni = sp.next.data() + static_cast<std::size_t>(i) * n;
      const int hop = ni[k];
      for (int j = 0; j < n; ++j) {
        const double via = dik + dk[j];
        if (via < di[j]) {
          di[j] = via;
          ni[j] = hop;
        }
      }
    }
  }
  return sp;
}

Roadmap::Roadmap(GridMap map, SearchBuffer buffer, double maxdist, std::vector<double> edge_weights)
    : map_(std::move(map)),
      buffer_(std::move(buffer)),
      maxdist_(maxdist),
      edge_weights_(std::move(edge_weights)) {
  const int n = num_nodes();
  if (edge_weights_.size() != static_cast<std::size_t>(n) * n) {
    throw std::invalid_argument("roadmap: edge weight matrix does not match buffer size");
  }
  std::vector<double> pruned(edge_weights_.size(), kInfinity);
  for (int u = 0; u < n; ++u) {
    for (int v = 0; v < n; ++v) {
      if (has_edge(u, v)) pruned[static_cast<std::size_t>(u) * n + v] = raw_weight(u, v);
    }
  }
  apsp_ = floyd_warshall(pruned, n);
}

std::size_t Roadmap::num_edges() const {
  std::size_t count = 0;
  for (int u = 0; u < num_nodes(); ++u) {
    for (int v = 0; v < num_nodes(); ++v) count += has_edge(u, v);
  }
  return count;
}

Roadmap Roadmap::with_maxdist(double maxdist) const {
  return Roadmap(map_, buffer_, maxdist, edge_weights_);
}

void Roadmap::write_edges_csv(std::ostream& out) const {
  out << "u_index,v_index,weight\n";
  for (int u = 0; u < num_nodes(); ++u) {
    for (int v = 0; v < num_nodes(); ++v) {
      if (has_edge(u, v)) out << u << ',' << v << ',' << raw_weight(u, v) << '\n';
    }
  }
}

void Roadmap::write_nodes_csv(std::ostream& out) const {
  out << "index,x,y\n";
  for (int i = 0; i < num_nodes(); ++i) {
    out << i << ',' << buffer_.nodes[i].x << ',' << buffer_.nodes[i].y << '\n';
  }
}

Roadmap build_roadmap(const GridMap& map, const SearchBuffer& buffer, const ValueEnsemble& ens,
                      double maxdist) {
  const std::size_t n = buffer.nodes.size();
  std::vector<double> weights(n * n, 0.0);
  // One row per task: the row's pairs share s.
  parallel_for(n, [&](std::size_t u) {
    std::vector<StatePair> pairs(n);
    for (std::size_t v = 0; v < n; ++v) pairs[v] = {buffer.nodes[u], buffer.nodes[v]};
    ens.aggregate_distances(map, pairs, std::span<double>(weights).subspan(u * n, n));
    weights[u * n + u] = 0.0;
  });
  return Roadmap(map, buffer, maxdist, std::move(weights));
}

Roadmap refresh_cache(const Roadmap& rm, const ValueEnsemble& ens) {
  return build_roadmap(rm.map(), rm.buffer(), ens, rm.maxdist());
}

std::optional<Plan> shortest_path(const Roadmap& rm, const ValueEnsemble& ens, State s, State g) {
  const GridMap& map = rm.map();
  const double maxdist = rm.maxdist();
  const int n = rm.num_nodes();
  const auto& nodes = rm.buffer().nodes;

  std::vector<StatePair> pairs;
  pairs.reserve(2 * static_cast<std::size_t>(n) + 1);
  for (State u : nodes) pairs.push_back({s, u});
  for (State v : nodes) pairs.push_back({v, g});
  pairs.push_back({s, g});
  std::vector<double> d(pairs.size());
  ens.aggregate_distances(map, pairs, d);
  const double direct = d.back();

  std::vector<int> entry, exit;
  for (int i = 0; i < n; ++i) {
    if (d[i] < maxdist) entry.push_back(i);
    if (d[n + i] < maxdist) exit.push_back(i);
  }
  double best = kInfinity;
  int best_u = -1, best_v = -1;
  const ShortestPaths& D = rm.apsp();
  for (int u : entry) {
    for (int v : exit) {
      const double c = d[u] + D.at(u, v) + d[n + v];
      if (c < best) {
        best = c;
        best_u = u;
        best_v = v;
      }
    }
  }

  Plan plan;
  if (direct < maxdist && direct <= best) {
    plan.total = direct;
    plan.direct = true;
    return plan;
  }
  if (best_u < 0) return std::nullopt;
  plan.total = best;
  plan.node_indices = D.path(best_u, best_v);
  for (int i : plan.node_indices) plan.waypoints.push_back(nodes[i]);
  return plan;
}

}  // namespace sorb
