#include "sorb/search_policy.hpp"

#include <deque>

namespace sorb {

PolicyDecision decide_with_waypoints(const PolicyState& ps, State s, State g,
                                     std::span<const State> waypoints) {
  const GridMap& map = ps.roadmap->map();
  const ValueEnsemble& ens = *ps.ensemble;
  std::size_t first = 0;
  while (first < waypoints.size() && within_radius(map, s, waypoints[first], ps.goal_radius)) {
    ++first;
  }
  PolicyDecision d;
  d.target = g;
  if (first < waypoints.size()) {
    const State w1 = waypoints[first];
    d.has_plan = true;
    d.dist_to_waypoint = ens.aggregate_distance(map, s, w1);
    d.dist_to_goal = ens.aggregate_distance(map, s, g);
    if (d.dist_to_waypoint < d.dist_to_goal || d.dist_to_goal > ps.maxdist) {
      d.target = w1;
      d.conditioned_on_goal = false;
    }
  }
  d.action = ens.greedy_action(map, s, d.target);
  return d;
}

PolicyDecision search_policy_decide(const PolicyState& ps, State s, State g) {
  auto plan = shortest_path(*ps.roadmap, *ps.ensemble, s, g);
  if (!plan) return decide_with_waypoints(ps, s, g, {});
  return decide_with_waypoints(ps, s, g, plan->waypoints);
}

Action search_policy_action(const PolicyState& ps, State s, State g) {
  return search_policy_decide(ps, s, g).action;
}

namespace {

template <class Decide>
RolloutResult run(const GridMap& map, const EpisodeConfig& cfg, State s0, State g, int horizon,
                  Rng& rng, Decide&& decide) {
  if (horizon < 1) throw std::invalid_argument("rollout horizon must be >= 1");
  RolloutResult r;
  State s = s0;
  if (within_radius(map, s, g, cfg.goal_radius)) {
    r.success = true;
    r.trace.push_back({0, s, g, true});
    return r;
  }
  for (int t = 0; t < horizon; ++t) {
    PolicyDecision d = decide(s);
    r.trace.push_back({t, s, d.target, d.conditioned_on_goal});
    Transition tr = step(map, s, d.action, g, cfg, rng);
    s = tr.next_state;
    r.steps = t + 1;
    if (tr.done) {
      r.success = true;
      break;
    }
  }
  r.trace.push_back({r.steps, s, g, true});
  return r;
}

}  // namespace

RolloutResult rollout(const PolicyState& ps, const EpisodeConfig& cfg, State s0, State g,
                      int horizon, Rng& rng) {
  const GridMap& map = ps.roadmap->map();
  if (ps.replan_every_step) {
    return run(map, cfg, s0, g, horizon, rng,
               [&](State s) { return search_policy_decide(ps, s, g); });
  }
  // Sticky mode: follow one plan, advancing past reached waypoints; replan
  // once it is used up.
  std::deque<State> pending;
  auto drop_reached = [&](State s) {
    while (!pending.empty() && within_radius(map, s, pending.front(), ps.goal_radius)) {
      pending.pop_front();
    }
  };
  return run(map, cfg, s0, g, horizon, rng, [&](State s) {
    drop_reached(s);
    if (pending.empty()) {
      if (auto plan = shortest_path(*ps.roadmap, *ps.ensemble, s, g)) {
        pending.assign(plan->waypoints.begin(), plan->waypoints.end());
        // A fresh plan may start at the current cell.
        drop_reached(s);
      }
    }
    std::vector<State> w(pending.begin(), pending.end());
    return decide_with_waypoints(ps, s, g, w);
  });
}

RolloutResult greedy_rollout(const ValueEnsemble& ens, const GridMap& map, const EpisodeConfig& cfg,
                             State s0, State g, int horizon, Rng& rng) {
  return run(map, cfg, s0, g, horizon, rng, [&](State s) {
    PolicyDecision d;
    d.target = g;
    d.action = ens.greedy_action(map, s, g);
    return d;
  });
}

RolloutResult random_rollout(const GridMap& map, const EpisodeConfig& cfg, State s0, State g,
                             int horizon, Rng& rng) {
  std::uniform_int_distribution<int> pick(0, kNumActions - 1);
  return run(map, cfg, s0, g, horizon, rng, [&](State) {
    PolicyDecision d;
    d.target = g;
    d.action = action_from_index(pick(rng));
    return d;
  });
}

void write_trace_csv(std::ostream& out, const std::vector<TraceStep>& trace) {
  out << "t,x,y,waypoint_x,waypoint_y,conditioned_on_goal\n";
  for (const auto& t : trace) {
    out << t.t << ',' << t.state.x << ',' << t.state.y << ',' << t.waypoint.x << ','
        << t.waypoint.y << ',' << (t.conditioned_on_goal ? 1 : 0) << '\n';
  }
}

}  // namespace sorb
