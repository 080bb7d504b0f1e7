#pragma once

#include <optional>
#include <ostream>
#include <vector>

#include "sorb/ensemble.hpp"
#include "sorb/roadmap.hpp"

namespace sorb {

// Inputs of the waypoint controller. Both pointers must outlive the policy.
struct PolicyState {
  const Roadmap* roadmap = nullptr;
  const ValueEnsemble* ensemble = nullptr;
  double maxdist = 3.0;
  bool replan_every_step = true;
  // Waypoints within this radius of the agent count as reached.
  int goal_radius = 0;

  PolicyState(const Roadmap& rm, const ValueEnsemble& ens, bool replan = true, int radius = 0)
      : roadmap(&rm), ensemble(&ens), maxdist(rm.maxdist()), replan_every_step(replan),
        goal_radius(radius) {}
};

struct PolicyDecision {
  Action action = Action::North;
  // State the greedy policy was conditioned on (the goal or the first waypoint).
  State target;
  bool conditioned_on_goal = true;
  bool has_plan = false;
  double dist_to_waypoint = kInfinity;
  double dist_to_goal = kInfinity;
};

// Plans from s, drops leading waypoints already reached, then conditions on
// the first waypoint w1 when d(s, w1) < d(s, g) or d(s, g) > maxdist, on g
// otherwise. Without a usable plan it acts greedily toward g.
PolicyDecision search_policy_decide(const PolicyState& ps, State s, State g);

// As above, with an explicit waypoint list instead of a fresh plan.
PolicyDecision decide_with_waypoints(const PolicyState& ps, State s, State g,
                                     std::span<const State> waypoints);

Action search_policy_action(const PolicyState& ps, State s, State g);

struct TraceStep {
  int t = 0;
  State state;
  State waypoint;
  bool conditioned_on_goal = true;
};

struct RolloutResult {
  bool success = false;
  int steps = 0;
  std::vector<TraceStep> trace;
};

// Runs the search policy until the goal is reached or `horizon` steps pass.
RolloutResult rollout(const PolicyState& ps, const EpisodeConfig& cfg, State s0, State g,
                      int horizon, Rng& rng);

// Greedy w.r.t. the ensemble toward g, no planning.
RolloutResult greedy_rollout(const ValueEnsemble& ens, const GridMap& map, const EpisodeConfig& cfg,
                             State s0, State g, int horizon, Rng& rng);

// Uniform random actions.
RolloutResult random_rollout(const GridMap& map, const EpisodeConfig& cfg, State s0, State g,
                             int horizon, Rng& rng);

// CSV "t,x,y,waypoint_x,waypoint_y,conditioned_on_goal".
void write_trace_csv(std::ostream& out, const std::vector<TraceStep>& trace);

}  // namespace sorb
