#include <doctest.h>

#include <array>
#include <set>

#include "sorb/distribution.hpp"
#include "sorb/replay_buffer.hpp"

using namespace sorb;

namespace {

std::vector<Transition> walk(const GridMap& map, int length, std::uint64_t seed) {
  EpisodeConfig cfg;
  cfg.slip_prob = 0.0;
  Rng rng(seed);
  Episode ep = reset(map, cfg, rng);
  std::vector<Transition> traj;
  State s = ep.start;
  std::uniform_int_distribution<int> pick(0, 3);
  for (int t = 0; t < length; ++t) {
    Transition tr = step(map, s, action_from_index(pick(rng)), ep.goal, cfg, rng);
    tr.done = false;
    traj.push_back(tr);
    s = tr.next_state;
  }
  traj.back().timeout = true;
  return traj;
}

}  // namespace

TEST_SUITE("distval.replay") {
  TEST_CASE("ring buffer overwrites the oldest entry") {
    ReplayBuffer buf(3);
    for (int i = 0; i < 5; ++i) {
      Transition t;
      t.state = {i, 0};
      buf.add(t);
    }
    CHECK(buf.size() == 3);
    std::set<int> xs;
    for (std::size_t i = 0; i < buf.size(); ++i) xs.insert(buf[i].state.x);
    CHECK(xs == std::set<int>{2, 3, 4});
  }

  TEST_CASE("sampling is uniform over stored transitions") {
    ReplayBuffer buf(10);
    for (int i = 0; i < 10; ++i) {
      Transition t;
      t.state = {i, 0};
      buf.add(t);
    }
    Rng rng(1);
    std::array<int, 10> counts{};
    const int n = 100000;
    for (const auto& t : buf.sample(n, rng)) ++counts[t.state.x];
    for (int c : counts) CHECK(c / double(n) == doctest::Approx(0.1).epsilon(0.05));
  }

  TEST_CASE("distinct states keep first-seen order") {
    ReplayBuffer buf(10);
    Transition a;
    a.state = {1, 1};
    a.next_state = {2, 1};
    Transition b;
    b.state = {2, 1};
    b.next_state = {1, 1};
    buf.add(a);
    buf.add(b);
    CHECK(buf.distinct_states() == std::vector<State>{{1, 1}, {2, 1}});
  }

  TEST_CASE("relabel category frequencies are one third each") {
    GridMap m = builtin_map("four_rooms");
    Rng rng(2);
    std::array<int, 3> counts{};
    int total = 0;
    for (int ep = 0; total < 30000; ++ep) {
      auto traj = walk(m, 100, 100 + ep);
      for (const auto& t : relabel(traj, m, 0, rng)) {
        ++counts[static_cast<int>(t.goal_source)];
        ++total;
      }
    }
    for (int c : counts) CHECK(std::abs(c / double(total) - 1.0 / 3.0) <= 0.02);
  }

  TEST_CASE("relabel semantics") {
    GridMap m = builtin_map("four_rooms");
    auto traj = walk(m, 40, 3);
    Rng rng(4);
    for (int rep = 0; rep < 50; ++rep) {
      auto out = relabel(traj, m, 0, rng);
      REQUIRE(out.size() == traj.size());
      for (std::size_t t = 0; t < out.size(); ++t) {
        const auto& r = out[t];
        CHECK(r.state == traj[t].state);
        CHECK(r.next_state == traj[t].next_state);
        CHECK(r.action == traj[t].action);
        CHECK(r.reward == -1.0);
        CHECK(r.done == (r.next_state == r.goal));
        CHECK_FALSE((r.done && r.timeout));
        switch (r.goal_source) {
          case GoalSource::Original: CHECK(r.goal == traj[t].goal); break;
          case GoalSource::Current:
            CHECK(r.goal == r.state);
            CHECK(within_radius(m, r.state, r.goal, 0));
            CHECK(distributional_target(ValueDistribution::uniform(4), true) ==
                  ValueDistribution::point_mass(4, 0));
            break;
          case GoalSource::Future: {
            CHECK(t + 1 < out.size());
            bool found = false;
            for (std::size_t u = t + 1; u < traj.size(); ++u) found |= traj[u].state == r.goal;
            CHECK(found);
            break;
          }
        }
      }
      CHECK(out.back().goal_source != GoalSource::Future);
    }
  }

  TEST_CASE("future relabel one step ahead marks the transition done") {
    GridMap m = builtin_map("four_rooms");
    auto traj = walk(m, 2, 5);
    Rng rng(6);
    // With only future relabels allowed, the first transition's goal is the
    // state at t + 1, which is its own next state.
    auto out = relabel(traj, m, 0, rng, {0.0, 0.0, 1.0});
    CHECK(out[0].goal == traj[1].state);
    CHECK(out[0].done == within_radius(m, out[0].next_state, traj[1].state, 0));
    CHECK(out[0].done);
  }

  TEST_CASE("relabel rejects empty trajectories") {
    GridMap m = builtin_map("four_rooms");
    Rng rng(7);
    CHECK_THROWS(relabel({}, m, 0, rng));
  }
}
