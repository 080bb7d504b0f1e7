#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sorb {

using Rng = std::mt19937_64;

struct State {
  int x = 0;
  int y = 0;

  friend bool operator==(const State&, const State&) = default;
  friend auto operator<=>(const State&, const State&) = default;
};

enum class Action : std::uint8_t { North = 0, South = 1, East = 2, West = 3 };

inline constexpr int kNumActions = 4;
inline constexpr std::array<Action, kNumActions> kAllActions = {
    Action::North, Action::South, Action::East, Action::West};

constexpr int action_index(Action a) { return static_cast<int>(a); }
Action action_from_index(int index);
const char* action_name(Action a);

// Grid coordinates grow rightwards (x) and downwards (y); North is y - 1.
State moved(State s, Action a);

class MapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Immutable occupancy grid. Cells outside the grid count as walls.
class GridMap {
 public:
  GridMap(std::string name, int width, int height, std::vector<bool> walls);

  // Parses the text format: "width height" followed by `height` rows of
  // '#' (wall) and '.' (free).
  static GridMap parse(const std::string& text, std::string name);
  static GridMap load(const std::string& path);
  std::string to_text() const;

  const std::string& name() const { return name_; }
  int width() const { return width_; }
  int height() const { return height_; }

  bool in_bounds(State s) const {
    return s.x >= 0 && s.y >= 0 && s.x < width_ && s.y < height_;
  }
  bool is_wall(State s) const { return !in_bounds(s) || walls_[cell(s)]; }
  bool is_free(State s) const { return !is_wall(s); }

  int cell(State s) const { return s.y * width_ + s.x; }

  // Dense index over free cells, row-major; -1 for walls.
  int free_index(State s) const { return in_bounds(s) ? free_index_[cell(s)] : -1; }
  State free_state(int index) const { return free_cells_[index]; }
  int num_free() const { return static_cast<int>(free_cells_.size()); }
  std::span<const State> free_cells() const { return free_cells_; }

  const std::vector<bool>& occupancy() const { return walls_; }

 private:
  std::string name_;
  int width_;
  int height_;
  std::vector<bool> walls_;
  std::vector<int> free_index_;
  std::vector<State> free_cells_;
};

// Built-in layouts: "u_maze", "four_rooms", "large_four_rooms", and
// "random_maze" (seeded, odd size >= 5).
GridMap builtin_map(const std::string& name);
GridMap random_maze(std::uint64_t seed, int size);

struct EpisodeConfig {
  int max_steps = 100;
  double slip_prob = 0.1;
  int goal_radius = 0;
  double nearby_goal_prob = 0.8;
  int nearby_goal_steps = 4;

  void validate() const;
};

enum class GoalSource : std::uint8_t { Original = 0, Current = 1, Future = 2 };

struct Transition {
  State state;
  Action action = Action::North;
  State next_state;
  State goal;
  double reward = -1.0;
  bool done = false;
  bool timeout = false;
  GoalSource goal_source = GoalSource::Original;
  std::uint16_t map_id = 0;
};

struct Episode {
  State start;
  State goal;
};

// True when `b` lies within `radius` BFS steps of `a` (radius 0 is identity).
bool within_radius(const GridMap& map, State a, State b, int radius);

Episode reset(const GridMap& map, const EpisodeConfig& cfg, Rng& rng);

// One environment step. `timeout` is always false here; the caller owns the
// step counter.
Transition step(const GridMap& map, State state, Action action, State goal,
                const EpisodeConfig& cfg, Rng& rng);

// Free cells reachable from `s` in at most `max_steps` moves, excluding `s`.
std::vector<State> cells_within(const GridMap& map, State s, int max_steps);

inline constexpr int kUnreachable = -1;

// Exact shortest-path length in moves, or kUnreachable.
int oracle_distance(const GridMap& map, State s, State g);

// All-pairs BFS table over free cells; entries are kUnreachable for
// separated components.
class DistanceOracle {
 public:
  explicit DistanceOracle(const GridMap& map);

  int distance(State s, State g) const;
  int max_distance() const { return max_distance_; }
  const GridMap& map() const { return *map_; }

 private:
  const GridMap* map_;
  int n_;
  std::vector<std::int16_t> table_;
  int max_distance_ = 0;
};

// States visited by uniform-random rollouts of length cfg.max_steps, each
// starting from a fresh reset. Duplicates are kept.
std::vector<State> random_walk_states(const GridMap& map, const EpisodeConfig& cfg,
                                      std::size_t n, Rng& rng);

}  // namespace sorb
