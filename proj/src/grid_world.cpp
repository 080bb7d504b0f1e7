#include "sorb/grid_world.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <limits>
#include <sstream>

namespace sorb {

Action action_from_index(int index) {
  if (index < 0 || index >= kNumActions) {
    throw std::out_of_range("action index " + std::to_string(index));
  }
  return static_cast<Action>(index);
}

const char* action_name(Action a) {
  switch (a) {
    case Action::North: return "north";
    case Action::South: return "south";
    case Action::East: return "east";
    case Action::West: return "west";
  }
  return "?";
}

State moved(State s, Action a) {
  switch (a) {
    case Action::North: return {s.x, s.y - 1};
    case Action::South: return {s.x, s.y + 1};
    case Action::East: return {s.x + 1, s.y};
    case Action::West: return {s.x - 1, s.y};
  }
  return s;
}

GridMap::GridMap(std::string name, int width, int height, std::vector<bool> walls)
    : name_(std::move(name)), width_(width), height_(height), walls_(std::move(walls)) {
  if (width_ < 3 || height_ < 3) throw MapError("map must be at least 3x3");
  if (walls_.size() != static_cast<std::size_t>(width_) * height_) {
    throw MapError("occupancy size does not match dimensions");
  }
  for (int x = 0; x < width_; ++x) {
    if (!walls_[cell({x, 0})] || !walls_[cell({x, height_ - 1})]) {
      throw MapError("border cells must be walls");
    }
  }
  for (int y = 0; y < height_; ++y) {
    if (!walls_[cell({0, y})] || !walls_[cell({width_ - 1, y})]) {
      throw MapError("border cells must be walls");
    }
  }
  free_index_.assign(walls_.size(), -1);
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      if (!walls_[cell({x, y})]) {
        free_index_[cell({x, y})] = static_cast<int>(free_cells_.size());
        free_cells_.push_back({x, y});
      }
    }
  }
  if (free_cells_.size() < 2) throw MapError("map needs at least two free cells");
}

GridMap GridMap::parse(const std::string& text, std::string name) {
  std::istringstream in(text);
  int width = 0;
  int height = 0;
  if (!(in >> width >> height) || width <= 0 || height <= 0) {
    throw MapError("map header must be 'width height'");
  }
  std::string line;
  std::getline(in, line);
  std::vector<bool> walls;
  walls.reserve(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    if (!std::getline(in, line)) throw MapError("map has fewer rows than declared");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (static_cast<int>(line.size()) != width) {
      throw MapError("map row " + std::to_string(y) + " has wrong width");
    }
    for (char c : line) {
      if (c == '#') {
        walls.push_back(true);
      } else if (c == '.') {
        walls.push_back(false);
      } else {
        throw MapError(std::string("unexpected map character '") + c + "'");
      }
    }
  }
  return GridMap(std::move(name), width, height, std::move(walls));
}

GridMap GridMap::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MapError("cannot open map file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  auto name = path.substr(path.find_last_of('/') + 1);
  if (auto dot = name.find('.'); dot != std::string::npos) name.resize(dot);
  return parse(buf.str(), name);
}

std::string GridMap::to_text() const {
  std::string out = std::to_string(width_) + " " + std::to_string(height_) + "\n";
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) out += walls_[cell({x, y})] ? '#' : '.';
    out += '\n';
  }
  return out;
}

namespace {

std::vector<bool> bordered(int width, int height) {
  std::vector<bool> walls(static_cast<std::size_t>(width) * height, false);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (x == 0 || y == 0 || x == width - 1 || y == height - 1) {
        walls[static_cast<std::size_t>(y) * width + x] = true;
      }
    }
  }
  return walls;
}

void set_wall(std::vector<bool>& walls, int width, int x, int y, bool wall) {
  walls[static_cast<std::size_t>(y) * width + x] = wall;
}

// 15x15: two 3-wide arms joined along the bottom. The arm tips are 10 cells
// apart in a straight line but ~30 moves apart.
GridMap make_u_maze() {
  constexpr int n = 15;
  auto walls = bordered(n, n);
  for (int y = 1; y <= 9; ++y) {
    for (int x = 4; x <= 10; ++x) set_wall(walls, n, x, y, true);
  }
  return GridMap("u_maze", n, n, std::move(walls));
}

// 21x21: four 9x9 rooms, one-cell doorways in the middle of each wall.
GridMap make_four_rooms() {
  constexpr int n = 21;
  constexpr int mid = n / 2;
  auto walls = bordered(n, n);
  for (int i = 0; i < n; ++i) {
    set_wall(walls, n, mid, i, true);
    set_wall(walls, n, i, mid, true);
  }
  set_wall(walls, n, mid, 5, false);
  set_wall(walls, n, mid, 15, false);
  set_wall(walls, n, 5, mid, false);
  set_wall(walls, n, 15, mid, false);
  return GridMap("four_rooms", n, n, std::move(walls));
}

// 41x41: four 19x19 rooms chained top-left -> top-right -> bottom-right ->
// bottom-left. The top-left/bottom-left wall is closed, so crossing it takes
// a detour through the other three rooms (shortest paths exceed 100 moves).
// Doorways are three cells wide and sit at the outer ends of each wall.
GridMap make_large_four_rooms() {
  constexpr int n = 41;
  constexpr int mid = n / 2;
  auto walls = bordered(n, n);
  for (int i = 0; i < n; ++i) {
    set_wall(walls, n, mid, i, true);
    set_wall(walls, n, i, mid, true);
  }
  for (int k = 1; k <= 3; ++k) {
    set_wall(walls, n, mid, k, false);           // top-left <-> top-right
    set_wall(walls, n, n - 1 - k, mid, false);   // top-right <-> bottom-right
    set_wall(walls, n, mid, n - 1 - k, false);   // bottom-right <-> bottom-left
  }
  return GridMap("large_four_rooms", n, n, std::move(walls));
}

}  // namespace

GridMap random_maze(std::uint64_t seed, int size) {
  if (size < 5 || size % 2 == 0) throw MapError("random_maze size must be odd and >= 5");
  std::vector<bool> walls(static_cast<std::size_t>(size) * size, true);
  Rng rng(seed);
  const int cells = (size - 1) / 2;
  auto carve = [&](int cx, int cy) { set_wall(walls, size, 2 * cx + 1, 2 * cy + 1, false); };

  // Recursive backtracker over the cell lattice.
  std::vector<bool> seen(static_cast<std::size_t>(cells) * cells, false);
  std::vector<std::pair<int, int>> stack;
  std::uniform_int_distribution<int> pick_cell(0, cells - 1);
  stack.emplace_back(pick_cell(rng), pick_cell(rng));
  seen[stack.back().second * cells + stack.back().first] = true;
  carve(stack.back().first, stack.back().second);
  constexpr std::array<std::pair<int, int>, 4> dirs = {{{0, -1}, {0, 1}, {1, 0}, {-1, 0}}};
  while (!stack.empty()) {
    auto [cx, cy] = stack.back();
    std::array<int, 4> options{};
    int count = 0;
    for (int d = 0; d < 4; ++d) {
      int nx = cx + dirs[d].first;
      int ny = cy + dirs[d].second;
      if (nx >= 0 && ny >= 0 && nx < cells && ny < cells && !seen[ny * cells + nx]) {
        options[count++] = d;
      }
    }
    if (count == 0) {
      stack.pop_back();
      continue;
    }
    int d = options[std::uniform_int_distribution<int>(0, count - 1)(rng)];
    int nx = cx + dirs[d].first;
    int ny = cy + dirs[d].second;
    set_wall(walls, size, 2 * cx + 1 + dirs[d].first, 2 * cy + 1 + dirs[d].second, false);
    carve(nx, ny);
    seen[ny * cells + nx] = true;
    stack.emplace_back(nx, ny);
  }

  // Open a tenth of the remaining interior walls between cells so the maze
  // has loops.
  std::bernoulli_distribution open(0.1);
  for (int y = 1; y < size - 1; ++y) {
    for (int x = 1; x < size - 1; ++x) {
      bool between_h = (x % 2 == 0) && (y % 2 == 1);
      bool between_v = (x % 2 == 1) && (y % 2 == 0);
      if ((between_h || between_v) && walls[static_cast<std::size_t>(y) * size + x] && open(rng)) {
        set_wall(walls, size, x, y, false);
      }
    }
  }
  return GridMap("random_maze_" + std::to_string(seed) + "_" + std::to_string(size), size, size,
                 std::move(walls));
}

GridMap builtin_map(const std::string& name) {
  if (name == "u_maze") return make_u_maze();
  if (name == "four_rooms") return make_four_rooms();
  if (name == "large_four_rooms") return make_large_four_rooms();
  // random_maze_<seed>_<size>
  if (name.rfind("random_maze_", 0) == 0) {
    std::uint64_t seed = 0;
    int size = 0;
    char sep = 0;
    std::istringstream in(name.substr(12));
    if (in >> seed >> sep >> size && sep == '_') return random_maze(seed, size);
  }
  throw MapError("unknown map '" + name + "'");
}

void EpisodeConfig::validate() const {
  if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  if (slip_prob < 0.0 || slip_prob > 1.0) throw std::invalid_argument("slip_prob outside [0,1]");
  if (nearby_goal_prob < 0.0 || nearby_goal_prob > 1.0) {
    throw std::invalid_argument("nearby_goal_prob outside [0,1]");
  }
  if (goal_radius < 0) throw std::invalid_argument("goal_radius must be >= 0");
  if (nearby_goal_steps < 1) throw std::invalid_argument("nearby_goal_steps must be >= 1");
}

std::vector<State> cells_within(const GridMap& map, State s, int max_steps) {
  std::vector<State> out;
  std::vector<int> dist(static_cast<std::size_t>(map.width()) * map.height(), -1);
  std::deque<State> queue{s};
  dist[map.cell(s)] = 0;
  while (!queue.empty()) {
    State u = queue.front();
    queue.pop_front();
    int du = dist[map.cell(u)];
    if (du >= max_steps) continue;
    for (Action a : kAllActions) {
      State v = moved(u, a);
      if (map.is_wall(v) || dist[map.cell(v)] >= 0) continue;
      dist[map.cell(v)] = du + 1;
      out.push_back(v);
      queue.push_back(v);
    }
  }
  return out;
}

bool within_radius(const GridMap& map, State a, State b, int radius) {
  if (a == b) return true;
  if (radius <= 0) return false;
  if (std::abs(a.x - b.x) + std::abs(a.y - b.y) > radius) return false;
  auto near = cells_within(map, a, radius);
  return std::find(near.begin(), near.end(), b) != near.end();
}

Episode reset(const GridMap& map, const EpisodeConfig& cfg, Rng& rng) {
  const int n = map.num_free();
  std::uniform_int_distribution<int> pick(0, n - 1);
  State start = map.free_state(pick(rng));
  std::bernoulli_distribution nearby(cfg.nearby_goal_prob);
  if (nearby(rng)) {
    auto candidates = cells_within(map, start, cfg.nearby_goal_steps);
    if (!candidates.empty()) {
      std::uniform_int_distribution<std::size_t> pick_near(0, candidates.size() - 1);
      return {start, candidates[pick_near(rng)]};
    }
  }
  // Uniform over free cells other than the start.
  std::uniform_int_distribution<int> pick_other(0, n - 2);
  int g = pick_other(rng);
  if (g >= map.free_index(start)) ++g;
  return {start, map.free_state(g)};
}

Transition step(const GridMap& map, State state, Action action, State goal,
                const EpisodeConfig& cfg, Rng& rng) {
  Action executed = action;
  if (cfg.slip_prob > 0.0 && std::bernoulli_distribution(cfg.slip_prob)(rng)) {
    executed = action_from_index(std::uniform_int_distribution<int>(0, kNumActions - 1)(rng));
  }
  State next = moved(state, executed);
  if (map.is_wall(next)) next = state;
  Transition t;
  t.state = state;
  t.action = action;
  t.next_state = next;
  t.goal = goal;
  t.reward = -1.0;
  t.done = within_radius(map, next, goal, cfg.goal_radius);
  t.timeout = false;
  return t;
}

int oracle_distance(const GridMap& map, State s, State g) {
  if (!map.is_free(s) || !map.is_free(g)) throw MapError("oracle_distance on a wall cell");
  if (s == g) return 0;
  std::vector<int> dist(static_cast<std::size_t>(map.width()) * map.height(), -1);
  std::deque<State> queue{s};
  dist[map.cell(s)] = 0;
  while (!queue.empty()) {
    State u = queue.front();
    queue.pop_front();
    for (Action a : kAllActions) {
      State v = moved(u, a);
      if (map.is_wall(v) || dist[map.cell(v)] >= 0) continue;
      dist[map.cell(v)] = dist[map.cell(u)] + 1;
      if (v == g) return dist[map.cell(v)];
      queue.push_back(v);
    }
  }
  return kUnreachable;
}

DistanceOracle::DistanceOracle(const GridMap& map) : map_(&map), n_(map.num_free()) {
  table_.assign(static_cast<std::size_t>(n_) * n_, static_cast<std::int16_t>(kUnreachable));
  std::vector<int> queue(n_);
  for (int src = 0; src < n_; ++src) {
    std::int16_t* row = table_.data() + static_cast<std::size_t>(src) * n_;
    row[src] = 0;
    int head = 0;
    int tail = 0;
    queue[tail++] = src;
    while (head < tail) {
      int u = queue[head++];
      State su = map.free_state(u);
      for (Action a : kAllActions) {
        int v = map.free_index(moved(su, a));
        if (v < 0 || row[v] >= 0) continue;
        row[v] = static_cast<std::int16_t>(row[u] + 1);
        max_distance_ = std::max<int>(max_distance_, row[v]);
        queue[tail++] = v;
      }
    }
  }
}

int DistanceOracle::distance(State s, State g) const {
  int a = map_->free_index(s);
  int b = map_->free_index(g);
  if (a < 0 || b < 0) throw MapError("oracle query on a wall cell");
  return table_[static_cast<std::size_t>(a) * n_ + b];
}

std::vector<State> random_walk_states(const GridMap& map, const EpisodeConfig& cfg,
                                      std::size_t n, Rng& rng) {
  std::vector<State> out;
  out.reserve(n);
  std::uniform_int_distribution<int> pick_action(0, kNumActions - 1);
  while (out.size() < n) {
    Episode ep = reset(map, cfg, rng);
    State s = ep.start;
    out.push_back(s);
    for (int t = 0; t < cfg.max_steps && out.size() < n; ++t) {
      Transition tr = step(map, s, action_from_index(pick_action(rng)), ep.goal, cfg, rng);
      s = tr.next_state;
      out.push_back(s);
    }
  }
  return out;
}

}  // namespace sorb
