#include "sorb/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "sorb/checkpoint.hpp"
#include "sorb/parallel.hpp"

namespace sorb {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Stream tags mixed into derived seeds.
constexpr std::uint64_t kTrainStream = 0x747261696e;
constexpr std::uint64_t kProbeStream = 0x70726f6265;
constexpr std::uint64_t kPairStream = 0x7061697273;
constexpr std::uint64_t kRolloutStream = 0x726f6c6c;
constexpr std::uint64_t kBufferStream = 0x62756666;
constexpr std::uint64_t kWalkStream = 0x77616c6b;
constexpr std::uint64_t kDistcheckStream = 0x64697374;

Rng derived_rng(std::initializer_list<std::uint64_t> parts) {
  std::vector<std::uint32_t> words;
  for (auto p : parts) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::nan("");
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("not a number: '" + s + "'");
  }
  return v;
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& item : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(),
                     [&](const char* k) { return item.key() == k; })) {
      throw ConfigError("unknown key '" + item.key() + "' in " + where);
    }
  }
}

template <class T>
void read_key(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

MazeSet maze_set_from_json(const json& j, const std::string& where) {
  check_keys(j, {"seeds", "size"}, where);
  MazeSet m;
  read_key(j, "seeds", m.seeds);
  read_key(j, "size", m.size);
  return m;
}

json maze_set_to_json(const MazeSet& m) { return {{"seeds", m.seeds}, {"size", m.size}}; }

}  // namespace

void RunConfig::validate() const {
  try {
    episode.validate();
    train.validate();
    ensemble.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (seeds.empty()) throw ConfigError("seeds must be nonempty");
  if (!(maxdist > 0.0)) throw ConfigError("maxdist must be positive");
  if (eval.trials < 1) throw ConfigError("eval.trials must be >= 1");
  if (eval.tolerance < 0) throw ConfigError("eval.tolerance must be >= 0");
  if (eval.horizon < 0) throw ConfigError("eval.horizon must be >= 0");
  if (log_every < 1) throw ConfigError("log_every must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (probe_trials < 0) throw ConfigError("probe_trials must be >= 0");
  if (multi_map()) {
    if (train.estimator.backend != Backend::Mlp) {
      throw ConfigError("multi-map training needs the mlp backend");
    }
    if (train_mazes.seeds.size() > 65535) throw ConfigError("too many training mazes");
  }
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  try {
    check_keys(j,
               {"map", "map_path", "train_mazes", "heldout_mazes", "episode", "train", "ensemble",
                "maxdist", "search_buffer_size", "replan_every_step", "eval", "sweep", "seeds",
                "out_dir", "checkpoint_every", "log_every", "probe_trials", "distcheck_pairs",
                "generalize_buffer_size"},
               "config");
    read_key(j, "map", c.map);
    read_key(j, "map_path", c.map_path);
    if (j.contains("train_mazes")) c.train_mazes = maze_set_from_json(j["train_mazes"], "train_mazes");
    if (j.contains("heldout_mazes")) {
      c.heldout_mazes = maze_set_from_json(j["heldout_mazes"], "heldout_mazes");
    }
    if (j.contains("episode")) {
      const json& e = j["episode"];
      check_keys(e, {"max_steps", "slip_prob", "goal_radius", "nearby_goal_prob", "nearby_goal_steps"},
                 "episode");
      read_key(e, "max_steps", c.episode.max_steps);
      read_key(e, "slip_prob", c.episode.slip_prob);
      read_key(e, "goal_radius", c.episode.goal_radius);
      read_key(e, "nearby_goal_prob", c.episode.nearby_goal_prob);
      read_key(e, "nearby_goal_steps", c.episode.nearby_goal_steps);
    }
    if (j.contains("train")) {
      const json& t = j["train"];
      check_keys(t,
                 {"estimator", "batch_size", "epsilon", "discount", "relabel_probs",
                  "total_env_steps", "random_warmup_steps", "replay_capacity"},
                 "train");
      read_key(t, "batch_size", c.train.batch_size);
      read_key(t, "epsilon", c.train.epsilon);
      read_key(t, "discount", c.train.discount);
      read_key(t, "relabel_probs", c.train.relabel_probs);
      read_key(t, "total_env_steps", c.train.total_env_steps);
      read_key(t, "random_warmup_steps", c.train.random_warmup_steps);
      read_key(t, "replay_capacity", c.train.replay_capacity);
      if (t.contains("estimator")) {
        const json& e = t["estimator"];
        check_keys(e,
                   {"backend", "head", "encoder", "num_bins", "hidden", "learning_rate",
                    "target_update_period", "target_update_rate"},
                   "train.estimator");
        auto& est = c.train.estimator;
        if (e.contains("backend")) {
          est.backend = parse_backend(e["backend"].get<std::string>());
          // The tabular learner keys on cells; the MLP default input is
          // coordinates.
          if (est.backend == Backend::Mlp) {
            est.encoder = Encoder::Coords;
            est.learning_rate = 1e-4;
          }
        }
        if (e.contains("head")) est.head = parse_head(e["head"].get<std::string>());
        if (e.contains("encoder")) est.encoder = parse_encoder(e["encoder"].get<std::string>());
        read_key(e, "num_bins", est.num_bins);
        read_key(e, "hidden", est.hidden);
        read_key(e, "learning_rate", est.learning_rate);
        read_key(e, "target_update_period", est.target_update_period);
        read_key(e, "target_update_rate", est.target_update_rate);
      }
    }
    if (j.contains("ensemble")) {
      const json& e = j["ensemble"];
      check_keys(e, {"size", "aggregation"}, "ensemble");
      read_key(e, "size", c.ensemble.size);
      if (e.contains("aggregation")) {
        c.ensemble.aggregation = parse_aggregation(e["aggregation"].get<std::string>());
      }
    }
    read_key(j, "maxdist", c.maxdist);
    read_key(j, "search_buffer_size", c.search_buffer_size);
    read_key(j, "replan_every_step", c.replan_every_step);
    if (j.contains("eval")) {
      const json& e = j["eval"];
      check_keys(e, {"distances", "tolerance", "trials", "horizon", "include_random", "max_rejections"},
                 "eval");
      read_key(e, "distances", c.eval.distances);
      read_key(e, "tolerance", c.eval.tolerance);
      read_key(e, "trials", c.eval.trials);
      read_key(e, "horizon", c.eval.horizon);
      read_key(e, "include_random", c.eval.include_random);
      read_key(e, "max_rejections", c.eval.max_rejections);
    }
    if (j.contains("sweep")) {
      const json& s = j["sweep"];
      check_keys(s, {"axis", "values"}, "sweep");
      read_key(s, "axis", c.sweep.axis);
      if (s.contains("values")) {
        for (const auto& v : s["values"]) {
          c.sweep.values.push_back(v.is_string() ? v.get<std::string>() : v.dump());
        }
      }
    }
    read_key(j, "seeds", c.seeds);
    read_key(j, "out_dir", c.out_dir);
    read_key(j, "checkpoint_every", c.checkpoint_every);
    read_key(j, "log_every", c.log_every);
    read_key(j, "probe_trials", c.probe_trials);
    read_key(j, "distcheck_pairs", c.distcheck_pairs);
    read_key(j, "generalize_buffer_size", c.generalize_buffer_size);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

json config_to_json(const RunConfig& c) {
  const auto& est = c.train.estimator;
  json sweep_values = json::array();
  for (const auto& v : c.sweep.values) sweep_values.push_back(v);
  return {
      {"map", c.map},
      {"map_path", c.map_path},
      {"train_mazes", maze_set_to_json(c.train_mazes)},
      {"heldout_mazes", maze_set_to_json(c.heldout_mazes)},
      {"episode",
       {{"max_steps", c.episode.max_steps},
        {"slip_prob", c.episode.slip_prob},
        {"goal_radius", c.episode.goal_radius},
        {"nearby_goal_prob", c.episode.nearby_goal_prob},
        {"nearby_goal_steps", c.episode.nearby_goal_steps}}},
      {"train",
       {{"estimator",
         {{"backend", backend_name(est.backend)},
          {"head", head_name(est.head)},
          {"encoder", encoder_name(est.encoder)},
          {"num_bins", est.num_bins},
          {"hidden", est.hidden},
          {"learning_rate", est.learning_rate},
          {"target_update_period", est.target_update_period},
          {"target_update_rate", est.target_update_rate}}},
        {"batch_size", c.train.batch_size},
        {"epsilon", c.train.epsilon},
        {"discount", c.train.discount},
        {"relabel_probs", c.train.relabel_probs},
        {"total_env_steps", c.train.total_env_steps},
        {"random_warmup_steps", c.train.random_warmup_steps},
        {"replay_capacity", c.train.replay_capacity}}},
      {"ensemble", {{"size", c.ensemble.size}, {"aggregation", aggregation_name(c.ensemble.aggregation)}}},
      {"maxdist", c.maxdist},
      {"search_buffer_size", c.search_buffer_size},
      {"replan_every_step", c.replan_every_step},
      {"eval",
       {{"distances", c.eval.distances},
        {"tolerance", c.eval.tolerance},
        {"trials", c.eval.trials},
        {"horizon", c.eval.horizon},
        {"include_random", c.eval.include_random},
        {"max_rejections", c.eval.max_rejections}}},
      {"sweep", {{"axis", c.sweep.axis}, {"values", sweep_values}}},
      {"seeds", c.seeds},
      {"out_dir", c.out_dir},
      {"checkpoint_every", c.checkpoint_every},
      {"log_every", c.log_every},
      {"probe_trials", c.probe_trials},
      {"distcheck_pairs", c.distcheck_pairs},
      {"generalize_buffer_size", c.generalize_buffer_size},
  };
}

RunConfig load_config(const std::string& path) {
  const std::string text = read_text(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse " + path + ": " + e.what());
  }
  return config_from_json(j);
}

GridMap resolve_map(const RunConfig& cfg) {
  try {
    if (!cfg.map_path.empty()) return GridMap::load(cfg.map_path);
    return builtin_map(cfg.map);
  } catch (const MapError& e) {
    throw ConfigError(e.what());
  }
}

std::vector<GridMap> training_maps(const RunConfig& cfg) {
  std::vector<GridMap> maps;
  if (!cfg.multi_map()) {
    maps.push_back(resolve_map(cfg));
    return maps;
  }
  try {
    for (auto seed : cfg.train_mazes.seeds) maps.push_back(random_maze(seed, cfg.train_mazes.size));
  } catch (const MapError& e) {
    throw ConfigError(e.what());
  }
  return maps;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

fs::path seed_dir(const fs::path& root, std::uint64_t seed) {
  return root / ("seed_" + std::to_string(seed));
}

namespace {

void save_ensemble(const ValueEnsemble& ens, const fs::path& path) {
  try {
    ens.save(path.string());
  } catch (const CheckpointError& e) {
    throw IoError(e.what());
  }
}

double probe_success(const ValueEnsemble& ens, const GridMap& map, const EpisodeConfig& cfg,
                     int trials, Rng& rng) {
  if (trials == 0) return std::nan("");
  int ok = 0;
  for (int i = 0; i < trials; ++i) {
    Episode ep = reset(map, cfg, rng);
    ok += greedy_rollout(ens, map, cfg, ep.start, ep.goal, cfg.max_steps, rng).success;
  }
  return static_cast<double>(ok) / trials;
}

}  // namespace

TrainResult train_run(const RunConfig& cfg, std::uint64_t seed, const std::optional<fs::path>& out) {
  cfg.validate();
  const std::vector<GridMap> maps = training_maps(cfg);
  std::vector<const GridMap*> map_ptrs;
  for (const auto& m : maps) map_ptrs.push_back(&m);
  const MapSet map_set(map_ptrs);
  const std::string name = cfg.multi_map() ? "random_maze_set" : maps[0].name();

  ValueEnsemble ens(cfg.ensemble, cfg.train.estimator, name, maps[0].num_free(),
                    ValueEnsemble::member_seeds(seed, cfg.ensemble.size));
  Rng rng = derived_rng({seed, kTrainStream});
  Rng probe_rng = derived_rng({seed, kProbeStream});
  ReplayBuffer buffer(cfg.train.replay_capacity);
  std::uniform_int_distribution<int> random_action(0, kNumActions - 1);
  std::uniform_int_distribution<std::size_t> pick_map(0, maps.size() - 1);

  if (out) {
    std::error_code ec;
    fs::create_directories(*out, ec);
    if (ec) throw IoError("cannot create " + out->string() + ": " + ec.message());
    write_text(*out / "config.json", config_to_json(cfg).dump(2) + "\n");
  }

  TrainResult result{ens, {}, {}};
  double loss_sum = 0.0;
  long loss_count = 0;
  long env_steps = 0;
  const long total = cfg.train.total_env_steps;
  std::vector<Transition> trajectory;

  while (env_steps < total) {
    const std::size_t map_id = maps.size() > 1 ? pick_map(rng) : 0;
    const GridMap& map = maps[map_id];
    const Episode ep = reset(map, cfg.episode, rng);
    trajectory.clear();
    State s = ep.start;
    for (int t = 0; t < cfg.episode.max_steps && env_steps < total; ++t) {
      Action a;
      if (env_steps < cfg.train.random_warmup_steps) {
        a = action_from_index(random_action(rng));
      } else {
        a = epsilon_greedy_action(ens.action_distances(map, s, ep.goal), cfg.train.epsilon, rng);
      }
      Transition tr = step(map, s, a, ep.goal, cfg.episode, rng);
      tr.map_id = static_cast<std::uint16_t>(map_id);
      if (!tr.done && t == cfg.episode.max_steps - 1) tr.timeout = true;
      trajectory.push_back(tr);
      s = tr.next_state;
      ++env_steps;

      if (env_steps > cfg.train.random_warmup_steps &&
          buffer.size() >= static_cast<std::size_t>(cfg.train.batch_size)) {
        auto losses = ens.train_all(buffer, cfg.train.batch_size, map_set, cfg.episode.goal_radius);
        double mean = 0.0;
        for (double l : losses) mean += l;
        loss_sum += mean / static_cast<double>(losses.size());
        ++loss_count;
      }
      if (env_steps % cfg.log_every == 0) {
        LogRow row;
        row.step = env_steps;
        row.loss = loss_count ? loss_sum / static_cast<double>(loss_count) : std::nan("");
        row.probe_success = probe_success(ens, maps[0], cfg.episode, cfg.probe_trials, probe_rng);
        result.log.push_back(row);
        loss_sum = 0.0;
        loss_count = 0;
      }
      if (out && cfg.checkpoint_every > 0 && env_steps % cfg.checkpoint_every == 0) {
        save_ensemble(ens, *out / ("checkpoint_" + std::to_string(env_steps) + ".ckpt"));
      }
      if (tr.done) break;
    }
    buffer.add(relabel(trajectory, map, cfg.episode.goal_radius, rng, cfg.train.relabel_probs));
  }

  result.visited = buffer.distinct_states();
  result.ensemble = std::move(ens);
  if (out) {
    save_ensemble(result.ensemble, *out / "ensemble.ckpt");
    std::ostringstream log;
    log << "step,loss,probe_success\n";
    for (const auto& r : result.log) {
      log << r.step << ',' << fmt(r.loss) << ',' << fmt(r.probe_success) << '\n';
    }
    write_text(*out / "log.csv", log.str());
    std::ostringstream states;
    write_states_csv(states, result.visited);
    write_text(*out / "visited_states.csv", states.str());
  }
  return result;
}

const char* method_name(Method m) {
  switch (m) {
    case Method::Sorb: return "sorb";
    case Method::GreedyOnly: return "greedy_only";
    case Method::Random: return "random";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  if (s == "sorb") return Method::Sorb;
  if (s == "greedy_only") return Method::GreedyOnly;
  if (s == "random") return Method::Random;
  throw std::invalid_argument("unknown method '" + s + "'");
}

std::vector<EvalPair> sample_bucket(const DistanceOracle& oracle, int distance, int tolerance,
                                    int count, long max_attempts, Rng& rng) {
  const GridMap& map = oracle.map();
  std::uniform_int_distribution<int> pick(0, map.num_free() - 1);
  std::vector<EvalPair> pairs;
  for (long attempt = 0; attempt < max_attempts && static_cast<int>(pairs.size()) < count;
       ++attempt) {
    const State s = map.free_state(pick(rng));
    const State g = map.free_state(pick(rng));
    const int d = oracle.distance(s, g);
    if (d != kUnreachable && std::abs(d - distance) <= tolerance) pairs.push_back({s, g});
  }
  return pairs;
}

SearchBuffer training_search_buffer(const RunConfig& cfg, std::span<const State> visited,
                                    std::uint64_t seed) {
  Rng rng = derived_rng({seed, kBufferStream});
  return make_search_buffer(visited, cfg.search_buffer_size, BufferSource::TrainingSubsample, rng);
}

namespace {

std::vector<EvalRecord> evaluate_salted(const RunConfig& cfg, const ValueEnsemble& ens,
                                        const Roadmap& rm, const DistanceOracle& oracle,
                                        std::uint64_t seed, const std::vector<Method>& methods,
                                        std::uint64_t salt) {
  const GridMap& map = rm.map();
  const int horizon = cfg.eval_horizon();
  const PolicyState ps(rm, ens, cfg.replan_every_step, cfg.episode.goal_radius);
  std::vector<EvalRecord> records;
  for (int distance : cfg.eval.distances) {
    Rng pair_rng = derived_rng({seed, kPairStream, salt, static_cast<std::uint64_t>(distance)});
    auto pairs = sample_bucket(oracle, distance, cfg.eval.tolerance, cfg.eval.trials,
                               cfg.eval.max_rejections, pair_rng);
    if (pairs.empty()) {
      std::cerr << "warning: no pairs at distance " << distance << " on " << map.name()
                << ", bucket skipped\n";
      continue;
    }
    for (Method m : methods) {
      std::vector<RolloutResult> results(pairs.size());
      parallel_for(pairs.size(), [&](std::size_t i) {
        Rng r = derived_rng({seed, kRolloutStream, salt, static_cast<std::uint64_t>(distance), i});
        const auto& p = pairs[i];
        switch (m) {
          case Method::Sorb: results[i] = rollout(ps, cfg.episode, p.start, p.goal, horizon, r); break;
          case Method::GreedyOnly:
            results[i] = greedy_rollout(ens, map, cfg.episode, p.start, p.goal, horizon, r);
            break;
          case Method::Random:
            results[i] = random_rollout(map, cfg.episode, p.start, p.goal, horizon, r);
            break;
        }
        results[i].trace.clear();
      });
      int ok = 0;
      double steps = 0.0;
      for (const auto& r : results) {
        if (r.success) {
          ++ok;
          steps += r.steps;
        }
      }
      EvalRecord rec;
      rec.method = m;
      rec.seed = seed;
      rec.distance = distance;
      rec.success_rate = static_cast<double>(ok) / static_cast<double>(results.size());
      rec.mean_steps = ok ? steps / ok : std::nan("");
      records.push_back(rec);
    }
  }
  return records;
}

}  // namespace

std::vector<Method> eval_methods(const RunConfig& cfg) {
  std::vector<Method> m{Method::Sorb, Method::GreedyOnly};
  if (cfg.eval.include_random) m.push_back(Method::Random);
  return m;
}

std::vector<EvalRecord> evaluate(const RunConfig& cfg, const ValueEnsemble& ens, const Roadmap& rm,
                                 const DistanceOracle& oracle, std::uint64_t seed,
                                 const std::vector<Method>& methods) {
  return evaluate_salted(cfg, ens, rm, oracle, seed, methods, 0);
}

void write_eval_csv(std::ostream& out, const std::vector<EvalRecord>& records) {
  out << "method,seed,distance,success_rate,mean_steps\n";
  for (const auto& r : records) {
    out << method_name(r.method) << ',' << r.seed << ',' << r.distance << ','
        << fmt(r.success_rate) << ',' << fmt(r.mean_steps) << '\n';
  }
}

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };
  if (!std::getline(in, line)) return t;
  t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != t.header.size()) throw std::runtime_error("csv row width mismatch");
    t.rows.push_back(std::move(cells));
  }
  return t;
}

std::vector<EvalRecord> read_eval_csv(std::istream& in) {
  CsvTable t = read_csv(in);
  const std::vector<std::string> expected{"method", "seed", "distance", "success_rate", "mean_steps"};
  if (t.header != expected) throw std::runtime_error("unexpected eval csv header");
  std::vector<EvalRecord> out;
  for (const auto& row : t.rows) {
    EvalRecord r;
    r.method = parse_method(row[0]);
    r.seed = std::stoull(row[1]);
    r.distance = std::stoi(row[2]);
    r.success_rate = parse_double(row[3]);
    r.mean_steps = parse_double(row[4]);
    out.push_back(r);
  }
  return out;
}

void write_eval_svg(std::ostream& out, const std::vector<EvalRecord>& records,
                    const std::string& title) {
  const double W = 640, H = 420, left = 60, right = 150, top = 40, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;
  int dmin = 0, dmax = 1;
  if (!records.empty()) {
    dmin = dmax = records.front().distance;
    for (const auto& r : records) {
      dmin = std::min(dmin, r.distance);
      dmax = std::max(dmax, r.distance);
    }
    if (dmax == dmin) ++dmax;
  }
  auto X = [&](double d) { return left + pw * (d - dmin) / (dmax - dmin); };
  auto Y = [&](double s) { return top + ph * (1.0 - s); };
  const char* colors[] = {"#1f77b4", "#d62728", "#7f7f7f"};

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << left + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << title << "</text>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\""
      << top + ph << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
      << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double s = i / 5.0;
    out << "<line x1=\"" << left - 4 << "\" y1=\"" << Y(s) << "\" x2=\"" << left << "\" y2=\""
        << Y(s) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << left - 8 << "\" y=\"" << Y(s) + 4 << "\" text-anchor=\"end\">" << s
        << "</text>\n";
  }
  std::set<int> distances;
  for (const auto& r : records) distances.insert(r.distance);
  for (int d : distances) {
    out << "<line x1=\"" << X(d) << "\" y1=\"" << top + ph << "\" x2=\"" << X(d) << "\" y2=\""
        << top + ph + 4 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << X(d) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << d
        << "</text>\n";
  }
  out << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 10
      << "\" text-anchor=\"middle\">distance to goal (steps)</text>\n";
  out << "<text transform=\"translate(16," << top + ph / 2
      << ") rotate(-90)\" text-anchor=\"middle\">success rate</text>\n";

  int legend = 0;
  for (Method m : {Method::Sorb, Method::GreedyOnly, Method::Random}) {
    std::map<std::uint64_t, std::map<int, double>> per_seed;
    for (const auto& r : records) {
      if (r.method == m) per_seed[r.seed][r.distance] = r.success_rate;
    }
    if (per_seed.empty()) continue;
    const char* color = colors[static_cast<int>(m)];
    std::map<int, std::pair<double, int>> mean;
    for (const auto& [seed, curve] : per_seed) {
      out << "<polyline fill=\"none\" stroke=\"" << color
          << "\" stroke-opacity=\"0.3\" stroke-width=\"1.5\" points=\"";
      for (const auto& [d, s] : curve) {
        out << X(d) << ',' << Y(s) << ' ';
        mean[d].first += s;
        mean[d].second += 1;
      }
      out << "\"/>\n";
    }
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2.5\" points=\"";
    for (const auto& [d, acc] : mean) out << X(d) << ',' << Y(acc.first / acc.second) << ' ';
    out << "\"/>\n";
    const double ly = top + 10 + 20 * legend++;
    out << "<line x1=\"" << left + pw + 15 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 40
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2.5\"/>\n";
    out << "<text x=\"" << left + pw + 45 << "\" y=\"" << ly + 4 << "\">" << method_name(m)
        << "</text>\n";
  }
  out << "</svg>\n";
}

namespace {

bool retrains(const std::string& axis) { return axis == "ensemble" || axis == "distributional"; }

RunConfig variant_config(const RunConfig& base, const std::string& axis, const std::string& value) {
  RunConfig c = base;
  try {
    if (axis == "buffer") {
      const long v = std::stol(value);
      if (v < 0) throw ConfigError("buffer size must be >= 0");
      c.search_buffer_size = static_cast<std::size_t>(v);
    } else if (axis == "maxdist") {
      c.maxdist = parse_double(value);
    } else if (axis == "aggregation") {
      c.ensemble.aggregation = parse_aggregation(value);
    } else if (axis == "ensemble") {
      c.ensemble.size = std::stoi(value);
    } else if (axis == "distributional") {
      if (value == "on") {
        c.train.estimator.head = Head::Distributional;
      } else if (value == "off") {
        c.train.estimator.head = Head::Scalar;
      } else {
        throw ConfigError("distributional sweep values are 'on' and 'off'");
      }
    } else {
      throw ConfigError("unknown sweep axis '" + axis +
                        "' (expected buffer, maxdist, ensemble, aggregation, distributional)");
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError("bad sweep value '" + value + "': " + e.what());
  }
  c.validate();
  return c;
}

}  // namespace

std::vector<SweepRecord> run_sweep(const RunConfig& cfg, const SweepSpec& spec,
                                   const std::vector<TrainedSeed>& trained) {
  if (spec.values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<RunConfig> variants;
  for (const auto& v : spec.values) variants.push_back(variant_config(cfg, spec.axis, v));
  if (!retrains(spec.axis) && trained.empty()) {
    throw ConfigError("sweep axis '" + spec.axis + "' needs a trained checkpoint");
  }
  const GridMap map = resolve_map(cfg);
  const DistanceOracle oracle(map);
  std::vector<std::uint64_t> seeds;
  if (!trained.empty()) {
    for (const auto& t : trained) seeds.push_back(t.seed);
  } else {
    seeds = cfg.seeds;
  }

  std::vector<SweepRecord> out;
  auto emit = [&](const std::string& value, const std::vector<EvalRecord>& records) {
    for (const auto& r : records) out.push_back({spec.axis, value, r});
  };

  for (std::size_t si = 0; si < seeds.size(); ++si) {
    const std::uint64_t seed = seeds[si];
    std::optional<Roadmap> shared;
    for (std::size_t vi = 0; vi < variants.size(); ++vi) {
      const RunConfig& vc = variants[vi];
      if (retrains(spec.axis)) {
        const bool same = spec.axis == "ensemble"
                              ? vc.ensemble.size == cfg.ensemble.size
                              : vc.train.estimator.head == cfg.train.estimator.head;
        std::optional<TrainResult> fresh;
        if (!(same && si < trained.size())) fresh = train_run(vc, seed);
        const ValueEnsemble& ens = fresh ? fresh->ensemble : trained[si].ensemble;
        const auto& visited = fresh ? fresh->visited : trained[si].visited;
        const Roadmap rm =
            build_roadmap(map, training_search_buffer(vc, visited, seed), ens, vc.maxdist);
        std::vector<Method> methods{Method::Sorb};
        if (spec.axis == "distributional") methods.push_back(Method::Random);
        emit(spec.values[vi], evaluate(vc, ens, rm, oracle, seed, methods));
        continue;
      }
      const TrainedSeed& t = trained[si];
      if (spec.axis == "maxdist") {
        // Raw weights do not depend on maxdist; prune the shared matrix.
        if (!shared) {
          shared = build_roadmap(map, training_search_buffer(vc, t.visited, seed), t.ensemble,
                                 vc.maxdist);
        }
        const Roadmap rm = shared->with_maxdist(vc.maxdist);
        emit(spec.values[vi], evaluate(vc, t.ensemble, rm, oracle, seed, {Method::Sorb}));
      } else if (spec.axis == "aggregation") {
        ValueEnsemble ens = t.ensemble;
        ens.set_aggregation(vc.ensemble.aggregation);
        const Roadmap rm =
            build_roadmap(map, training_search_buffer(vc, t.visited, seed), ens, vc.maxdist);
        emit(spec.values[vi], evaluate(vc, ens, rm, oracle, seed, {Method::Sorb}));
      } else {
        const Roadmap rm = build_roadmap(map, training_search_buffer(vc, t.visited, seed),
                                         t.ensemble, vc.maxdist);
        emit(spec.values[vi], evaluate(vc, t.ensemble, rm, oracle, seed, {Method::Sorb}));
      }
    }
  }
  return out;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRecord>& records) {
  out << "axis,value,method,seed,distance,success_rate,mean_steps\n";
  for (const auto& s : records) {
    const auto& r = s.record;
    out << s.axis << ',' << s.value << ',' << method_name(r.method) << ',' << r.seed << ','
        << r.distance << ',' << fmt(r.success_rate) << ',' << fmt(r.mean_steps) << '\n';
  }
}

std::vector<GeneralizeRecord> run_generalize(const RunConfig& cfg, const TrainedSeed& trained) {
  if (cfg.heldout_mazes.seeds.empty()) throw ConfigError("heldout_mazes.seeds is empty");
  std::set<std::uint64_t> train_seeds(cfg.train_mazes.seeds.begin(), cfg.train_mazes.seeds.end());
  for (auto s : cfg.heldout_mazes.seeds) {
    if (train_seeds.count(s)) {
      throw ConfigError("held-out maze seed " + std::to_string(s) + " is also a training maze");
    }
  }
  std::vector<GeneralizeRecord> out;
  for (auto maze_seed : cfg.heldout_mazes.seeds) {
    GridMap map = [&] {
      try {
        return random_maze(maze_seed, cfg.heldout_mazes.size);
      } catch (const MapError& e) {
        throw ConfigError(e.what());
      }
    }();
    const DistanceOracle oracle(map);
    Rng walk = derived_rng({trained.seed, kWalkStream, maze_seed});
    auto states = random_walk_states(map, cfg.episode, cfg.generalize_buffer_size, walk);
    SearchBuffer buffer =
        make_search_buffer(states, cfg.generalize_buffer_size, BufferSource::RandomWalk, walk);
    const Roadmap rm = build_roadmap(map, buffer, trained.ensemble, cfg.maxdist);
    auto records = evaluate_salted(cfg, trained.ensemble, rm, oracle, trained.seed,
                                   {Method::Sorb, Method::GreedyOnly}, maze_seed + 1);
    for (const auto& r : records) out.push_back({maze_seed, r});
  }
  return out;
}

void write_generalize_csv(std::ostream& out, const std::vector<GeneralizeRecord>& records) {
  out << "maze_seed,method,seed,distance,success_rate,mean_steps\n";
  for (const auto& g : records) {
    const auto& r = g.record;
    out << g.maze_seed << ',' << method_name(r.method) << ',' << r.seed << ',' << r.distance << ','
        << fmt(r.success_rate) << ',' << fmt(r.mean_steps) << '\n';
  }
}

std::vector<DistcheckRow> run_distcheck(const RunConfig& cfg, const TrainedSeed& trained) {
  const GridMap map = resolve_map(cfg);
  const DistanceOracle oracle(map);
  const Roadmap rm = build_roadmap(map, training_search_buffer(cfg, trained.visited, trained.seed),
                                   trained.ensemble, cfg.maxdist);
  const PolicyState ps(rm, trained.ensemble, cfg.replan_every_step, cfg.episode.goal_radius);
  std::vector<DistcheckRow> rows;
  for (int d = 0; d <= oracle.max_distance(); ++d) {
    Rng pair_rng = derived_rng({trained.seed, kDistcheckStream, static_cast<std::uint64_t>(d)});
    auto pairs = sample_bucket(oracle, d, 0, cfg.distcheck_pairs, cfg.eval.max_rejections, pair_rng);
    std::vector<DistcheckRow> chunk(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t i) {
      Rng r = derived_rng({trained.seed, kDistcheckStream, static_cast<std::uint64_t>(d), i + 1});
      chunk[i].oracle = d;
      chunk[i].predicted = trained.ensemble.aggregate_distance(map, pairs[i].start, pairs[i].goal);
      chunk[i].success =
          rollout(ps, cfg.episode, pairs[i].start, pairs[i].goal, cfg.eval_horizon(), r).success;
    });
    rows.insert(rows.end(), chunk.begin(), chunk.end());
  }
  return rows;
}

void write_distcheck_csv(std::ostream& out, const std::vector<DistcheckRow>& rows) {
  out << "oracle,predicted,success\n";
  for (const auto& r : rows) {
    out << r.oracle << ',' << fmt(r.predicted) << ',' << (r.success ? 1 : 0) << '\n';
  }
}

void write_states_csv(std::ostream& out, std::span<const State> states) {
  out << "x,y\n";
  for (State s : states) out << s.x << ',' << s.y << '\n';
}

std::vector<State> read_states_csv(std::istream& in) {
  CsvTable t = read_csv(in);
  if (t.header != std::vector<std::string>{"x", "y"}) {
    throw std::runtime_error("unexpected states csv header");
  }
  std::vector<State> out;
  for (const auto& row : t.rows) out.push_back({std::stoi(row[0]), std::stoi(row[1])});
  return out;
}

TrainedSeed load_trained(const fs::path& dir, std::uint64_t seed) {
  const fs::path ckpt = fs::is_directory(dir) ? dir / "ensemble.ckpt" : dir;
  const fs::path states = ckpt.parent_path() / "visited_states.csv";
  TrainedSeed t{seed, [&] {
                  try {
                    return ValueEnsemble::load(ckpt.string());
                  } catch (const CheckpointError& e) {
                    throw IoError(ckpt.string() + ": " + e.what());
                  }
                }(),
                {}};
  if (fs::exists(states)) {
    std::istringstream in(read_text(states));
    try {
      t.visited = read_states_csv(in);
    } catch (const std::exception& e) {
      throw IoError(states.string() + ": " + e.what());
    }
  }
  return t;
}

}  // namespace sorb
