#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

#include "sorb/checkpoint.hpp"
#include "sorb/harness.hpp"

namespace fs = std::filesystem;
using namespace sorb;

namespace {

struct Options {
  std::string config;
  std::string checkpoint;
  std::string out;
  std::string map;
  std::optional<std::uint64_t> seed;
};

RunConfig make_config(const Options& o) {
  RunConfig cfg = o.config.empty() ? config_from_json(nlohmann::json::object()) : load_config(o.config);
  if (o.seed) cfg.seeds = {*o.seed};
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (!o.map.empty()) cfg.map_path = o.map;
  cfg.validate();
  return cfg;
}

// --checkpoint may name a checkpoint file, a seed directory, or a run
// directory holding seed_<s>/ subdirectories for every configured seed.
std::vector<TrainedSeed> load_checkpoints(const Options& o, const RunConfig& cfg) {
  if (o.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  const fs::path p(o.checkpoint);
  if (!fs::exists(p)) throw IoError("checkpoint not found: " + p.string());
  std::vector<TrainedSeed> out;
  if (fs::is_regular_file(p) || fs::exists(p / "ensemble.ckpt")) {
    out.push_back(load_trained(p, cfg.seeds.front()));
  } else {
    for (auto s : cfg.seeds) out.push_back(load_trained(seed_dir(p, s), s));
  }
  return out;
}

void check_map(const TrainedSeed& t, const GridMap& map) {
  const auto& est = t.ensemble.member(0);
  if (est.config().backend == Backend::Tabular && est.map_name() != map.name()) {
    throw ConfigError("checkpoint was trained on '" + est.map_name() + "', config map is '" +
                      map.name() + "'");
  }
}

fs::path out_root(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("cannot create " + cfg.out_dir + ": " + ec.message());
  return cfg.out_dir;
}

int cmd_train(const Options& o) {
  const RunConfig cfg = make_config(o);
  const fs::path root = out_root(cfg);
  for (auto seed : cfg.seeds) {
    const fs::path dir = seed_dir(root, seed);
    auto result = train_run(cfg, seed, dir);
    std::cout << "seed " << seed << ": " << result.visited.size() << " distinct states, checkpoint "
              << (dir / "ensemble.ckpt").string() << "\n";
  }
  return 0;
}

int cmd_eval(const Options& o) {
  const RunConfig cfg = make_config(o);
  const auto trained = load_checkpoints(o, cfg);
  const GridMap map = resolve_map(cfg);
  const DistanceOracle oracle(map);
  std::vector<EvalRecord> records;
  for (const auto& t : trained) {
    check_map(t, map);
    const Roadmap rm =
        build_roadmap(map, training_search_buffer(cfg, t.visited, t.seed), t.ensemble, cfg.maxdist);
    auto r = evaluate(cfg, t.ensemble, rm, oracle, t.seed, eval_methods(cfg));
    records.insert(records.end(), r.begin(), r.end());
  }
  const fs::path root = out_root(cfg);
  std::ostringstream csv, svg;
  write_eval_csv(csv, records);
  write_eval_svg(svg, records, "success vs distance on " + map.name());
  write_text(root / "eval.csv", csv.str());
  write_text(root / "eval.svg", svg.str());
  std::cout << csv.str();
  return 0;
}

int cmd_sweep(const Options& o) {
  const RunConfig cfg = make_config(o);
  std::vector<TrainedSeed> trained;
  if (!o.checkpoint.empty()) trained = load_checkpoints(o, cfg);
  const GridMap map = resolve_map(cfg);
  for (const auto& t : trained) check_map(t, map);
  auto records = run_sweep(cfg, cfg.sweep, trained);
  std::ostringstream csv;
  write_sweep_csv(csv, records);
  write_text(out_root(cfg) / "sweep.csv", csv.str());
  std::cout << csv.str();
  return 0;
}

int cmd_generalize(const Options& o) {
  const RunConfig cfg = make_config(o);
  const auto trained = load_checkpoints(o, cfg);
  std::vector<GeneralizeRecord> records;
  for (const auto& t : trained) {
    auto r = run_generalize(cfg, t);
    records.insert(records.end(), r.begin(), r.end());
  }
  std::ostringstream csv;
  write_generalize_csv(csv, records);
  write_text(out_root(cfg) / "generalize.csv", csv.str());
  std::cout << csv.str();
  return 0;
}

int cmd_distcheck(const Options& o) {
  const RunConfig cfg = make_config(o);
  const auto trained = load_checkpoints(o, cfg);
  const GridMap map = resolve_map(cfg);
  std::vector<DistcheckRow> rows;
  for (const auto& t : trained) {
    check_map(t, map);
    auto r = run_distcheck(cfg, t);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  std::ostringstream csv;
  write_distcheck_csv(csv, rows);
  write_text(out_root(cfg) / "distcheck.csv", csv.str());
  std::cout << csv.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Search on the replay buffer: train, evaluate and ablate gridworld planners"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub, bool needs_checkpoint) {
    sub->add_option("--config", o.config, "JSON run config (defaults when omitted)");
    auto* ck = sub->add_option("--checkpoint", o.checkpoint,
                               "checkpoint file, seed directory, or run directory");
    if (needs_checkpoint) ck->required();
    sub->add_option("--out", o.out, "output directory (overrides out_dir)");
    sub->add_option("--seed", o.seed, "single seed (overrides seeds)");
    sub->add_option("--map", o.map, "custom map file");
  };
  auto* train = app.add_subcommand("train", "collect data and train the ensemble");
  add_common(train, false);
  auto* eval = app.add_subcommand("eval", "success vs distance for sorb, greedy and random");
  add_common(eval, true);
  auto* sweep = app.add_subcommand("sweep", "ablation along the config's sweep axis");
  add_common(sweep, false);
  auto* generalize = app.add_subcommand("generalize", "evaluate on held-out random mazes");
  add_common(generalize, true);
  auto* distcheck = app.add_subcommand("distcheck", "predicted vs oracle distance");
  add_common(distcheck, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) return cmd_train(o);
    if (*eval) return cmd_eval(o);
    if (*sweep) return cmd_sweep(o);
    if (*generalize) return cmd_generalize(o);
    if (*distcheck) return cmd_distcheck(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 3;
  } catch (const CheckpointError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
