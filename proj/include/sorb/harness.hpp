#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sorb/ensemble.hpp"
#include "sorb/roadmap.hpp"
#include "sorb/search_policy.hpp"

namespace sorb {

// Bad or inconsistent configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File system trouble (CLI exit code 3).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MazeSet {
  std::vector<std::uint64_t> seeds;
  int size = 21;
};

struct EvalConfig {
  std::vector<int> distances = {2, 5, 10, 15, 20, 25, 30, 35};
  // A pair belongs to bucket d when |oracle distance - d| <= tolerance.
  int tolerance = 0;
  int trials = 30;
  // 0 means episode.max_steps.
  int horizon = 0;
  bool include_random = true;
  long max_rejections = 1000000;
};

struct SweepSpec {
  std::string axis;
  std::vector<std::string> values;
};

struct RunConfig {
  std::string map = "four_rooms";
  // Custom map file; overrides `map` when set.
  std::string map_path;
  // Multi-map training over random mazes; used when seeds is nonempty.
  MazeSet train_mazes;
  MazeSet heldout_mazes;

  EpisodeConfig episode;
  TrainConfig train;
  EnsembleConfig ensemble;
  double maxdist = 3.0;
  std::size_t search_buffer_size = 1000;
  bool replan_every_step = true;
  EvalConfig eval;
  SweepSpec sweep;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  std::string out_dir = "out";

  long checkpoint_every = 0;  // 0: only at the end
  long log_every = 1000;
  int probe_trials = 10;
  // Pairs per oracle distance for distcheck.
  int distcheck_pairs = 20;
  std::size_t generalize_buffer_size = 1000;

  bool multi_map() const { return !train_mazes.seeds.empty(); }
  int eval_horizon() const { return eval.horizon > 0 ? eval.horizon : episode.max_steps; }
  void validate() const;
};

RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig load_config(const std::string& path);

// Resolves the single evaluation/training map of a config.
GridMap resolve_map(const RunConfig& cfg);
std::vector<GridMap> training_maps(const RunConfig& cfg);

struct LogRow {
  long step = 0;
  double loss = 0.0;
  double probe_success = 0.0;
};

struct TrainResult {
  ValueEnsemble ensemble;
  // Distinct states of the final replay buffer, first-seen order.
  std::vector<State> visited;
  std::vector<LogRow> log;
};

// Warmup with random actions, then epsilon-greedy collection with
// end-of-episode relabeling and one train step per member per env step.
// When `out` is given, writes log.csv, visited_states.csv and ensemble.ckpt
// (plus periodic checkpoints) there.
TrainResult train_run(const RunConfig& cfg, std::uint64_t seed,
                      const std::optional<std::filesystem::path>& out = std::nullopt);

enum class Method : std::uint8_t { Sorb = 0, GreedyOnly = 1, Random = 2 };
const char* method_name(Method m);
Method parse_method(const std::string& s);

struct EvalRecord {
  Method method = Method::Sorb;
  std::uint64_t seed = 0;
  int distance = 0;
  double success_rate = 0.0;
  double mean_steps = 0.0;  // over successful trials; NaN when none
};

struct EvalPair {
  State start;
  State goal;
};

// Uniform pairs whose oracle distance lies in the bucket, by rejection.
// Returns fewer than `count` only when the attempts run out.
std::vector<EvalPair> sample_bucket(const DistanceOracle& oracle, int distance, int tolerance,
                                    int count, long max_attempts, Rng& rng);

// Evaluates the listed methods on shared pairs. Pair sampling and rollout
// noise depend only on (seed, bucket, trial), so methods and settings see the
// same problems.
std::vector<EvalRecord> evaluate(const RunConfig& cfg, const ValueEnsemble& ens,
                                 const Roadmap& rm, const DistanceOracle& oracle,
                                 std::uint64_t seed, const std::vector<Method>& methods);

// sorb and greedy_only, plus random when eval.include_random is set.
std::vector<Method> eval_methods(const RunConfig& cfg);

SearchBuffer training_search_buffer(const RunConfig& cfg, std::span<const State> visited,
                                    std::uint64_t seed);

void write_eval_csv(std::ostream& out, const std::vector<EvalRecord>& records);
std::vector<EvalRecord> read_eval_csv(std::istream& in);

// Success vs distance, one translucent line per seed and a solid mean line
// per method.
void write_eval_svg(std::ostream& out, const std::vector<EvalRecord>& records,
                    const std::string& title);

struct SweepRecord {
  std::string axis;
  std::string value;
  EvalRecord record;
};

// A trained seed: the ensemble plus the states it visited.
struct TrainedSeed {
  std::uint64_t seed = 0;
  ValueEnsemble ensemble;
  std::vector<State> visited;
};

// Re-evaluates (buffer, maxdist, aggregation) or retrains (ensemble,
// distributional) along one axis.
std::vector<SweepRecord> run_sweep(const RunConfig& cfg, const SweepSpec& spec,
                                   const std::vector<TrainedSeed>& trained);

void write_sweep_csv(std::ostream& out, const std::vector<SweepRecord>& records);

struct GeneralizeRecord {
  std::uint64_t maze_seed = 0;
  EvalRecord record;
};

// Held-out mazes: random-walk search buffers, frozen ensemble.
std::vector<GeneralizeRecord> run_generalize(const RunConfig& cfg, const TrainedSeed& trained);

void write_generalize_csv(std::ostream& out, const std::vector<GeneralizeRecord>& records);

struct DistcheckRow {
  int oracle = 0;
  double predicted = 0.0;
  bool success = false;
};

std::vector<DistcheckRow> run_distcheck(const RunConfig& cfg, const TrainedSeed& trained);
void write_distcheck_csv(std::ostream& out, const std::vector<DistcheckRow>& rows);

// Minimal CSV reader for the files above: header names plus string cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
CsvTable read_csv(std::istream& in);

void write_states_csv(std::ostream& out, std::span<const State> states);
std::vector<State> read_states_csv(std::istream& in);

// Seed directory layout used by train and read back by the other commands.
std::filesystem::path seed_dir(const std::filesystem::path& root, std::uint64_t seed);
// Loads <dir>/ensemble.ckpt and <dir>/visited_states.csv.
TrainedSeed load_trained(const std::filesystem::path& dir, std::uint64_t seed);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace sorb
