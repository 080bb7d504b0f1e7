#include "sorb/ensemble.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>

#include "sorb/checkpoint.hpp"

namespace sorb {

const char* aggregation_name(Aggregation a) { return a == Aggregation::Max ? "max" : "mean"; }

Aggregation parse_aggregation(const std::string& s) {
  if (s == "max") return Aggregation::Max;
  if (s == "mean") return Aggregation::Mean;
  throw std::invalid_argument("unknown aggregation '" + s + "'");
}

void EnsembleConfig::validate() const {
  if (size < 1) throw std::invalid_argument("ensemble size must be >= 1");
}

ValueEnsemble::ValueEnsemble(const EnsembleConfig& cfg, const EstimatorConfig& est_cfg,
                             const std::string& map_name, int num_cells,
                             const std::vector<std::uint64_t>& member_seeds)
    : cfg_(cfg) {
  cfg_.validate();
  if (member_seeds.size() != static_cast<std::size_t>(cfg_.size)) {
    throw std::invalid_argument("need one seed per ensemble member");
  }
  for (auto seed : member_seeds) {
    members_.push_back(make_estimator(est_cfg, map_name, num_cells, seed));
    batch_rngs_.emplace_back(batch_seed(seed));
  }
}

ValueEnsemble::ValueEnsemble(EnsembleConfig cfg, std::vector<std::unique_ptr<ValueEstimator>> members)
    : cfg_(cfg), members_(std::move(members)) {
  cfg_.size = static_cast<int>(members_.size());
  cfg_.validate();
  for (std::size_t i = 0; i < members_.size(); ++i) batch_rngs_.emplace_back(i);
}

ValueEnsemble::ValueEnsemble(const ValueEnsemble& other)
    : cfg_(other.cfg_), batch_rngs_(other.batch_rngs_) {
  for (const auto& m : other.members_) members_.push_back(m->clone());
}

ValueEnsemble& ValueEnsemble::operator=(const ValueEnsemble& other) {
  if (this != &other) *this = ValueEnsemble(other);
  return *this;
}

std::vector<std::uint64_t> ValueEnsemble::member_seeds(std::uint64_t seed, int size) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    0x5eedu};
  std::vector<std::uint32_t> raw(2 * static_cast<std::size_t>(size));
  seq.generate(raw.begin(), raw.end());
  std::vector<std::uint64_t> out(size);
  for (int i = 0; i < size; ++i) {
    out[i] = (static_cast<std::uint64_t>(raw[2 * i]) << 32) | raw[2 * i + 1];
  }
  return out;
}

std::vector<double> ValueEnsemble::train_all(const ReplayBuffer& buffer, int batch_size,
                                             MapSet maps, int goal_radius) {
  std::vector<double> losses;
  losses.reserve(members_.size());
  for (std::size_t i = 0; i < members_.size(); ++i) {
    losses.push_back(train_step(*members_[i], buffer, batch_size, maps, goal_radius, batch_rngs_[i]));
  }
  return losses;
}

double ValueEnsemble::combine(std::span<const double> values) const {
  if (cfg_.aggregation == Aggregation::Max) return *std::max_element(values.begin(), values.end());
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double ValueEnsemble::aggregate_distance(const GridMap& map, State s, State g) const {
  double out = 0.0;
  StatePair pair{s, g};
  aggregate_distances(map, {&pair, 1}, {&out, 1});
  return out;
}

void ValueEnsemble::aggregate_distances(const GridMap& map, std::span<const StatePair> pairs,
                                        std::span<double> out) const {
  if (members_.size() == 1) {
    members_[0]->distances(map, pairs, out);
    return;
  }
  std::vector<double> per_member(members_.size() * pairs.size());
  for (std::size_t m = 0; m < members_.size(); ++m) {
    members_[m]->distances(map, pairs,
                           std::span<double>(per_member).subspan(m * pairs.size(), pairs.size()));
  }
  std::vector<double> column(members_.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (std::size_t m = 0; m < members_.size(); ++m) column[m] = per_member[m * pairs.size() + i];
    out[i] = combine(column);
  }
}

std::array<double, kNumActions> ValueEnsemble::action_distances(const GridMap& map, State s,
                                                                State g) const {
  std::array<double, kNumActions> out{};
  std::vector<std::array<double, kNumActions>> per_member;
  per_member.reserve(members_.size());
  for (const auto& m : members_) per_member.push_back(m->action_distances(map, s, g));
  std::vector<double> column(members_.size());
  for (int a = 0; a < kNumActions; ++a) {
    for (std::size_t m = 0; m < members_.size(); ++m) column[m] = per_member[m][a];
    out[a] = combine(column);
  }
  return out;
}

Action ValueEnsemble::greedy_action(const GridMap& map, State s, State g) const {
  return argmin_action(action_distances(map, s, g));
}

namespace {
constexpr char kEnsembleMagic[4] = {'S', 'R', 'B', 'E'};
}

std::vector<std::uint8_t> ValueEnsemble::serialize() const {
  BinaryWriter out;
  out.bytes({reinterpret_cast<const std::uint8_t*>(kEnsembleMagic), 4});
  out.u32(kCheckpointVersion);
  out.u32(static_cast<std::uint32_t>(members_.size()));
  out.u8(static_cast<std::uint8_t>(cfg_.aggregation));
  for (const auto& m : members_) {
    BinaryWriter member;
    write_estimator(member, *m);
    out.u64(member.buffer().size());
    out.bytes(member.buffer());
  }
  return out.take();
}

ValueEnsemble ValueEnsemble::deserialize(std::span<const std::uint8_t> data) {
  BinaryReader in(data);
  auto magic = in.bytes(4);
  if (std::memcmp(magic.data(), kEnsembleMagic, 4) != 0) {
    throw CheckpointError("bad ensemble checkpoint magic");
  }
  if (in.u32() != kCheckpointVersion) throw CheckpointError("unsupported ensemble version");
  EnsembleConfig cfg;
  cfg.size = static_cast<int>(in.u32());
  auto agg = in.u8();
  if (cfg.size < 1 || agg > 1) throw CheckpointError("bad ensemble header");
  cfg.aggregation = static_cast<Aggregation>(agg);
  std::vector<std::unique_ptr<ValueEstimator>> members;
  for (int i = 0; i < cfg.size; ++i) {
    auto len = in.u64();
    BinaryReader member(in.bytes(len));
    members.push_back(read_estimator(member));
    if (member.remaining() != 0) throw CheckpointError("trailing bytes in member checkpoint");
  }
  if (in.remaining() != 0) throw CheckpointError("trailing bytes in ensemble checkpoint");
  return ValueEnsemble(cfg, std::move(members));
}

void ValueEnsemble::save(const std::string& path) const { write_file(path, serialize()); }

ValueEnsemble ValueEnsemble::load(const std::string& path) { return deserialize(read_file(path)); }

}  // namespace sorb
