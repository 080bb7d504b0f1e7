#include "sorb/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace sorb {

void BinaryWriter::bytes(std::span<const std::uint8_t> data) {
  buf_.insert(buf_.end(), data.begin(), data.end());
}

void BinaryWriter::u8(std::uint8_t v) { buf_.push_back(v); }

void BinaryWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void BinaryWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void BinaryWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::f64s(std::span<const double> values) {
  buf_.reserve(buf_.size() + 8 * values.size());
  for (double v : values) f64(v);
}

void BinaryWriter::str(const std::string& s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.insert(buf_.end(), s.begin(), s.end());
}

std::span<const std::uint8_t> BinaryReader::bytes(std::size_t n) {
  if (remaining() < n) throw CheckpointError("checkpoint truncated");
  auto out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t BinaryReader::u8() { return bytes(1)[0]; }

std::uint32_t BinaryReader::u32() {
  auto b = bytes(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t BinaryReader::u64() {
  auto b = bytes(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

void BinaryReader::f64s(std::span<double> out) {
  for (double& v : out) v = f64();
}

std::string BinaryReader::str() {
  auto n = u32();
  auto b = bytes(n);
  return std::string(b.begin(), b.end());
}

namespace {
constexpr char kMagic[4] = {'S', 'O', 'R', 'B'};
}

void write_estimator(BinaryWriter& out, const ValueEstimator& est) {
  const auto& cfg = est.config();
  out.bytes({reinterpret_cast<const std::uint8_t*>(kMagic), 4});
  out.u32(kCheckpointVersion);
  out.u8(static_cast<std::uint8_t>(cfg.backend));
  out.u8(static_cast<std::uint8_t>(cfg.head));
  out.u8(static_cast<std::uint8_t>(cfg.encoder));
  out.u32(static_cast<std::uint32_t>(cfg.num_bins));
  out.str(est.map_name());
  out.u32(static_cast<std::uint32_t>(cfg.hidden.size()));
  for (int h : cfg.hidden) out.u32(static_cast<std::uint32_t>(h));
  out.f64(cfg.learning_rate);
  out.u32(static_cast<std::uint32_t>(cfg.target_update_period));
  out.f64(cfg.target_update_rate);
  out.u64(est.steps());
  est.save_parameters(out);
}

std::unique_ptr<ValueEstimator> read_estimator(BinaryReader& in) {
  auto magic = in.bytes(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw CheckpointError("bad checkpoint magic");
  if (auto v = in.u32(); v != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(v));
  }
  EstimatorConfig cfg;
  auto backend = in.u8();
  auto head = in.u8();
  auto encoder = in.u8();
  if (backend > 1 || head > 1 || encoder > 2) throw CheckpointError("bad checkpoint tags");
  cfg.backend = static_cast<Backend>(backend);
  cfg.head = static_cast<Head>(head);
  cfg.encoder = static_cast<Encoder>(encoder);
  cfg.num_bins = static_cast<int>(in.u32());
  std::string map_name = in.str();
  cfg.hidden.resize(in.u32());
  for (int& h : cfg.hidden) h = static_cast<int>(in.u32());
  cfg.learning_rate = in.f64();
  cfg.target_update_period = static_cast<int>(in.u32());
  cfg.target_update_rate = in.f64();
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("invalid checkpoint header: ") + e.what());
  }
  std::uint64_t steps = in.u64();
  auto est = make_estimator(cfg, map_name, 0, 0);
  est->load_parameters(in, steps);
  return est;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::string& path, std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw CheckpointError("short write to " + path);
}

}  // namespace sorb
