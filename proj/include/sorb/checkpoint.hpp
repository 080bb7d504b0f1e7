#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sorb/estimator.hpp"

namespace sorb {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Little-endian byte sink.
class BinaryWriter {
 public:
  void bytes(std::span<const std::uint8_t> data);
  void u8(std::uint8_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void f64s(std::span<const double> values);
  void str(const std::string& s);

  const std::vector<std::uint8_t>& buffer() const { return buf_; }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::span<const std::uint8_t> bytes(std::size_t n);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  void f64s(std::span<double> out);
  std::string str();

  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Single-estimator checkpoint:
//   "SORB" | u32 version | u8 backend | u8 head | u8 encoder | u32 N |
//   str map_name | u32 hidden_count | u32 hidden[...] | f64 learning_rate |
//   u32 target_update_period | f64 target_update_rate | u64 steps |
//   backend parameter payload (see the estimator implementations).
void write_estimator(BinaryWriter& out, const ValueEstimator& est);
std::unique_ptr<ValueEstimator> read_estimator(BinaryReader& in);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> data);

}  // namespace sorb
