#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>

#include "opcert/core/grid.hpp"
#include "opcert/core/tensor.hpp"

namespace opcert {

/// Little-endian binary writer over a file. Every failure raises ErrorCode::io.
class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path);

  void magic(std::string_view tag);
  void u8(std::uint8_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void string(std::string_view s);
  void f64_array(const double* data, std::size_t n);
  /// rank u32, dims u64, payload f64.
  void tensor(const Tensor& t);
  /// name, then tensor.
  void record(std::string_view name, const Tensor& t);
  void close();

 private:
  void bytes(const void* data, std::size_t n);

  std::string path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path);

  /// Fails unless the next bytes equal `tag`.
  void expect_magic(std::string_view tag);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string string();
  void f64_array(double* data, std::size_t n);
  Tensor tensor();
  /// Reads a record and checks its name.
  Tensor record(std::string_view expected_name);
  bool at_end();

  const std::string& path() const noexcept { return path_; }

 private:
  void bytes(void* data, std::size_t n);

  std::string path_;
  std::ifstream in_;
};

void write_grid(BinaryWriter& w, const GridSpec& grid);
GridSpec read_grid(BinaryReader& r);

}  // namespace opcert
