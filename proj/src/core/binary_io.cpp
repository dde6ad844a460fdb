#include "opcert/core/binary_io.hpp"

#include <bit>
#include <cstring>
#include <vector>

#include "opcert/core/error.hpp"

namespace opcert {
namespace {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

constexpr std::uint64_t kMaxRank = 8;
constexpr std::uint64_t kMaxString = 1 << 20;

}  // namespace

BinaryWriter::BinaryWriter(const std::string& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  require(out_.good(), ErrorCode::io, "cannot open '" + path + "' for writing");
}

void BinaryWriter::bytes(const void* data, std::size_t n) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  require(out_.good(), ErrorCode::io, "write failed on '" + path_ + "'");
}

void BinaryWriter::magic(std::string_view tag) { bytes(tag.data(), tag.size()); }
void BinaryWriter::u8(std::uint8_t v) { bytes(&v, 1); }
void BinaryWriter::u32(std::uint32_t v) { bytes(&v, 4); }
void BinaryWriter::u64(std::uint64_t v) { bytes(&v, 8); }
void BinaryWriter::f64(double v) { bytes(&v, 8); }

void BinaryWriter::string(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  bytes(s.data(), s.size());
}

void BinaryWriter::f64_array(const double* data, std::size_t n) { bytes(data, n * sizeof(double)); }

void BinaryWriter::tensor(const Tensor& t) {
  u32(static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) u64(d);
  f64_array(t.raw(), t.size());
}

void BinaryWriter::record(std::string_view name, const Tensor& t) {
  string(name);
  tensor(t);
}

void BinaryWriter::close() {
  out_.flush();
  require(out_.good(), ErrorCode::io, "flush failed on '" + path_ + "'");
  out_.close();
}

BinaryReader::BinaryReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
  require(in_.good(), ErrorCode::io, "cannot open '" + path + "' for reading");
}

void BinaryReader::bytes(void* data, std::size_t n) {
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  require(static_cast<std::size_t>(in_.gcount()) == n, ErrorCode::io, "truncated file '" + path_ + "'");
}

void BinaryReader::expect_magic(std::string_view tag) {
  std::string got(tag.size(), '\0');
  bytes(got.data(), got.size());
  require(got == tag, ErrorCode::io, "'" + path_ + "' is not a " + std::string(tag) + " file");
}

std::uint8_t BinaryReader::u8() {
  std::uint8_t v;
  bytes(&v, 1);
  return v;
}

std::uint32_t BinaryReader::u32() {
  std::uint32_t v;
  bytes(&v, 4);
  return v;
}

std::uint64_t BinaryReader::u64() {
  std::uint64_t v;
  bytes(&v, 8);
  return v;
}

double BinaryReader::f64() {
  double v;
  bytes(&v, 8);
  return v;
}

std::string BinaryReader::string() {
  const std::uint32_t n = u32();
  require(n <= kMaxString, ErrorCode::io, "corrupt string length in '" + path_ + "'");
  std::string s(n, '\0');
  bytes(s.data(), n);
  return s;
}

void BinaryReader::f64_array(double* data, std::size_t n) { bytes(data, n * sizeof(double)); }

Tensor BinaryReader::tensor() {
  const std::uint32_t rank = u32();
  require(rank >= 1 && rank <= kMaxRank, ErrorCode::io, "corrupt tensor rank in '" + path_ + "'");
  Shape shape(rank);
  std::uint64_t total = 1;
  for (auto& d : shape) {
    d = u64();
    require(d >= 1 && d < (std::uint64_t{1} << 32), ErrorCode::io, "corrupt tensor extent in '" + path_ + "'");
    total *= d;
    require(total < (std::uint64_t{1} << 34), ErrorCode::io, "tensor too large in '" + path_ + "'");
  }
  Tensor t(shape);
  f64_array(t.raw(), t.size());
  return t;
}

Tensor BinaryReader::record(std::string_view expected_name) {
  const std::string name = string();
  require(name == expected_name, ErrorCode::io,
          "'" + path_ + "': expected record '" + std::string(expected_name) + "', found '" + name + "'");
  return tensor();
}

bool BinaryReader::at_end() { return in_.peek() == std::char_traits<char>::eof(); }

void write_grid(BinaryWriter& w, const GridSpec& grid) {
  w.u32(static_cast<std::uint32_t>(grid.dims()));
  for (std::size_t d = 0; d < grid.dims(); ++d) {
    w.u64(grid.resolution[d]);
    w.f64(grid.extent[d]);
  }
  w.u8(grid.periodic ? 1 : 0);
}

GridSpec read_grid(BinaryReader& r) {
  GridSpec grid;
  const std::uint32_t dims = r.u32();
  require(dims >= 1 && dims <= 2, ErrorCode::io, "corrupt grid block in '" + r.path() + "'");
  for (std::uint32_t d = 0; d < dims; ++d) {
    grid.resolution.push_back(r.u64());
    grid.extent.push_back(r.f64());
  }
  grid.periodic = r.u8() != 0;
  grid.validate();
  return grid;
}

}  // namespace opcert
