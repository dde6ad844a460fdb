#include "opcert/core/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "opcert/core/error.hpp"

namespace opcert {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

static void check_extents(const Shape& shape) {
  require(!shape.empty(), ErrorCode::shape_mismatch, "tensor shape must have rank >= 1");
  for (auto extent : shape)
    require(extent > 0, ErrorCode::shape_mismatch,
            "tensor extents must be positive, got " + shape_string(shape));
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_extents(shape_);
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_extents(shape_);
  require(data_.size() == shape_size(shape_), ErrorCode::shape_mismatch,
          "data length " + std::to_string(data_.size()) + " does not match shape " +
              shape_string(shape_));
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> index) const {
  require(index.size() == shape_.size(), ErrorCode::shape_mismatch, "index rank mismatch");
  std::size_t off = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    require(i < shape_[axis], ErrorCode::shape_mismatch, "index out of range");
    off = off * shape_[axis] + i;
    ++axis;
  }
  return off;
}

double& Tensor::at(std::initializer_list<std::size_t> index) { return data_[offset(index)]; }
double Tensor::at(std::initializer_list<std::size_t> index) const { return data_[offset(index)]; }

Tensor Tensor::reshaped(Shape shape) const& {
  Tensor copy = *this;
  return std::move(copy).reshaped(std::move(shape));
}

Tensor Tensor::reshaped(Shape shape) && {
  check_extents(shape);
  require(shape_size(shape) == data_.size(), ErrorCode::shape_mismatch,
          "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  shape_ = std::move(shape);
  return std::move(*this);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

void check_same_shape(const Tensor& a, const Tensor& b, const char* context) {
  if (a.shape() != b.shape())
    fail(ErrorCode::shape_mismatch, std::string(context) + ": " + shape_string(a.shape()) +
                                        " vs " + shape_string(b.shape()));
}

Tensor& Tensor::operator+=(const Tensor& other) {
  check_same_shape(*this, other, "add");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
  check_same_shape(*this, other, "sub");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(const Tensor& other) {
  check_same_shape(*this, other, "mul");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] *= other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double factor) {
  for (auto& v : data_) v *= factor;
  return *this;
}

Tensor& Tensor::operator+=(double offset) {
  for (auto& v : data_) v += offset;
  return *this;
}

Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
Tensor operator*(Tensor a, const Tensor& b) { return a *= b; }
Tensor operator*(Tensor a, double factor) { return a *= factor; }
Tensor operator*(double factor, Tensor a) { return a *= factor; }

double dot(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "dot");
  return std::inner_product(a.raw(), a.raw() + a.size(), b.raw(), 0.0);
}

double sum(const Tensor& a) { return std::accumulate(a.raw(), a.raw() + a.size(), 0.0); }

double norm2(const Tensor& a) { return std::sqrt(dot(a, a)); }

double max_abs(const Tensor& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

bool all_finite(const Tensor& a) {
  return std::all_of(a.data().begin(), a.data().end(), [](double v) { return std::isfinite(v); });
}

Tensor take_leading(const Tensor& a, std::size_t index) {
  require(a.rank() >= 2, ErrorCode::shape_mismatch, "take_leading needs rank >= 2");
  require(index < a.dim(0), ErrorCode::shape_mismatch, "take_leading index out of range");
  Shape inner(a.shape().begin() + 1, a.shape().end());
  const std::size_t n = shape_size(inner);
  std::vector<double> out(a.raw() + index * n, a.raw() + (index + 1) * n);
  return Tensor(std::move(inner), std::move(out));
}

Tensor stack(std::span<const Tensor> parts) {
  require(!parts.empty(), ErrorCode::shape_mismatch, "stack of zero tensors");
  Shape shape = parts.front().shape();
  std::vector<double> out;
  out.reserve(parts.size() * parts.front().size());
  for (const auto& p : parts) {
    check_same_shape(p, parts.front(), "stack");
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  shape.insert(shape.begin(), parts.size());
  return Tensor(std::move(shape), std::move(out));
}

}  // namespace opcert
