#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "opcert/core/tensor.hpp"

namespace opcert {

/// Uniform 1D or 2D sampling grid. Periodic grids place point i at i/n of the
/// extent (the right end is identified with the left); non-periodic grids
/// include both end points.
struct GridSpec {
  std::vector<std::size_t> resolution;
  std::vector<double> extent;
  bool periodic = false;

  static GridSpec line(std::size_t n, bool periodic = false);
  static GridSpec square(std::size_t n, bool periodic = false);

  std::size_t dims() const noexcept { return resolution.size(); }
  std::size_t points() const noexcept;
  /// Field shape on this grid, e.g. {n} or {n1, n2}.
  Shape shape() const { return Shape(resolution.begin(), resolution.end()); }

  void validate() const;
  std::string describe() const;

  bool operator==(const GridSpec&) const = default;
};

/// Normalized position in [0,1] of every point along one axis.
std::vector<double> axis_coordinates(const GridSpec& grid, std::size_t axis);

/// (points x dims) coordinates in [0,1]^dims, lexicographic (row-major) order.
Tensor normalized_coordinates(const GridSpec& grid);

}  // namespace opcert
