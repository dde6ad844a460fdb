#include "opcert/core/grid.hpp"

#include "opcert/core/error.hpp"

namespace opcert {

GridSpec GridSpec::line(std::size_t n, bool periodic) {
  return GridSpec{{n}, {1.0}, periodic};
}

GridSpec GridSpec::square(std::size_t n, bool periodic) {
  return GridSpec{{n, n}, {1.0, 1.0}, periodic};
}

std::size_t GridSpec::points() const noexcept {
  std::size_t n = resolution.empty() ? 0 : 1;
  for (auto r : resolution) n *= r;
  return n;
}

void GridSpec::validate() const {
  require(dims() == 1 || dims() == 2, ErrorCode::invalid_grid, "grid must be 1D or 2D");
  require(extent.size() == dims(), ErrorCode::invalid_grid, "extent/resolution rank mismatch");
  for (std::size_t d = 0; d < dims(); ++d) {
    require(resolution[d] >= 2, ErrorCode::invalid_grid,
            "resolution must be >= 2 per dimension, got " + std::to_string(resolution[d]));
    require(extent[d] > 0.0, ErrorCode::invalid_grid, "extent must be positive");
  }
}

std::string GridSpec::describe() const {
  std::string s;
  for (std::size_t d = 0; d < dims(); ++d) {
    if (d) s += "x";
    s += std::to_string(resolution[d]);
  }
  return s + (periodic ? " periodic" : "");
}

std::vector<double> axis_coordinates(const GridSpec& grid, std::size_t axis) {
  grid.validate();
  const std::size_t n = grid.resolution.at(axis);
  const double denom = grid.periodic ? static_cast<double>(n) : static_cast<double>(n - 1);
  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = static_cast<double>(i) / denom;
  return c;
}

Tensor normalized_coordinates(const GridSpec& grid) {
  grid.validate();
  const std::size_t dims = grid.dims();
  Tensor out({grid.points(), dims});
  if (dims == 1) {
    auto x = axis_coordinates(grid, 0);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i];
  } else {
    auto x = axis_coordinates(grid, 0);
    auto y = axis_coordinates(grid, 1);
    std::size_t row = 0;
    for (double xi : x)
      for (double yj : y) {
        out[2 * row] = xi;
        out[2 * row + 1] = yj;
        ++row;
      }
  }
  return out;
}

}  // namespace opcert
