#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "opcert/core/tensor.hpp"

namespace opcert::wavelet {

enum class Family { db4, db6 };

Family parse_family(const std::string& name);
std::string family_name(Family family);

/// Orthonormal Daubechies filter bank. `rec_lo` holds the scaling
/// coefficients h[0..L-1] (sum sqrt 2); decomposition filters are the time
/// reversals of the reconstruction filters.
struct Filter {
  Family family;
  std::vector<double> dec_lo, dec_hi, rec_lo, rec_hi;

  std::size_t taps() const noexcept { return rec_lo.size(); }
  std::size_t vanishing_moments() const noexcept { return rec_lo.size() / 2; }
};

/// Process-wide filter table; orthonormality is checked on first access.
const Filter& filter(Family family);

enum class Padding {
  none,       ///< length must be divisible by 2^levels
  symmetric,  ///< mirror-extend on the right to the next multiple of 2^levels
};

/// Multilevel coefficients of a 1D signal (periodic boundary).
struct DwtCoefficients {
  Family family = Family::db4;
  std::vector<double> approx;                ///< coarsest approximation, length padded/2^m
  std::vector<std::vector<double>> details;  ///< details[k-1] is level k (finest first)
  std::size_t original_length = 0;           ///< before padding
  std::size_t padded_length = 0;

  std::size_t levels() const noexcept { return details.size(); }
  std::size_t pad_width() const noexcept { return padded_length - original_length; }
  std::size_t coefficient_count() const noexcept;
};

DwtCoefficients dwt_multilevel(const Tensor& signal, const Filter& filter, std::size_t levels,
                               Padding padding = Padding::none);
Tensor idwt_multilevel(const DwtCoefficients& coeffs, const Filter& filter);

/// One level of 2D detail subbands, each (rows/2^k) x (cols/2^k).
struct DetailBands {
  Tensor horizontal;  ///< low-pass along rows' axis, high-pass along columns
  Tensor vertical;
  Tensor diagonal;
};

struct Dwt2dCoefficients {
  Family family = Family::db4;
  Tensor approx;
  std::vector<DetailBands> details;  ///< details[k-1] is level k
  std::size_t rows = 0, cols = 0;
  std::size_t padded_rows = 0, padded_cols = 0;

  std::size_t levels() const noexcept { return details.size(); }
};

Dwt2dCoefficients dwt2d_multilevel(const Tensor& field, const Filter& filter, std::size_t levels,
                                   Padding padding = Padding::none);
Tensor idwt2d_multilevel(const Dwt2dCoefficients& coeffs, const Filter& filter);

// ---------------------------------------------------------------------------
// Packed in-place kernels. A packed 1D buffer of length n holds
// [a_m | d_m | d_{m-1} | ... | d_1]; a packed 2D buffer holds the usual Mallat
// quadrant layout with the approximation in the top-left corner.

/// Smallest multiple of 2^levels that is >= n.
std::size_t padded_extent(std::size_t n, std::size_t levels);

/// Source index of position p in a half-sample symmetric extension of length n.
std::size_t reflect_index(std::size_t p, std::size_t n) noexcept;

void analysis_step(std::span<const double> in, std::span<double> lo, std::span<double> hi,
                   const Filter& filter);
void synthesis_step(std::span<const double> lo, std::span<const double> hi, std::span<double> out,
                    const Filter& filter);

/// `work` must hold at least n doubles.
void forward_packed(std::span<double> x, const Filter& filter, std::size_t levels,
                    std::span<double> work);
void inverse_packed(std::span<double> x, const Filter& filter, std::size_t levels,
                    std::span<double> work);

/// `work` must hold at least 2 * max(rows, cols) doubles.
void forward_packed_2d(std::span<double> x, std::size_t rows, std::size_t cols, const Filter& filter,
                       std::size_t levels, std::span<double> work);
void inverse_packed_2d(std::span<double> x, std::size_t rows, std::size_t cols, const Filter& filter,
                       std::size_t levels, std::span<double> work);

}  // namespace opcert::wavelet
