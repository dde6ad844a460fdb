#include "opcert/wavelet/dwt.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "opcert/core/error.hpp"

namespace opcert::wavelet {

namespace {

// Daubechies scaling coefficients (reconstruction low-pass), 4 and 6
// vanishing moments.
constexpr std::array<double, 8> kDb4 = {
    0.2303778133088965,   0.7148465705529157,  0.6308807679298589,  -0.027983769416859854,
    -0.18703481171909309, 0.030841381835560764, 0.0328830116668852, -0.010597401785069032};

constexpr std::array<double, 12> kDb6 = {
    0.11154074335010947,   0.49462389039845306,   0.7511339080210954,   0.31525035170919763,
    -0.22626469396543983,  -0.12976686756726194,  0.09750160558732304,  0.027522865530305727,
    -0.03158203931748603,  0.0005538422011614961, 0.004777257510945511, -0.0010773010853084796};

Filter make_filter(Family family, std::span<const double> h) {
  Filter f;
  f.family = family;
  const std::size_t L = h.size();
  f.rec_lo.assign(h.begin(), h.end());
  f.rec_hi.resize(L);
  for (std::size_t j = 0; j < L; ++j)
    f.rec_hi[j] = ((j % 2) ? -1.0 : 1.0) * h[L - 1 - j];
  f.dec_lo.assign(f.rec_lo.rbegin(), f.rec_lo.rend());
  f.dec_hi.assign(f.rec_hi.rbegin(), f.rec_hi.rend());

  // Orthonormality: sum h[j] h[j + 2m] = delta_m, sum h = sqrt 2.
  for (std::size_t shift = 0; shift < L; shift += 2) {
    double acc = 0.0;
    for (std::size_t j = 0; j + shift < L; ++j) acc += h[j] * h[j + shift];
    const double expected = shift == 0 ? 1.0 : 0.0;
    require(std::abs(acc - expected) < 1e-10, ErrorCode::invalid_argument,
            "wavelet filter " + family_name(family) + " is not orthonormal");
  }
  double total = 0.0;
  for (double v : h) total += v;
  require(std::abs(total - std::sqrt(2.0)) < 1e-10, ErrorCode::invalid_argument,
          "wavelet filter " + family_name(family) + " does not sum to sqrt 2");
  return f;
}

void check_levels(std::size_t n, std::size_t levels, const char* what) {
  require(levels >= 1, ErrorCode::decomposition_depth, std::string(what) + ": levels must be >= 1");
  require(levels < 63 && (n % (std::size_t{1} << levels)) == 0, ErrorCode::decomposition_depth,
          std::string(what) + ": length " + std::to_string(n) + " not divisible by 2^" +
              std::to_string(levels));
}

}  // namespace

Family parse_family(const std::string& name) {
  if (name == "db4") return Family::db4;
  if (name == "db6") return Family::db6;
  fail(ErrorCode::invalid_argument, "unknown wavelet family '" + name + "'");
}

std::string family_name(Family family) { return family == Family::db4 ? "db4" : "db6"; }

const Filter& filter(Family family) {
  static const Filter db4 = make_filter(Family::db4, kDb4);
  static const Filter db6 = make_filter(Family::db6, kDb6);
  return family == Family::db4 ? db4 : db6;
}

std::size_t DwtCoefficients::coefficient_count() const noexcept {
  std::size_t n = approx.size();
  for (const auto& d : details) n += d.size();
  return n;
}

std::size_t padded_extent(std::size_t n, std::size_t levels) {
  const std::size_t block = std::size_t{1} << levels;
  return (n + block - 1) / block * block;
}

std::size_t reflect_index(std::size_t p, std::size_t n) noexcept {
  const std::size_t r = p % (2 * n);
  return r < n ? r : 2 * n - 1 - r;
}

void analysis_step(std::span<const double> in, std::span<double> lo, std::span<double> hi,
                   const Filter& filter) {
  const std::size_t n = in.size();
  const std::size_t half = n / 2;
  const std::size_t L = filter.taps();
  const double* h = filter.rec_lo.data();
  const double* g = filter.rec_hi.data();
  for (std::size_t k = 0; k < half; ++k) {
    double a = 0.0, d = 0.0;
    const std::size_t base = 2 * k;
    if (base + L <= n) {
      const double* x = in.data() + base;
      for (std::size_t j = 0; j < L; ++j) {
        a += h[j] * x[j];
        d += g[j] * x[j];
      }
    } else {
      for (std::size_t j = 0; j < L; ++j) {
        const double v = in[(base + j) % n];
        a += h[j] * v;
        d += g[j] * v;
      }
    }
    lo[k] = a;
    hi[k] = d;
  }
}

void synthesis_step(std::span<const double> lo, std::span<const double> hi, std::span<double> out,
                    const Filter& filter) {
  const std::size_t n = out.size();
  const std::size_t half = n / 2;
  const std::size_t L = filter.taps();
  const double* h = filter.rec_lo.data();
  const double* g = filter.rec_hi.data();
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t k = 0; k < half; ++k) {
    const double a = lo[k], d = hi[k];
    const std::size_t base = 2 * k;
    if (base + L <= n) {
      double* x = out.data() + base;
      for (std::size_t j = 0; j < L; ++j) x[j] += h[j] * a + g[j] * d;
    } else {
      for (std::size_t j = 0; j < L; ++j) out[(base + j) % n] += h[j] * a + g[j] * d;
    }
  }
}

void forward_packed(std::span<double> x, const Filter& filter, std::size_t levels,
                    std::span<double> work) {
  std::size_t len = x.size();
  for (std::size_t level = 0; level < levels; ++level) {
    const std::size_t half = len / 2;
    analysis_step(x.first(len), work.first(half), work.subspan(half, half), filter);
    std::copy_n(work.data(), len, x.data());
    len = half;
  }
}

void inverse_packed(std::span<double> x, const Filter& filter, std::size_t levels,
                    std::span<double> work) {
  std::size_t len = x.size() >> (levels - 1);
  for (std::size_t level = 0; level < levels; ++level) {
    const std::size_t half = len / 2;
    synthesis_step(x.first(half), x.subspan(half, half), work.first(len), filter);
    std::copy_n(work.data(), len, x.data());
    len *= 2;
  }
}

void forward_packed_2d(std::span<double> x, std::size_t rows, std::size_t cols, const Filter& filter,
                       std::size_t levels, std::span<double> work) {
  const std::size_t stride = cols;
  std::size_t r = rows, c = cols;
  auto line = work.first(std::max(rows, cols));
  auto scratch = work.subspan(std::max(rows, cols), std::max(rows, cols));
  for (std::size_t level = 0; level < levels; ++level) {
    for (std::size_t i = 0; i < r; ++i) {
      double* row = x.data() + i * stride;
      analysis_step({row, c}, scratch.first(c / 2), scratch.subspan(c / 2, c / 2), filter);
      std::copy_n(scratch.data(), c, row);
    }
    for (std::size_t j = 0; j < c; ++j) {
      for (std::size_t i = 0; i < r; ++i) line[i] = x[i * stride + j];
      analysis_step(line.first(r), scratch.first(r / 2), scratch.subspan(r / 2, r / 2), filter);
      for (std::size_t i = 0; i < r; ++i) x[i * stride + j] = scratch[i];
    }
    r /= 2;
    c /= 2;
  }
}

void inverse_packed_2d(std::span<double> x, std::size_t rows, std::size_t cols, const Filter& filter,
                       std::size_t levels, std::span<double> work) {
  const std::size_t stride = cols;
  std::size_t r = rows >> (levels - 1), c = cols >> (levels - 1);
  auto line = work.first(std::max(rows, cols));
  auto scratch = work.subspan(std::max(rows, cols), std::max(rows, cols));
  for (std::size_t level = 0; level < levels; ++level) {
    for (std::size_t j = 0; j < c; ++j) {
      for (std::size_t i = 0; i < r; ++i) line[i] = x[i * stride + j];
      synthesis_step(line.first(r / 2), line.subspan(r / 2, r / 2), scratch.first(r), filter);
      for (std::size_t i = 0; i < r; ++i) x[i * stride + j] = scratch[i];
    }
    for (std::size_t i = 0; i < r; ++i) {
      double* row = x.data() + i * stride;
      synthesis_step({row, c / 2}, {row + c / 2, c / 2}, scratch.first(c), filter);
      std::copy_n(scratch.data(), c, row);
    }
    r *= 2;
    c *= 2;
  }
}

DwtCoefficients dwt_multilevel(const Tensor& signal, const Filter& filter, std::size_t levels,
                               Padding padding) {
  require(signal.rank() == 1, ErrorCode::shape_mismatch, "dwt_multilevel expects a 1D signal");
  const std::size_t n = signal.size();
  const std::size_t padded = padding == Padding::none ? n : padded_extent(n, levels);
  check_levels(padded, levels, "dwt_multilevel");

  std::vector<double> x(padded);
  for (std::size_t i = 0; i < padded; ++i) x[i] = signal[reflect_index(i, n)];
  std::vector<double> work(padded);
  forward_packed(x, filter, levels, work);

  DwtCoefficients out;
  out.family = filter.family;
  out.original_length = n;
  out.padded_length = padded;
  const std::size_t coarse = padded >> levels;
  out.approx.assign(x.begin(), x.begin() + coarse);
  out.details.resize(levels);
  for (std::size_t k = 1; k <= levels; ++k) {
    const std::size_t len = padded >> k;
    out.details[k - 1].assign(x.begin() + len, x.begin() + 2 * len);
  }
  return out;
}

Tensor idwt_multilevel(const DwtCoefficients& coeffs, const Filter& filter) {
  const std::size_t levels = coeffs.levels();
  const std::size_t padded = coeffs.padded_length;
  require(levels >= 1, ErrorCode::invalid_coefficients, "no detail levels");
  require(coeffs.original_length >= 1 && coeffs.original_length <= padded,
          ErrorCode::invalid_coefficients, "inconsistent original length");
  require(padded % (std::size_t{1} << levels) == 0 && coeffs.approx.size() == (padded >> levels),
          ErrorCode::invalid_coefficients, "approximation length mismatch");
  for (std::size_t k = 1; k <= levels; ++k)
    require(coeffs.details[k - 1].size() == (padded >> k), ErrorCode::invalid_coefficients,
            "detail length mismatch at level " + std::to_string(k));

  std::vector<double> x(padded);
  std::copy(coeffs.approx.begin(), coeffs.approx.end(), x.begin());
  for (std::size_t k = 1; k <= levels; ++k) {
    const std::size_t len = padded >> k;
    std::copy(coeffs.details[k - 1].begin(), coeffs.details[k - 1].end(), x.begin() + len);
  }
  std::vector<double> work(padded);
  inverse_packed(x, filter, levels, work);
  x.resize(coeffs.original_length);
  return Tensor({coeffs.original_length}, std::move(x));
}

namespace {

Tensor copy_block(const std::vector<double>& x, std::size_t stride, std::size_t r0, std::size_t c0,
                  std::size_t r, std::size_t c) {
  Tensor t({r, c});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) t[i * c + j] = x[(r0 + i) * stride + c0 + j];
  return t;
}

void put_block(std::vector<double>& x, std::size_t stride, std::size_t r0, std::size_t c0,
               const Tensor& t, std::size_t r, std::size_t c) {
  require(t.rank() == 2 && t.dim(0) == r && t.dim(1) == c, ErrorCode::invalid_coefficients,
          "subband shape mismatch");
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) x[(r0 + i) * stride + c0 + j] = t[i * c + j];
}

}  // namespace

Dwt2dCoefficients dwt2d_multilevel(const Tensor& field, const Filter& filter, std::size_t levels,
                                   Padding padding) {
  require(field.rank() == 2, ErrorCode::shape_mismatch, "dwt2d_multilevel expects a 2D field");
  const std::size_t rows = field.dim(0), cols = field.dim(1);
  const std::size_t pr = padding == Padding::none ? rows : padded_extent(rows, levels);
  const std::size_t pc = padding == Padding::none ? cols : padded_extent(cols, levels);
  check_levels(pr, levels, "dwt2d_multilevel rows");
  check_levels(pc, levels, "dwt2d_multilevel cols");

  std::vector<double> x(pr * pc);
  for (std::size_t i = 0; i < pr; ++i)
    for (std::size_t j = 0; j < pc; ++j)
      x[i * pc + j] = field[reflect_index(i, rows) * cols + reflect_index(j, cols)];
  std::vector<double> work(2 * std::max(pr, pc));
  forward_packed_2d(x, pr, pc, filter, levels, work);

  Dwt2dCoefficients out;
  out.family = filter.family;
  out.rows = rows;
  out.cols = cols;
  out.padded_rows = pr;
  out.padded_cols = pc;
  out.approx = copy_block(x, pc, 0, 0, pr >> levels, pc >> levels);
  out.details.resize(levels);
  for (std::size_t k = 1; k <= levels; ++k) {
    const std::size_t r = pr >> k, c = pc >> k;
    out.details[k - 1].horizontal = copy_block(x, pc, r, 0, r, c);
    out.details[k - 1].vertical = copy_block(x, pc, 0, c, r, c);
    out.details[k - 1].diagonal = copy_block(x, pc, r, c, r, c);
  }
  return out;
}

Tensor idwt2d_multilevel(const Dwt2dCoefficients& coeffs, const Filter& filter) {
  const std::size_t levels = coeffs.levels();
  require(levels >= 1, ErrorCode::invalid_coefficients, "no detail levels");
  const std::size_t pr = coeffs.padded_rows, pc = coeffs.padded_cols;
  require(pr % (std::size_t{1} << levels) == 0 && pc % (std::size_t{1} << levels) == 0,
          ErrorCode::invalid_coefficients, "padded extent not divisible by 2^levels");
  require(coeffs.rows >= 1 && coeffs.rows <= pr && coeffs.cols >= 1 && coeffs.cols <= pc,
          ErrorCode::invalid_coefficients, "inconsistent original extent");

  std::vector<double> x(pr * pc);
  put_block(x, pc, 0, 0, coeffs.approx, pr >> levels, pc >> levels);
  for (std::size_t k = 1; k <= levels; ++k) {
    const std::size_t r = pr >> k, c = pc >> k;
    put_block(x, pc, r, 0, coeffs.details[k - 1].horizontal, r, c);
    put_block(x, pc, 0, c, coeffs.details[k - 1].vertical, r, c);
    put_block(x, pc, r, c, coeffs.details[k - 1].diagonal, r, c);
  }
  std::vector<double> work(2 * std::max(pr, pc));
  inverse_packed_2d(x, pr, pc, filter, levels, work);

  Tensor out({coeffs.rows, coeffs.cols});
  for (std::size_t i = 0; i < coeffs.rows; ++i)
    for (std::size_t j = 0; j < coeffs.cols; ++j) out[i * coeffs.cols + j] = x[i * pc + j];
  return out;
}

}  // namespace opcert::wavelet
