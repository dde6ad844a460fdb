#include "opcert/datagen/fft.hpp"

#include <fftw3.h>

#include <mutex>

#include "opcert/core/error.hpp"

namespace opcert::datagen {
namespace {

// FFTW planning is not thread-safe; execution on distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

RealFft::RealFft(std::size_t n) : n_(n) {
  require(n >= 2, ErrorCode::invalid_argument, "FFT length must be >= 2");
  std::lock_guard lock(planner_mutex());
  real_ = static_cast<double*>(fftw_malloc(sizeof(double) * n));
  spectrum_ = reinterpret_cast<std::complex<double>*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)));
  require(real_ != nullptr && spectrum_ != nullptr, ErrorCode::numerical, "FFT buffer allocation failed");
  auto* spec = reinterpret_cast<fftw_complex*>(spectrum_);
  const int len = static_cast<int>(n);
  forward_plan_ = fftw_plan_dft_r2c_1d(len, real_, spec, FFTW_ESTIMATE);
  inverse_plan_ = fftw_plan_dft_c2r_1d(len, spec, real_, FFTW_ESTIMATE);
}

RealFft::~RealFft() {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
  fftw_free(real_);
  fftw_free(spectrum_);
}

void RealFft::forward() {
  fftw_execute(static_cast<fftw_plan>(forward_plan_));
  const double inv = 1.0 / static_cast<double>(n_);
  for (std::size_t k = 0; k < modes(); ++k) spectrum_[k] *= inv;
}

void RealFft::inverse() { fftw_execute(static_cast<fftw_plan>(inverse_plan_)); }

}  // namespace opcert::datagen
