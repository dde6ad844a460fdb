#pragma once

#include <complex>
#include <cstddef>

namespace opcert::datagen {

/// Real-to-complex FFT pair of length n with FFTW-owned aligned buffers.
/// Coefficient convention: u_j = sum_k c_k exp(2 pi i j k / n) over the
/// n/2 + 1 stored non-negative wavenumbers (Hermitian symmetry implied).
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const noexcept { return n_; }
  std::size_t modes() const noexcept { return n_ / 2 + 1; }

  double* real() noexcept { return real_; }
  std::complex<double>* spectrum() noexcept { return spectrum_; }

  /// real() -> spectrum(), divided by n so the convention above holds.
  void forward();
  /// spectrum() -> real(); spectrum() is clobbered.
  void inverse();

 private:
  std::size_t n_;
  double* real_;
  std::complex<double>* spectrum_;
  void* forward_plan_;
  void* inverse_plan_;
};

}  // namespace opcert::datagen
