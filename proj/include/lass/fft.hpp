#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace lass::dsp {

// Iterative radix-2 FFT with a precomputed plan. Sizes must be powers of two.
class Fft {
 public:
  explicit Fft(size_t n);

  size_t size() const { return n_; }
  void forward(std::vector<std::complex<double>>& a) const;
  // Includes the 1/n factor.
  void inverse(std::vector<std::complex<double>>& a) const;

 private:
  void transform(std::vector<std::complex<double>>& a, bool inv) const;

  size_t n_;
  std::vector<size_t> rev_;
  std::vector<std::complex<double>> twiddle_;  // n/2 forward roots
};

}  // namespace lass::dsp
