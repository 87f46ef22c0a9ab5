#include <cmath>
#include <stdexcept>

#include "lass/fft.hpp"

namespace lass::dsp {

Fft::Fft(size_t n) : n_(n) {
  if (n == 0 || (n & (n - 1)) != 0)
    throw std::invalid_argument("fft: size must be a power of two, got " + std::to_string(n));
  rev_.resize(n);
  size_t bits = 0;
  while ((size_t(1) << bits) < n) ++bits;
  for (size_t i = 0; i < n; ++i) {
    size_t r = 0;
    for (size_t b = 0; b < bits; ++b)
      if (i & (size_t(1) << b)) r |= size_t(1) << (bits - 1 - b);
    rev_[i] = r;
  }
  twiddle_.resize(n / 2);
  const double two_pi = 6.283185307179586476925286766559;
  for (size_t k = 0; k < n / 2; ++k) {
    const double a = -two_pi * static_cast<double>(k) / static_cast<double>(n);
    twiddle_[k] = {std::cos(a), std::sin(a)};
  }
}

void Fft::transform(std::vector<std::complex<double>>& a, bool inv) const {
  if (a.size() != n_)
    throw std::invalid_argument("fft: buffer size " + std::to_string(a.size()) +
                                " != plan size " + std::to_string(n_));
  for (size_t i = 0; i < n_; ++i)
    if (rev_[i] > i) std::swap(a[i], a[rev_[i]]);
  for (size_t len = 2; len <= n_; len <<= 1) {
    const size_t half = len >> 1;
    const size_t stride = n_ / len;
    for (size_t start = 0; start < n_; start += len)
      for (size_t k = 0; k < half; ++k) {
        std::complex<double> w = twiddle_[k * stride];
        if (inv) w = std::conj(w);
        const auto u = a[start + k];
        const auto v = a[start + k + half] * w;
        a[start + k] = u + v;
        a[start + k + half] = u - v;
      }
  }
  if (inv) {
    const double s = 1.0 / static_cast<double>(n_);
    for (auto& x : a) x *= s;
  }
}

void Fft::forward(std::vector<std::complex<double>>& a) const { transform(a, false); }
void Fft::inverse(std::vector<std::complex<double>>& a) const { transform(a, true); }

}  // namespace lass::dsp
