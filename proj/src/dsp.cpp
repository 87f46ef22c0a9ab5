#include <cmath>
#include <stdexcept>

#include "lass/dsp.hpp"
#include "lass/fft.hpp"

namespace lass::dsp {

namespace {

std::vector<double> periodic_hann(size_t n) {
  std::vector<double> w(n);
  const double two_pi = 6.283185307179586476925286766559;
  for (size_t i = 0; i < n; ++i)
    w[i] = 0.5 * (1.0 - std::cos(two_pi * static_cast<double>(i) / static_cast<double>(n)));
  return w;
}

// Symmetric reflection without edge repeat; collapses to 0 for length-1 input.
size_t reflect_index(long long i, size_t len) {
  if (len == 1) return 0;
  const long long period = 2 * (static_cast<long long>(len) - 1);
  long long m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<long long>(len)) m = period - m;
  return static_cast<size_t>(m);
}

}  // namespace

ComplexSpectrogram stft(const Waveform& x, size_t frame, size_t hop) {
  if (x.samples.empty()) throw std::invalid_argument("stft: empty signal");
  if (frame == 0 || hop == 0 || frame % 2 != 0)
    throw std::invalid_argument("stft: frame must be even and hop positive");

  const size_t n = x.samples.size();
  const size_t half = frame / 2;
  const size_t T = n / hop + 1;
  const size_t F = frame / 2 + 1;
  const auto window = periodic_hann(frame);

  ComplexSpectrogram spec;
  spec.frame_size = frame;
  spec.hop_size = hop;
  spec.sample_count = n;
  spec.sample_rate = x.sample_rate;
  spec.magnitude.assign(F * T, 0.0);
  spec.phase.assign(F * T, 0.0);

  Fft fft(frame);
  std::vector<std::complex<double>> buf(frame);
  for (size_t t = 0; t < T; ++t) {
    const long long start = static_cast<long long>(t * hop) - static_cast<long long>(half);
    for (size_t i = 0; i < frame; ++i) {
      const long long src = start + static_cast<long long>(i);
      const double v = (src >= 0 && src < static_cast<long long>(n))
                           ? x.samples[static_cast<size_t>(src)]
                           : x.samples[reflect_index(src, n)];
      buf[i] = {v * window[i], 0.0};
    }
    fft.forward(buf);
    for (size_t f = 0; f < F; ++f) {
      spec.magnitude[f * T + t] = std::abs(buf[f]);
      spec.phase[f * T + t] = std::arg(buf[f]);
    }
  }
  return spec;
}

Waveform istft(const ComplexSpectrogram& spec) {
  const size_t frame = spec.frame_size, hop = spec.hop_size;
  if (frame == 0 || hop == 0 || frame % 2 != 0 || hop > frame)
    throw std::invalid_argument("istft: inconsistent frame/hop metadata");
  const size_t F = spec.bins(), T = spec.frames();
  if (spec.magnitude.size() != F * T || spec.phase.size() != F * T)
    throw std::invalid_argument("istft: spectrogram buffers do not match declared shape");

  const size_t half = frame / 2;
  const size_t padded_len = spec.sample_count + frame;
  const auto window = periodic_hann(frame);

  std::vector<double> acc(padded_len, 0.0);
  std::vector<double> norm(padded_len, 0.0);
  Fft fft(frame);
  std::vector<std::complex<double>> buf(frame);
  for (size_t t = 0; t < T; ++t) {
    for (size_t f = 0; f < F; ++f) {
      const double m = spec.magnitude[f * T + t];
      const double p = spec.phase[f * T + t];
      buf[f] = std::polar(m, p);
    }
    for (size_t f = F; f < frame; ++f) buf[f] = std::conj(buf[frame - f]);
    fft.inverse(buf);
    const size_t start = t * hop;  // offset in the padded domain
    for (size_t i = 0; i < frame && start + i < padded_len; ++i) {
      acc[start + i] += buf[i].real() * window[i];
      norm[start + i] += window[i] * window[i];
    }
  }

  Waveform out;
  out.sample_rate = spec.sample_rate;
  out.samples.resize(spec.sample_count);
  for (size_t j = 0; j < spec.sample_count; ++j) {
    const double d = norm[j + half];
    out.samples[j] = d > 0.0 ? acc[j + half] / d : 0.0;
  }
  return out;
}

ComplexSpectrogram apply_mask(const Mask& m, const ComplexSpectrogram& spec) {
  const size_t F = spec.bins(), T = spec.frames();
  if (m.bins != F || m.frames != T)
    throw std::invalid_argument("apply_mask: mask " + std::to_string(m.bins) + "x" +
                                std::to_string(m.frames) + " does not match spectrogram " +
                                std::to_string(F) + "x" + std::to_string(T));
  for (double v : m.values)
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument("apply_mask: mask value " + std::to_string(v) +
                                  " outside [0, 1]");
  ComplexSpectrogram out = spec;
  for (size_t i = 0; i < out.magnitude.size(); ++i) out.magnitude[i] *= m.values[i];
  return out;
}

}  // namespace lass::dsp
