#pragma once

#include <cstddef>
#include <vector>

namespace lass::dsp {

inline constexpr int kCanonicalSampleRate = 32000;

struct Waveform {
  std::vector<double> samples;
  int sample_rate = kCanonicalSampleRate;

  size_t size() const { return samples.size(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// One-sided STFT grid: magnitude and phase are [F, T] row-major with
// F = frame/2 + 1 and centered frames, T = floor(samples/hop) + 1.
struct ComplexSpectrogram {
  size_t frame_size = 1024;
  size_t hop_size = 512;
  size_t sample_count = 0;
  int sample_rate = kCanonicalSampleRate;
  std::vector<double> magnitude;
  std::vector<double> phase;

  size_t bins() const { return frame_size / 2 + 1; }
  size_t frames() const { return sample_count / hop_size + 1; }

  double& mag(size_t f, size_t t) { return magnitude[f * frames() + t]; }
  double mag(size_t f, size_t t) const { return magnitude[f * frames() + t]; }
};

struct Mask {
  size_t bins = 0;
  size_t frames = 0;
  std::vector<double> values;  // [F, T] row-major, every entry in [0, 1]

  static Mask ones(size_t bins, size_t frames) {
    return Mask{bins, frames, std::vector<double>(bins * frames, 1.0)};
  }
};

// Periodic-Hann analysis with reflect padding of frame/2 on each side.
ComplexSpectrogram stft(const Waveform& x, size_t frame = 1024, size_t hop = 512);

// Windowed overlap-add with squared-window normalization; output trimmed to
// the stored sample_count. Exact inverse of stft to roundoff.
Waveform istft(const ComplexSpectrogram& spec);

// magnitude' = mask (Hadamard) magnitude; phase is reused untouched.
ComplexSpectrogram apply_mask(const Mask& m, const ComplexSpectrogram& spec);

}  // namespace lass::dsp
