#pragma once

#include <string>

#include "lass/dsp.hpp"

namespace lass::dsp {

enum class WavFormat { Pcm16, Float32 };

// Reads RIFF PCM 16-bit or IEEE float 32-bit; stereo is downmixed by
// averaging. Anything else is rejected. The caller checks the sample rate:
// there is no resampler.
Waveform read_wav(const std::string& path);

void write_wav(const std::string& path, const Waveform& w,
               WavFormat format = WavFormat::Float32);

}  // namespace lass::dsp
