#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "lass/wav_io.hpp"

namespace lass::dsp {

namespace {

// Little-endian scalar helpers; the on-disk format is little-endian RIFF.
template <typename T>
T read_le(std::istream& in) {
  unsigned char b[sizeof(T)];
  in.read(reinterpret_cast<char*>(b), sizeof(T));
  uint64_t v = 0;
  for (size_t i = sizeof(T); i-- > 0;) v = (v << 8) | b[i];
  T out;
  std::memcpy(&out, &v, sizeof(T));
  return out;
}

template <typename T>
void write_le(std::ostream& out, T v) {
  uint64_t u = 0;
  std::memcpy(&u, &v, sizeof(T));
  unsigned char b[sizeof(T)];
  for (size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

}  // namespace

Waveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_wav: cannot open " + path);
  char tag[4];
  in.read(tag, 4);
  if (std::memcmp(tag, "RIFF", 4) != 0)
    throw std::runtime_error("read_wav: not a RIFF file: " + path);
  read_le<uint32_t>(in);  // riff size
  in.read(tag, 4);
  if (std::memcmp(tag, "WAVE", 4) != 0)
    throw std::runtime_error("read_wav: not a WAVE file: " + path);

  uint16_t audio_format = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  bool have_fmt = false;
  std::vector<char> payload;
  while (in.read(tag, 4)) {
    const uint32_t chunk = read_le<uint32_t>(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      audio_format = read_le<uint16_t>(in);
      channels = read_le<uint16_t>(in);
      sample_rate = read_le<uint32_t>(in);
      read_le<uint32_t>(in);  // byte rate
      read_le<uint16_t>(in);  // block align
      bits = read_le<uint16_t>(in);
      if (chunk > 16) in.ignore(chunk - 16);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      payload.resize(chunk);
      in.read(payload.data(), chunk);
      break;
    } else {
      in.ignore(chunk + (chunk & 1));
    }
  }
  if (!have_fmt || payload.empty())
    throw std::runtime_error("read_wav: missing fmt or data chunk: " + path);
  if (channels != 1 && channels != 2)
    throw std::runtime_error("read_wav: unsupported channel count " +
                             std::to_string(channels) + ": " + path);

  const size_t bytes_per = bits / 8;
  const size_t frames = payload.size() / (bytes_per * channels);
  Waveform w;
  w.sample_rate = static_cast<int>(sample_rate);
  w.samples.resize(frames);

  auto sample_at = [&](size_t frame, size_t ch) -> double {
    const char* p = payload.data() + (frame * channels + ch) * bytes_per;
    if (audio_format == 1 && bits == 16) {
      int16_t v;
      std::memcpy(&v, p, 2);
      return static_cast<double>(v) / 32768.0;
    }
    if (audio_format == 3 && bits == 32) {
      float v;
      std::memcpy(&v, p, 4);
      return static_cast<double>(v);
    }
    throw std::runtime_error("read_wav: unsupported format (need PCM16 or float32): " + path);
  };
  for (size_t i = 0; i < frames; ++i) {
    double v = sample_at(i, 0);
    if (channels == 2) v = 0.5 * (v + sample_at(i, 1));
    w.samples[i] = v;
  }
  return w;
}

void write_wav(const std::string& path, const Waveform& w, WavFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_wav: cannot open " + path);
  const uint16_t bits = format == WavFormat::Pcm16 ? 16 : 32;
  const uint16_t fmt_code = format == WavFormat::Pcm16 ? 1 : 3;
  const uint32_t data_bytes = static_cast<uint32_t>(w.samples.size() * bits / 8);

  out.write("RIFF", 4);
  write_le<uint32_t>(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_le<uint32_t>(out, 16);
  write_le<uint16_t>(out, fmt_code);
  write_le<uint16_t>(out, 1);
  write_le<uint32_t>(out, static_cast<uint32_t>(w.sample_rate));
  write_le<uint32_t>(out, static_cast<uint32_t>(w.sample_rate) * bits / 8);
  write_le<uint16_t>(out, bits / 8);
  write_le<uint16_t>(out, bits);
  out.write("data", 4);
  write_le<uint32_t>(out, data_bytes);
  for (double v : w.samples) {
    if (format == WavFormat::Pcm16) {
      double c = v;
      if (c > 1.0) c = 1.0;
      if (c < -1.0) c = -1.0;
      const int32_t q = static_cast<int32_t>(std::lround(c * 32767.0));
      write_le<int16_t>(out, static_cast<int16_t>(q));
    } else {
      write_le<float>(out, static_cast<float>(v));
    }
  }
  if (!out) throw std::runtime_error("write_wav: write failed: " + path);
}

}  // namespace lass::dsp
