#include <cstring>
#include <fstream>
#include <stdexcept>

#include "lass/checkpoint.hpp"

namespace lass::train {

namespace {

constexpr char kMagic[8] = {'L', 'A', 'S', 'S', 'C', 'K', 'P', 'T'};

template <typename T>
void put_le(std::ostream& out, T v) {
  uint64_t u = 0;
  std::memcpy(&u, &v, sizeof(T));
  unsigned char b[sizeof(T)];
  for (size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char b[sizeof(T)];
  in.read(reinterpret_cast<char*>(b), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  uint64_t u = 0;
  for (size_t i = sizeof(T); i-- > 0;) u = (u << 8) | b[i];
  T v;
  std::memcpy(&v, &u, sizeof(T));
  return v;
}

}  // namespace

void write_checkpoint(const std::string& path, const std::vector<TensorRecord>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  out.write(kMagic, sizeof(kMagic));
  put_le<uint32_t>(out, kCheckpointVersion);
  put_le<uint32_t>(out, static_cast<uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    if (t.name.size() > 0xFFFF)
      throw std::invalid_argument("checkpoint: tensor name too long: " + t.name);
    put_le<uint16_t>(out, static_cast<uint16_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put_le<uint8_t>(out, t.dtype);
    put_le<uint8_t>(out, static_cast<uint8_t>(t.shape.size()));
    for (size_t d : t.shape) put_le<uint32_t>(out, static_cast<uint32_t>(d));
    const size_t n = t.numel();
    if (t.dtype == 0) {
      if (t.f32.size() != n)
        throw std::invalid_argument("checkpoint: payload size mismatch for " + t.name);
      for (float v : t.f32) put_le<float>(out, v);
    } else if (t.dtype == 1) {
      if (t.f64.size() != n)
        throw std::invalid_argument("checkpoint: payload size mismatch for " + t.name);
      for (double v : t.f64) put_le<double>(out, v);
    } else {
      throw std::invalid_argument("checkpoint: unknown dtype code for " + t.name);
    }
  }
  if (!out) throw std::runtime_error("checkpoint: write failed: " + path);
}

std::vector<TensorRecord> read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  const auto version = get_le<uint32_t>(in);
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: version " + std::to_string(version) +
                             " unsupported (expected " + std::to_string(kCheckpointVersion) +
                             ")");
  const auto count = get_le<uint32_t>(in);
  std::vector<TensorRecord> out;
  out.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    TensorRecord t;
    const auto name_len = get_le<uint16_t>(in);
    t.name.resize(name_len);
    in.read(t.name.data(), name_len);
    t.dtype = get_le<uint8_t>(in);
    const auto rank = get_le<uint8_t>(in);
    t.shape.resize(rank);
    for (auto& d : t.shape) d = get_le<uint32_t>(in);
    const size_t n = t.numel();
    if (t.dtype == 0) {
      t.f32.resize(n);
      for (auto& v : t.f32) v = get_le<float>(in);
    } else if (t.dtype == 1) {
      t.f64.resize(n);
      for (auto& v : t.f64) v = get_le<double>(in);
    } else {
      throw std::runtime_error("checkpoint: unknown dtype code " + std::to_string(t.dtype) +
                               " for tensor " + t.name);
    }
    if (!in) throw std::runtime_error("checkpoint: truncated file " + path);
    out.push_back(std::move(t));
  }
  return out;
}

TensorRecord text_record(std::string name, const std::string& text) {
  TensorRecord t;
  t.name = std::move(name);
  t.dtype = 0;
  t.shape = {text.size()};
  t.f32.reserve(text.size());
  for (unsigned char c : text) t.f32.push_back(static_cast<float>(c));
  return t;
}

std::string record_text(const TensorRecord& rec) {
  std::string s;
  s.reserve(rec.f32.size());
  for (float v : rec.f32) s.push_back(static_cast<char>(static_cast<unsigned char>(v)));
  return s;
}

TensorRecord scalar_record(std::string name, double value) {
  TensorRecord t;
  t.name = std::move(name);
  t.dtype = 1;
  t.shape = {1};
  t.f64 = {value};
  return t;
}

double record_scalar(const TensorRecord& rec) {
  if (rec.dtype != 1 || rec.f64.size() != 1)
    throw std::runtime_error("checkpoint: " + rec.name + " is not a scalar record");
  return rec.f64[0];
}

}  // namespace lass::train
