#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lass/tensor.hpp"

namespace lass::train {

// On-disk layout (little-endian): magic "LASSCKPT", u32 version, u32 tensor
// count; per tensor: u16 name length, UTF-8 name, u8 dtype (0 = f32,
// 1 = f64), u8 rank, u32 dims..., raw payload. Text payloads (config,
// vocabulary, tag list) ride along as f32 tensors of byte values.
inline constexpr uint32_t kCheckpointVersion = 1;

struct TensorRecord {
  std::string name;
  uint8_t dtype = 0;  // 0 = f32, 1 = f64
  ad::Shape shape;
  std::vector<float> f32;
  std::vector<double> f64;

  size_t numel() const { return ad::shape_numel(shape); }
};

void write_checkpoint(const std::string& path, const std::vector<TensorRecord>& tensors);
std::vector<TensorRecord> read_checkpoint(const std::string& path);

TensorRecord text_record(std::string name, const std::string& text);
std::string record_text(const TensorRecord& rec);
TensorRecord scalar_record(std::string name, double value);
double record_scalar(const TensorRecord& rec);

}  // namespace lass::train
