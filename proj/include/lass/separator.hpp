#pragma once

#include <utility>
#include <vector>

#include "lass/ops.hpp"
#include "lass/rng.hpp"

namespace lass::sep {

using ad::BnMode;
using ad::NamedParam;
using ad::Shape;
using ad::Tape;
using ad::Tensor;
using ad::TensorPtr;

struct SeparatorConfig {
  std::vector<size_t> encoder_channels{4, 8, 16, 32};
  std::vector<size_t> decoder_channels{32, 16, 8, 4};
  size_t final_channels = 8;
  size_t in_channels = 1;
  double leaky_slope = 0.01;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;

  size_t depth() const { return encoder_channels.size(); }
  // Two ConvBlocks per encoder/decoder block plus the final one.
  size_t conv_block_count() const {
    return 2 * encoder_channels.size() + 2 * decoder_channels.size() + 1;
  }
  // Channel count of each ConvBlock in forward order; FiLM pairs follow it.
  std::vector<size_t> film_channel_layout() const;
  void validate() const;

  // Channel schedule from the reference architecture.
  static SeparatorConfig paper_scale();
};

// Pre-activation block: batch norm -> leaky ReLU -> 4x4 same conv, with the
// FiLM modulation applied to the conv output.
template <typename S>
struct ConvBlock {
  size_t in_ch = 0, out_ch = 0;
  TensorPtr<S> bn_gamma, bn_beta;
  Tensor<S> bn_running_mean, bn_running_var;
  TensorPtr<S> weight, bias;

  ConvBlock() = default;
  ConvBlock(size_t in, size_t out, lass::Rng& rng);
  TensorPtr<S> forward(Tape<S>& tape, const TensorPtr<S>& x, const TensorPtr<S>& film_gamma,
                       const TensorPtr<S>& film_beta, BnMode mode,
                       const SeparatorConfig& cfg);
  void collect_params(const std::string& prefix, std::vector<NamedParam<S>>& out);
  void collect_buffers(const std::string& prefix,
                       std::vector<std::pair<std::string, Tensor<S>*>>& out);
};

// g(e_q) for every ConvBlock: per block an unshared FC(d_q -> d_q), ReLU,
// FC(d_q -> 2m) producing (gamma, beta).
template <typename S>
class FilmGenerator {
 public:
  FilmGenerator() = default;
  FilmGenerator(size_t d_q, std::vector<size_t> channel_layout, lass::Rng& rng);

  // e_q [N, d_q] -> one (gamma [N, m], beta [N, m]) pair per ConvBlock.
  std::vector<std::pair<TensorPtr<S>, TensorPtr<S>>> forward(Tape<S>& tape,
                                                             const TensorPtr<S>& e_q) const;

  size_t pair_count() const { return layout_.size(); }
  void collect_params(const std::string& prefix, std::vector<NamedParam<S>>& out);

 private:
  size_t d_q_ = 0;
  std::vector<size_t> layout_;
  struct BlockGen {
    TensorPtr<S> w1, b1, w2, b2;
  };
  std::vector<BlockGen> gens_;
};

// The encoder/decoder mask network. Input magnitude is [N, 1, T, F] with
// F = 2^k + 1; internally the Nyquist row is dropped and T zero-padded to a
// multiple of 2^depth, and the output mask restores the original grid with a
// zero logit in the Nyquist row.
template <typename S>
class ResUNetSeparator {
 public:
  ResUNetSeparator() = default;
  ResUNetSeparator(SeparatorConfig cfg, lass::Rng& rng);

  struct Output {
    TensorPtr<S> latent;  // Z, pre-sigmoid, [N, 1, T, F]
    TensorPtr<S> mask;    // sigmoid(Z)
  };

  // films must come from a generator built over film_channel_layout().
  // debug_zero_skip >= 0 zeroes that encoder level's skip tensor (tests).
  Output forward(Tape<S>& tape, const TensorPtr<S>& magnitude,
                 const std::vector<std::pair<TensorPtr<S>, TensorPtr<S>>>& films, BnMode mode,
                 int debug_zero_skip = -1);

  const SeparatorConfig& config() const { return cfg_; }
  void collect_params(const std::string& prefix, std::vector<NamedParam<S>>& out);
  void collect_buffers(const std::string& prefix,
                       std::vector<std::pair<std::string, Tensor<S>*>>& out);

 private:
  SeparatorConfig cfg_;
  struct EncoderBlock {
    ConvBlock<S> a, b;
  };
  struct DecoderBlock {
    TensorPtr<S> up_weight, up_bias;  // stride-2 transposed conv
    ConvBlock<S> a, b;
  };
  std::vector<EncoderBlock> enc_;
  std::vector<DecoderBlock> dec_;
  ConvBlock<S> final_block_;
  TensorPtr<S> out_weight, out_bias;  // 1x1 projection, not FiLM-modulated
};

}  // namespace lass::sep
