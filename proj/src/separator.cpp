#include <stdexcept>

#include "lass/adam.hpp"
#include "lass/separator.hpp"

namespace lass::sep {

using namespace lass::ad;

void SeparatorConfig::validate() const {
  if (encoder_channels.empty() || decoder_channels.size() != encoder_channels.size())
    throw std::invalid_argument("separator: encoder/decoder channel lists must be non-empty "
                                "and of equal length");
  for (size_t i = 0; i < encoder_channels.size(); ++i) {
    if (encoder_channels[i] == 0 || decoder_channels[i] == 0)
      throw std::invalid_argument("separator: zero channel count");
    if (decoder_channels[i] != encoder_channels[encoder_channels.size() - 1 - i])
      throw std::invalid_argument("separator: decoder channels must mirror encoder channels");
  }
  if (final_channels == 0 || in_channels == 0)
    throw std::invalid_argument("separator: zero channel count");
}

std::vector<size_t> SeparatorConfig::film_channel_layout() const {
  std::vector<size_t> layout;
  for (size_t c : encoder_channels) {
    layout.push_back(c);
    layout.push_back(c);
  }
  for (size_t c : decoder_channels) {
    layout.push_back(c);
    layout.push_back(c);
  }
  layout.push_back(final_channels);
  return layout;
}

SeparatorConfig SeparatorConfig::paper_scale() {
  SeparatorConfig cfg;
  cfg.encoder_channels = {32, 64, 128, 256, 384, 384};
  cfg.decoder_channels = {384, 384, 256, 128, 64, 32};
  cfg.final_channels = 32;
  return cfg;
}

template <typename S>
ConvBlock<S>::ConvBlock(size_t in, size_t out, lass::Rng& rng) : in_ch(in), out_ch(out) {
  bn_gamma = make_param<S>(Shape{in}, S(1));
  bn_beta = make_param<S>(Shape{in});
  bn_running_mean = Tensor<S>(Shape{in}, S(0));
  bn_running_var = Tensor<S>(Shape{in}, S(1));
  weight = make_param<S>(Shape{out, in, 4, 4});
  kaiming_uniform(*weight, in * 16, rng);
  bias = make_param<S>(Shape{out});
}

template <typename S>
TensorPtr<S> ConvBlock<S>::forward(Tape<S>& tape, const TensorPtr<S>& x,
                                   const TensorPtr<S>& film_gamma,
                                   const TensorPtr<S>& film_beta, BnMode mode,
                                   const SeparatorConfig& cfg) {
  auto h = batch_norm2d(tape, x, bn_gamma, bn_beta, bn_running_mean, bn_running_var, mode,
                        static_cast<S>(cfg.bn_momentum), static_cast<S>(cfg.bn_eps));
  h = leaky_relu(tape, h, static_cast<S>(cfg.leaky_slope));
  h = conv2d(tape, h, weight, bias, 1, same_pad_4x4());
  return film(tape, h, film_gamma, film_beta);
}

template <typename S>
void ConvBlock<S>::collect_params(const std::string& p, std::vector<NamedParam<S>>& out) {
  out.push_back({p + "/bn/gamma", bn_gamma});
  out.push_back({p + "/bn/beta", bn_beta});
  out.push_back({p + "/conv/weight", weight});
  out.push_back({p + "/conv/bias", bias});
}

template <typename S>
void ConvBlock<S>::collect_buffers(const std::string& p,
                                   std::vector<std::pair<std::string, Tensor<S>*>>& out) {
  out.push_back({p + "/bn/running_mean", &bn_running_mean});
  out.push_back({p + "/bn/running_var", &bn_running_var});
}

template <typename S>
FilmGenerator<S>::FilmGenerator(size_t d_q, std::vector<size_t> channel_layout, lass::Rng& rng)
    : d_q_(d_q), layout_(std::move(channel_layout)) {
  if (d_q_ == 0 || layout_.empty())
    throw std::invalid_argument("film generator: empty layout or zero d_q");
  for (size_t m : layout_) {
    BlockGen g;
    g.w1 = make_param<S>(Shape{d_q_, d_q_});
    kaiming_uniform(*g.w1, d_q_, rng);
    g.b1 = make_param<S>(Shape{d_q_});
    g.w2 = make_param<S>(Shape{2 * m, d_q_});
    kaiming_uniform(*g.w2, d_q_, rng);
    g.b2 = make_param<S>(Shape{2 * m});
    gens_.push_back(std::move(g));
  }
}

template <typename S>
std::vector<std::pair<TensorPtr<S>, TensorPtr<S>>> FilmGenerator<S>::forward(
    Tape<S>& tape, const TensorPtr<S>& e_q) const {
  if (e_q->rank() != 2 || e_q->dim(1) != d_q_)
    throw std::invalid_argument("film generator: e_q must be [N, " + std::to_string(d_q_) +
                                "], got " + shape_str(e_q->shape));
  std::vector<std::pair<TensorPtr<S>, TensorPtr<S>>> out;
  out.reserve(gens_.size());
  for (size_t i = 0; i < gens_.size(); ++i) {
    const auto& g = gens_[i];
    auto h = relu(tape, linear(tape, e_q, g.w1, g.b1));
    auto gb = linear(tape, h, g.w2, g.b2);  // [N, 2m]
    const size_t m = layout_[i];
    out.emplace_back(slice_cols(tape, gb, 0, m), slice_cols(tape, gb, m, 2 * m));
  }
  return out;
}

template <typename S>
void FilmGenerator<S>::collect_params(const std::string& p, std::vector<NamedParam<S>>& out) {
  for (size_t i = 0; i < gens_.size(); ++i) {
    const std::string base = p + "/g" + std::to_string(i);
    out.push_back({base + "/w1", gens_[i].w1});
    out.push_back({base + "/b1", gens_[i].b1});
    out.push_back({base + "/w2", gens_[i].w2});
    out.push_back({base + "/b2", gens_[i].b2});
  }
}

template <typename S>
ResUNetSeparator<S>::ResUNetSeparator(SeparatorConfig cfg, lass::Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  size_t prev = cfg_.in_channels;
  for (size_t c : cfg_.encoder_channels) {
    enc_.push_back({ConvBlock<S>(prev, c, rng), ConvBlock<S>(c, c, rng)});
    prev = c;
  }
  const size_t depth = cfg_.depth();
  for (size_t j = 0; j < depth; ++j) {
    const size_t c = cfg_.decoder_channels[j];
    const size_t skip_c = cfg_.encoder_channels[depth - 1 - j];
    DecoderBlock blk;
    blk.up_weight = make_param<S>(Shape{prev, c, 4, 4});
    kaiming_uniform(*blk.up_weight, prev * 16, rng);
    blk.up_bias = make_param<S>(Shape{c});
    blk.a = ConvBlock<S>(c + skip_c, c, rng);
    blk.b = ConvBlock<S>(c, c, rng);
    dec_.push_back(std::move(blk));
    prev = c;
  }
  final_block_ = ConvBlock<S>(prev, cfg_.final_channels, rng);
  out_weight = make_param<S>(Shape{1, cfg_.final_channels, 1, 1});
  kaiming_uniform(*out_weight, cfg_.final_channels, rng);
  out_bias = make_param<S>(Shape{1});
}

template <typename S>
typename ResUNetSeparator<S>::Output ResUNetSeparator<S>::forward(
    Tape<S>& tape, const TensorPtr<S>& magnitude,
    const std::vector<std::pair<TensorPtr<S>, TensorPtr<S>>>& films, BnMode mode,
    int debug_zero_skip) {
  if (magnitude->rank() != 4 || magnitude->dim(1) != cfg_.in_channels)
    throw std::invalid_argument("separator: input must be [N, " +
                                std::to_string(cfg_.in_channels) + ", T, F], got " +
                                shape_str(magnitude->shape));
  if (!magnitude->all_finite())
    throw std::invalid_argument("separator: non-finite value in input magnitude");
  if (films.size() != cfg_.conv_block_count())
    throw std::invalid_argument("separator: expected " +
                                std::to_string(cfg_.conv_block_count()) + " FiLM pairs, got " +
                                std::to_string(films.size()));
  const size_t T = magnitude->dim(2), F = magnitude->dim(3);
  const size_t depth = cfg_.depth();
  const size_t block = size_t(1) << depth;
  if (F < block + 1 || (F - 1) % block != 0)
    throw std::invalid_argument("separator: frequency axis must be 2^k + 1 with k >= depth, "
                                "got F = " + std::to_string(F));
  const size_t t_pad = (block - T % block) % block;

  // Drop the Nyquist row, pad time to a pooling-friendly multiple.
  auto x = crop_tf(tape, magnitude, 0, 0, 0, 1);
  if (t_pad) x = pad_tf(tape, x, 0, t_pad, 0, 0);

  size_t film_i = 0;
  auto next_film = [&]() -> const std::pair<TensorPtr<S>, TensorPtr<S>>& {
    return films[film_i++];
  };

  std::vector<TensorPtr<S>> skips;
  for (size_t i = 0; i < depth; ++i) {
    const auto& fa = next_film();
    x = enc_[i].a.forward(tape, x, fa.first, fa.second, mode, cfg_);
    const auto& fb = next_film();
    x = enc_[i].b.forward(tape, x, fb.first, fb.second, mode, cfg_);
    if (static_cast<int>(i) == debug_zero_skip) {
      skips.push_back(make_tensor<S>(x->shape));  // severed connection
    } else {
      skips.push_back(x);
    }
    x = avg_pool2d(tape, x);
  }
  for (size_t j = 0; j < depth; ++j) {
    x = conv_transpose2d(tape, x, dec_[j].up_weight, dec_[j].up_bias);
    x = concat_channels(tape, x, skips[depth - 1 - j]);
    const auto& fa = next_film();
    x = dec_[j].a.forward(tape, x, fa.first, fa.second, mode, cfg_);
    const auto& fb = next_film();
    x = dec_[j].b.forward(tape, x, fb.first, fb.second, mode, cfg_);
  }
  const auto& ff = next_film();
  x = final_block_.forward(tape, x, ff.first, ff.second, mode, cfg_);
  x = conv2d(tape, x, out_weight, out_bias, 1, ConvPad{0, 0, 0, 0});

  if (t_pad) x = crop_tf(tape, x, 0, t_pad, 0, 0);
  auto latent = pad_tf(tape, x, 0, 0, 0, 1);  // Nyquist logit restored as zero

  Output out;
  out.latent = latent;
  out.mask = sigmoid(tape, latent);
  return out;
}

template <typename S>
void ResUNetSeparator<S>::collect_params(const std::string& p,
                                         std::vector<NamedParam<S>>& out) {
  for (size_t i = 0; i < enc_.size(); ++i) {
    enc_[i].a.collect_params(p + "/enc" + std::to_string(i) + "/a", out);
    enc_[i].b.collect_params(p + "/enc" + std::to_string(i) + "/b", out);
  }
  for (size_t j = 0; j < dec_.size(); ++j) {
    const std::string base = p + "/dec" + std::to_string(j);
    out.push_back({base + "/up/weight", dec_[j].up_weight});
    out.push_back({base + "/up/bias", dec_[j].up_bias});
    dec_[j].a.collect_params(base + "/a", out);
    dec_[j].b.collect_params(base + "/b", out);
  }
  final_block_.collect_params(p + "/final", out);
  out.push_back({p + "/out/weight", out_weight});
  out.push_back({p + "/out/bias", out_bias});
}

template <typename S>
void ResUNetSeparator<S>::collect_buffers(
    const std::string& p, std::vector<std::pair<std::string, Tensor<S>*>>& out) {
  for (size_t i = 0; i < enc_.size(); ++i) {
    enc_[i].a.collect_buffers(p + "/enc" + std::to_string(i) + "/a", out);
    enc_[i].b.collect_buffers(p + "/enc" + std::to_string(i) + "/b", out);
  }
  for (size_t j = 0; j < dec_.size(); ++j) {
    dec_[j].a.collect_buffers(p + "/dec" + std::to_string(j) + "/a", out);
    dec_[j].b.collect_buffers(p + "/dec" + std::to_string(j) + "/b", out);
  }
  final_block_.collect_buffers(p + "/final", out);
}

#define LASS_INSTANTIATE(S)     \
  template struct ConvBlock<S>; \
  template class FilmGenerator<S>; \
  template class ResUNetSeparator<S>;

LASS_INSTANTIATE(float)
LASS_INSTANTIATE(double)
#undef LASS_INSTANTIATE

}  // namespace lass::sep
