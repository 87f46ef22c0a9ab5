#pragma once

#include <type_traits>
#include <vector>

#include "lass/tape.hpp"
#include "lass/tensor.hpp"

// Differentiable ops over the tape. Feature maps are [N, C, T, F] row-major
// with the frequency axis innermost; sequence activations are [N, L, D].
// Every op is a pure function of its inputs (batch_norm2d's running-stat
// update in train mode is the one documented side effect) and deterministic.
namespace lass::ad {

template <typename S>
TensorPtr<S> add(Tape<S>& tape, const TensorPtr<S>& a, const TensorPtr<S>& b);

template <typename S>
TensorPtr<S> mul(Tape<S>& tape, const TensorPtr<S>& a, const TensorPtr<S>& b);

template <typename S>
TensorPtr<S> scale(Tape<S>& tape, const TensorPtr<S>& a, S c);

template <typename S>
TensorPtr<S> relu(Tape<S>& tape, const TensorPtr<S>& a);

template <typename S>
TensorPtr<S> leaky_relu(Tape<S>& tape, const TensorPtr<S>& a, S negative_slope);

template <typename S>
TensorPtr<S> sigmoid(Tape<S>& tape, const TensorPtr<S>& a);

// Mean of |pred - target| over all elements; subgradient at 0 is 0.
template <typename S>
TensorPtr<S> mae_loss(Tape<S>& tape, const TensorPtr<S>& pred, const TensorPtr<S>& target);

// sum(x * w) with constant probe weights; test utility for gradient checks.
template <typename S>
TensorPtr<S> weighted_sum(Tape<S>& tape, const TensorPtr<S>& x, const TensorPtr<S>& w);

// x [..., In] -> [..., Out] with weight [Out, In] and optional bias [Out].
template <typename S>
TensorPtr<S> linear(Tape<S>& tape, const TensorPtr<S>& x, const TensorPtr<S>& weight,
                    const std::type_identity_t<TensorPtr<S>>& bias);

// Batched matmul [B, M, K] x [B, K, N] -> [B, M, N].
template <typename S>
TensorPtr<S> bmm(Tape<S>& tape, const TensorPtr<S>& a, const TensorPtr<S>& b);

template <typename S>
TensorPtr<S> reshape(Tape<S>& tape, const TensorPtr<S>& a, Shape new_shape);

// Generic axis permutation, rank <= 4.
template <typename S>
TensorPtr<S> permute(Tape<S>& tape, const TensorPtr<S>& a, const std::vector<size_t>& axes);

// Row lookup: ids index into table [V, D]; out [ids_shape..., D].
template <typename S>
TensorPtr<S> embedding(Tape<S>& tape, const std::vector<int>& ids, Shape ids_shape,
                       const TensorPtr<S>& table);

// x [N, L, D] -> [N, D], the L=0 slice.
template <typename S>
TensorPtr<S> first_token(Tape<S>& tape, const TensorPtr<S>& x);

// Columns [c0, c1) of x [N, C] -> [N, c1-c0].
template <typename S>
TensorPtr<S> slice_cols(Tape<S>& tape, const TensorPtr<S>& x, size_t c0, size_t c1);

// Softmax over the last axis of scores [N, H, L, Lk]. key_mask, when present,
// is [N, Lk] with 1 = attend, 0 = exclude (weight exactly zero).
template <typename S>
TensorPtr<S> masked_softmax(Tape<S>& tape, const TensorPtr<S>& scores,
                            const std::type_identity_t<TensorPtr<S>>& key_mask);

// Normalizes over the last axis D with per-feature gamma/beta [D].
template <typename S>
TensorPtr<S> layer_norm(Tape<S>& tape, const TensorPtr<S>& x, const TensorPtr<S>& gamma,
                        const TensorPtr<S>& beta, S eps = S(1e-5));

// --- spatial ops on [N, C, T, F] ---

struct ConvPad {
  int t0 = 0, t1 = 0, f0 = 0, f1 = 0;  // leading/trailing per axis
};

// "Same"-size convention for even 4x4 kernels at stride 1: pad 1 before and
// 2 after on both axes.
inline ConvPad same_pad_4x4() { return ConvPad{1, 2, 1, 2}; }

template <typename S>
TensorPtr<S> conv2d(Tape<S>& tape, const TensorPtr<S>& x, const TensorPtr<S>& kernel,
                    const std::type_identity_t<TensorPtr<S>>& bias, int stride, ConvPad pad);

// Stride-2 upsampling; kernel [Cin, Cout, 4, 4], output exactly [N, Cout, 2T, 2F].
template <typename S>
TensorPtr<S> conv_transpose2d(Tape<S>& tape, const TensorPtr<S>& x, const TensorPtr<S>& kernel,
                              const std::type_identity_t<TensorPtr<S>>& bias);

template <typename S>
TensorPtr<S> avg_pool2d(Tape<S>& tape, const TensorPtr<S>& x);

enum class BnMode { Train, Eval };

// Per-channel batch normalization. Train mode normalizes by batch statistics
// (biased variance) and folds them into running_mean/running_var, which are
// plain buffers outside the tape; eval mode reads the running buffers.
template <typename S>
TensorPtr<S> batch_norm2d(Tape<S>& tape, const TensorPtr<S>& x, const TensorPtr<S>& gamma,
                          const TensorPtr<S>& beta, Tensor<S>& running_mean,
                          Tensor<S>& running_var, BnMode mode, S momentum = S(0.1),
                          S eps = S(1e-5));

// Per-sample, per-channel affine: out[n,c] = gamma[n,c] * x[n,c] + beta[n,c].
template <typename S>
TensorPtr<S> film(Tape<S>& tape, const TensorPtr<S>& x, const TensorPtr<S>& gamma,
                  const TensorPtr<S>& beta);

template <typename S>
TensorPtr<S> concat_channels(Tape<S>& tape, const TensorPtr<S>& a, const TensorPtr<S>& b);

// Zero-pads the trailing two axes; amounts may be zero.
template <typename S>
TensorPtr<S> pad_tf(Tape<S>& tape, const TensorPtr<S>& x, size_t t0, size_t t1, size_t f0,
                    size_t f1);

template <typename S>
TensorPtr<S> crop_tf(Tape<S>& tape, const TensorPtr<S>& x, size_t t0, size_t t1, size_t f0,
                     size_t f1);

}  // namespace lass::ad
