#pragma once

#include <vector>

#include "lass/ops.hpp"
#include "lass/rng.hpp"
#include "lass/vocab.hpp"

namespace lass::query {

using ad::NamedParam;
using ad::Tape;
using ad::TensorPtr;

struct QueryEncoderConfig {
  size_t vocab_size = 0;
  size_t dim = 64;       // transformer width
  size_t blocks = 2;     // paper shape: 4
  size_t heads = 4;
  size_t ffn_mult = 4;
  size_t max_len = 32;
  size_t out_dim = 64;   // d_q (paper shape: 256)

  void validate() const;
};

template <typename S>
struct TransformerBlockWeights {
  TensorPtr<S> wq, bq, wk, bk, wv, bv, wo, bo;
  TensorPtr<S> ff1_w, ff1_b, ff2_w, ff2_b;
  TensorPtr<S> ln1_g, ln1_b, ln2_g, ln2_b;
};

// Post-norm encoder block: bidirectional multi-head self-attention (no causal
// mask), residual + layer norm, two-layer feed-forward, residual + layer norm.
// key_mask [N, L] excludes padding keys; pass nullptr for none.
template <typename S>
TensorPtr<S> transformer_block(Tape<S>& tape, const TensorPtr<S>& x,
                               const TransformerBlockWeights<S>& w, size_t heads,
                               const std::type_identity_t<TensorPtr<S>>& key_mask);

// Trainable stand-in for a pretrained masked-LM encoder: token + learned
// positional embeddings, a stack of encoder blocks, readout at the <SOS>
// position, then a fully connected layer with ReLU to d_q.
template <typename S>
class TextQueryEncoder {
 public:
  TextQueryEncoder(QueryEncoderConfig cfg, lass::Rng& rng);

  // Ragged token id batch (each row starts with <SOS>); rows longer than
  // max_len are truncated with a warning. Returns e_q [N, out_dim].
  TensorPtr<S> forward(Tape<S>& tape, const std::vector<std::vector<int>>& token_batch) const;

  void collect_params(const std::string& prefix, std::vector<NamedParam<S>>& out);
  const QueryEncoderConfig& config() const { return cfg_; }

 private:
  QueryEncoderConfig cfg_;
  TensorPtr<S> tok_embed_, pos_embed_;
  std::vector<TransformerBlockWeights<S>> blocks_;
  TensorPtr<S> head_w_, head_b_;
};

// Multi-hot tag baseline: one fully connected layer with ReLU.
template <typename S>
class TagQueryEncoder {
 public:
  TagQueryEncoder(size_t n_tags, size_t out_dim, lass::Rng& rng);

  // multi_hot [N, n_tags] -> e_q [N, out_dim]
  TensorPtr<S> forward(Tape<S>& tape, const TensorPtr<S>& multi_hot) const;

  void collect_params(const std::string& prefix, std::vector<NamedParam<S>>& out);
  size_t n_tags() const { return n_tags_; }
  size_t out_dim() const { return out_dim_; }

 private:
  size_t n_tags_, out_dim_;
  TensorPtr<S> w_, b_;
};

}  // namespace lass::query
