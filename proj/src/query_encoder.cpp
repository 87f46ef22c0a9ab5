#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "lass/adam.hpp"
#include "lass/query_encoder.hpp"

namespace lass::query {

using namespace lass::ad;

void QueryEncoderConfig::validate() const {
  if (dim == 0 || blocks == 0 || heads == 0 || out_dim == 0 || max_len == 0)
    throw std::invalid_argument("query encoder: zero-sized configuration field");
  if (dim % heads != 0)
    throw std::invalid_argument("query encoder: dim " + std::to_string(dim) +
                                " not divisible by heads " + std::to_string(heads));
}

template <typename S>
TensorPtr<S> transformer_block(Tape<S>& tape, const TensorPtr<S>& x,
                               const TransformerBlockWeights<S>& w, size_t heads,
                               const std::type_identity_t<TensorPtr<S>>& key_mask) {
  if (x->rank() != 3) throw std::invalid_argument("transformer_block: input must be [N, L, D]");
  const size_t N = x->dim(0), L = x->dim(1), D = x->dim(2);
  if (D % heads != 0)
    throw std::invalid_argument("transformer_block: dim " + std::to_string(D) +
                                " not divisible by heads " + std::to_string(heads));
  const size_t dh = D / heads;

  auto split_heads = [&](const TensorPtr<S>& t) {
    auto r = reshape(tape, t, Shape{N, L, heads, dh});
    auto p = permute(tape, r, {0, 2, 1, 3});  // [N, h, L, dh]
    return reshape(tape, p, Shape{N * heads, L, dh});
  };

  auto q = split_heads(linear(tape, x, w.wq, w.bq));
  auto k = split_heads(linear(tape, x, w.wk, w.bk));
  auto v = split_heads(linear(tape, x, w.wv, w.bv));

  auto kt = permute(tape, k, {0, 2, 1});  // [N*h, dh, L]
  auto scores = scale(tape, bmm(tape, q, kt),
                      static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh))));
  auto attn = masked_softmax(tape, reshape(tape, scores, Shape{N, heads, L, L}), key_mask);
  auto ctx = bmm(tape, reshape(tape, attn, Shape{N * heads, L, L}), v);
  ctx = reshape(tape, permute(tape, reshape(tape, ctx, Shape{N, heads, L, dh}), {0, 2, 1, 3}),
                Shape{N, L, D});

  auto x1 = layer_norm(tape, add(tape, x, linear(tape, ctx, w.wo, w.bo)), w.ln1_g, w.ln1_b);
  auto ff = linear(tape, relu(tape, linear(tape, x1, w.ff1_w, w.ff1_b)), w.ff2_w, w.ff2_b);
  return layer_norm(tape, add(tape, x1, ff), w.ln2_g, w.ln2_b);
}

namespace {

template <typename S>
TensorPtr<S> init_linear_weight(size_t out, size_t in, lass::Rng& rng) {
  auto w = make_param<S>(Shape{out, in});
  kaiming_uniform(*w, in, rng);
  return w;
}

template <typename S>
TransformerBlockWeights<S> init_block(size_t dim, size_t ffn, lass::Rng& rng) {
  TransformerBlockWeights<S> b;
  b.wq = init_linear_weight<S>(dim, dim, rng);
  b.bq = make_param<S>(Shape{dim});
  b.wk = init_linear_weight<S>(dim, dim, rng);
  b.bk = make_param<S>(Shape{dim});
  b.wv = init_linear_weight<S>(dim, dim, rng);
  b.bv = make_param<S>(Shape{dim});
  b.wo = init_linear_weight<S>(dim, dim, rng);
  b.bo = make_param<S>(Shape{dim});
  b.ff1_w = init_linear_weight<S>(ffn, dim, rng);
  b.ff1_b = make_param<S>(Shape{ffn});
  b.ff2_w = init_linear_weight<S>(dim, ffn, rng);
  b.ff2_b = make_param<S>(Shape{dim});
  b.ln1_g = make_param<S>(Shape{dim}, S(1));
  b.ln1_b = make_param<S>(Shape{dim});
  b.ln2_g = make_param<S>(Shape{dim}, S(1));
  b.ln2_b = make_param<S>(Shape{dim});
  return b;
}

template <typename S>
void collect_block(const std::string& p, TransformerBlockWeights<S>& b,
                   std::vector<NamedParam<S>>& out) {
  out.push_back({p + "/attn/wq", b.wq});
  out.push_back({p + "/attn/bq", b.bq});
  out.push_back({p + "/attn/wk", b.wk});
  out.push_back({p + "/attn/bk", b.bk});
  out.push_back({p + "/attn/wv", b.wv});
  out.push_back({p + "/attn/bv", b.bv});
  out.push_back({p + "/attn/wo", b.wo});
  out.push_back({p + "/attn/bo", b.bo});
  out.push_back({p + "/ffn/w1", b.ff1_w});
  out.push_back({p + "/ffn/b1", b.ff1_b});
  out.push_back({p + "/ffn/w2", b.ff2_w});
  out.push_back({p + "/ffn/b2", b.ff2_b});
  out.push_back({p + "/ln1/gamma", b.ln1_g});
  out.push_back({p + "/ln1/beta", b.ln1_b});
  out.push_back({p + "/ln2/gamma", b.ln2_g});
  out.push_back({p + "/ln2/beta", b.ln2_b});
}

}  // namespace

template <typename S>
TextQueryEncoder<S>::TextQueryEncoder(QueryEncoderConfig cfg, lass::Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  if (cfg_.vocab_size == 0)
    throw std::invalid_argument("query encoder: vocabulary size not set");
  tok_embed_ = make_param<S>(Shape{cfg_.vocab_size, cfg_.dim});
  normal_fill(*tok_embed_, 0.02, rng);
  pos_embed_ = make_param<S>(Shape{cfg_.max_len, cfg_.dim});
  normal_fill(*pos_embed_, 0.02, rng);
  for (size_t i = 0; i < cfg_.blocks; ++i)
    blocks_.push_back(init_block<S>(cfg_.dim, cfg_.ffn_mult * cfg_.dim, rng));
  head_w_ = init_linear_weight<S>(cfg_.out_dim, cfg_.dim, rng);
  head_b_ = make_param<S>(Shape{cfg_.out_dim});
}

template <typename S>
TensorPtr<S> TextQueryEncoder<S>::forward(
    Tape<S>& tape, const std::vector<std::vector<int>>& token_batch) const {
  const size_t N = token_batch.size();
  if (N == 0) throw std::invalid_argument("encode_query: empty batch");
  size_t L = 1;
  for (const auto& row : token_batch) {
    if (row.empty() || row[0] != Vocabulary::kSos)
      throw std::invalid_argument("encode_query: token sequence must start with <SOS>");
    size_t len = row.size();
    if (len > cfg_.max_len) {
      std::fprintf(stderr, "encode_query: truncating query of %zu tokens to max length %zu\n",
                   len, cfg_.max_len);
      len = cfg_.max_len;
    }
    L = std::max(L, len);
  }

  std::vector<int> ids(N * L, Vocabulary::kPad);
  std::vector<int> pos(N * L, 0);
  auto mask = make_tensor<S>(Shape{N, L});
  for (size_t n = 0; n < N; ++n) {
    const size_t len = std::min(token_batch[n].size(), cfg_.max_len);
    for (size_t l = 0; l < L; ++l) {
      pos[n * L + l] = static_cast<int>(l);
      if (l < len) {
        ids[n * L + l] = token_batch[n][l];
        mask->data[n * L + l] = S(1);
      }
    }
  }

  auto x = add(tape, embedding(tape, ids, Shape{N, L}, tok_embed_),
               embedding(tape, pos, Shape{N, L}, pos_embed_));
  for (const auto& b : blocks_) x = transformer_block(tape, x, b, cfg_.heads, mask);
  return relu(tape, linear(tape, first_token(tape, x), head_w_, head_b_));
}

template <typename S>
void TextQueryEncoder<S>::collect_params(const std::string& prefix,
                                         std::vector<NamedParam<S>>& out) {
  out.push_back({prefix + "/tok_embed", tok_embed_});
  out.push_back({prefix + "/pos_embed", pos_embed_});
  for (size_t i = 0; i < blocks_.size(); ++i)
    collect_block(prefix + "/block" + std::to_string(i), blocks_[i], out);
  out.push_back({prefix + "/head/w", head_w_});
  out.push_back({prefix + "/head/b", head_b_});
}

template <typename S>
TagQueryEncoder<S>::TagQueryEncoder(size_t n_tags, size_t out_dim, lass::Rng& rng)
    : n_tags_(n_tags), out_dim_(out_dim) {
  if (n_tags == 0 || out_dim == 0)
    throw std::invalid_argument("tag encoder: zero-sized configuration");
  w_ = init_linear_weight<S>(out_dim, n_tags, rng);
  b_ = make_param<S>(Shape{out_dim});
}

template <typename S>
TensorPtr<S> TagQueryEncoder<S>::forward(Tape<S>& tape, const TensorPtr<S>& multi_hot) const {
  if (multi_hot->rank() != 2 || multi_hot->dim(1) != n_tags_)
    throw std::invalid_argument("encode_tags: expected [N, " + std::to_string(n_tags_) +
                                "], got " + shape_str(multi_hot->shape));
  return relu(tape, linear(tape, multi_hot, w_, b_));
}

template <typename S>
void TagQueryEncoder<S>::collect_params(const std::string& prefix,
                                        std::vector<NamedParam<S>>& out) {
  out.push_back({prefix + "/w", w_});
  out.push_back({prefix + "/b", b_});
}

#define LASS_INSTANTIATE(S)                                                              \
  template TensorPtr<S> transformer_block<S>(Tape<S>&, const TensorPtr<S>&,              \
                                             const TransformerBlockWeights<S>&, size_t,  \
                                             const std::type_identity_t<TensorPtr<S>>&); \
  template class TextQueryEncoder<S>;                                                    \
  template class TagQueryEncoder<S>;

LASS_INSTANTIATE(float)
LASS_INSTANTIATE(double)
#undef LASS_INSTANTIATE

}  // namespace lass::query
