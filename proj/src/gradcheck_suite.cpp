#include <cmath>

#include "lass/datagen.hpp"
#include "lass/gradcheck.hpp"
#include "lass/model.hpp"
#include "lass/ops.hpp"
#include "lass/query_encoder.hpp"
#include "lass/rng.hpp"
#include "lass/separator.hpp"

namespace lass::ad {

namespace {

TensorPtr<double> rand_tensor(Shape sh, Rng& rng, bool grad = true, double lo = -1.0,
                              double hi = 1.0) {
  auto t = make_tensor<double>(std::move(sh));
  for (auto& v : t->data) v = rng.uniform(lo, hi);
  t->requires_grad = grad;
  return t;
}

// Runs one probe-weighted check: analytic grads from a taped backward pass,
// numeric grads from central differences over fresh forward evaluations.
template <typename BuildFn>
GradCheckResult probe_check(const std::string& name, double tol, BuildFn&& build,
                            const std::vector<TensorPtr<double>>& inputs, double h = 1e-5) {
  auto forward = [&] {
    Tape<double> tape;
    return build(tape)->data[0];
  };
  for (const auto& t : inputs) t->ensure_grad();
  for (const auto& t : inputs) t->zero_grad();
  Tape<double> tape;
  auto loss = build(tape);
  tape.backward(loss);
  GradCheckResult r;
  r.name = name;
  r.tol = tol;
  r.rel_err = fd_relative_error(forward, inputs, h);
  return r;
}

GradCheckResult check_composed_model(double tol) {
  // Whole pipeline at toy size: tokens -> query encoder -> FiLM -> separator
  // -> mask -> masked magnitude -> MAE against a target magnitude.
  model::ModelConfig mc;
  mc.mode = model::QueryMode::Language;
  mc.query.dim = 8;
  mc.query.blocks = 1;
  mc.query.heads = 2;
  mc.query.ffn_mult = 2;
  mc.query.max_len = 8;
  mc.query.out_dim = 8;
  mc.separator.encoder_channels = {2, 3};
  mc.separator.decoder_channels = {3, 2};
  mc.separator.final_channels = 2;
  query::Vocabulary vocab({"tone", "noise", "hiss", "beep"});
  model::LassNet<double> net(mc, vocab, data::all_tags(), 99);

  Rng rng(5);
  // Gradcheck at a generic point in parameter space: freshly initialized
  // batch-norm betas put every leaky-ReLU kink exactly at the activation
  // mean, which central differences straddle. Random offsets move them off.
  for (auto& p : net.parameters()) {
    const bool is_gain = p.name.find("gamma") != std::string::npos ||
                         p.name.find("ln1/g") != std::string::npos;
    for (auto& v : p.tensor->data)
      v = is_gain ? rng.uniform(0.8, 1.2) : rng.uniform(0.15, 0.45);
  }
  // Batch of two with distinct queries: per-sample FiLM modulation then
  // survives the train-mode batch normalization (a per-channel affine that is
  // constant across the batch would be normalized away exactly), so every
  // parameter carries a resolvable gradient.
  auto mix = rand_tensor({2, 1, 16, 17}, rng, true, 0.05, 1.0);
  auto tgt = rand_tensor({2, 1, 16, 17}, rng, false, 0.05, 1.0);
  std::vector<std::vector<int>> tokens = {
      query::tokenize("a tone then hiss", vocab).ids,
      query::tokenize("noise and beep", vocab).ids};

  auto build = [&](Tape<double>& tape) {
    auto out = net.forward_text(tape, mix, tokens, BnMode::Train);
    return mae_loss(tape, mul(tape, out.mask, mix), tgt);
  };

  std::vector<TensorPtr<double>> inputs;
  inputs.push_back(mix);
  for (auto& p : net.parameters()) inputs.push_back(p.tensor);
  return probe_check("composed_model", tol, build, inputs, 1e-6);
}

}  // namespace

std::vector<GradCheckResult> run_gradcheck_suite(bool deep) {
  std::vector<GradCheckResult> results;
  Rng rng(1234);

  {
    auto a = rand_tensor({3, 4}, rng);
    auto b = rand_tensor({3, 4}, rng);
    auto w = rand_tensor({3, 4}, rng, false);
    results.push_back(probe_check(
        "add", 1e-7,
        [&](Tape<double>& t) { return weighted_sum(t, add(t, a, b), w); }, {a, b}));
    results.push_back(probe_check(
        "mul", 1e-7,
        [&](Tape<double>& t) { return weighted_sum(t, mul(t, a, b), w); }, {a, b}));
    results.push_back(probe_check(
        "scale", 1e-7,
        [&](Tape<double>& t) { return weighted_sum(t, scale(t, a, 2.5), w); }, {a}));
    results.push_back(probe_check(
        "leaky_relu", 1e-7,
        [&](Tape<double>& t) { return weighted_sum(t, leaky_relu(t, a, 0.01), w); }, {a}));
    results.push_back(probe_check(
        "relu", 1e-7, [&](Tape<double>& t) { return weighted_sum(t, relu(t, a), w); }, {a}));
    results.push_back(probe_check(
        "sigmoid", 1e-7,
        [&](Tape<double>& t) { return weighted_sum(t, sigmoid(t, a), w); }, {a}));
    results.push_back(probe_check(
        "mae_loss", 1e-7, [&](Tape<double>& t) { return mae_loss(t, a, b); }, {a, b}));
  }
  {
    auto x = rand_tensor({2, 3, 5}, rng);
    auto wt = rand_tensor({4, 5}, rng);
    auto bias = rand_tensor({4}, rng);
    auto w = rand_tensor({2, 3, 4}, rng, false);
    results.push_back(probe_check(
        "linear", 1e-6,
        [&](Tape<double>& t) { return weighted_sum(t, linear(t, x, wt, bias), w); },
        {x, wt, bias}));
  }
  {
    auto a = rand_tensor({3, 2, 4}, rng);
    auto b = rand_tensor({3, 4, 5}, rng);
    auto w = rand_tensor({3, 2, 5}, rng, false);
    results.push_back(probe_check(
        "bmm", 1e-6, [&](Tape<double>& t) { return weighted_sum(t, bmm(t, a, b), w); },
        {a, b}));
  }
  {
    auto x = rand_tensor({2, 3, 4, 5}, rng);
    auto w = rand_tensor({5, 2, 4, 3}, rng, false);
    results.push_back(probe_check(
        "permute_reshape", 1e-7,
        [&](Tape<double>& t) {
          auto y = permute(t, x, {3, 0, 2, 1});
          return weighted_sum(t, reshape(t, y, Shape{5, 2, 4, 3}), w);
        },
        {x}));
  }
  {
    auto table = rand_tensor({6, 4}, rng);
    std::vector<int> ids = {1, 0, 5, 5, 2, 1};
    auto w = rand_tensor({2, 3, 4}, rng, false);
    results.push_back(probe_check(
        "embedding", 1e-7,
        [&](Tape<double>& t) {
          return weighted_sum(t, embedding(t, ids, Shape{2, 3}, table), w);
        },
        {table}));
  }
  {
    auto x = rand_tensor({2, 3, 4}, rng);
    auto w = rand_tensor({2, 4}, rng, false);
    results.push_back(probe_check(
        "first_token", 1e-7,
        [&](Tape<double>& t) { return weighted_sum(t, first_token(t, x), w); }, {x}));
  }
  {
    auto x = rand_tensor({3, 6}, rng);
    auto w = rand_tensor({3, 2}, rng, false);
    results.push_back(probe_check(
        "slice_cols", 1e-7,
        [&](Tape<double>& t) { return weighted_sum(t, slice_cols(t, x, 2, 4), w); }, {x}));
  }
  {
    auto scores = rand_tensor({2, 2, 3, 4}, rng);
    auto mask = make_tensor<double>(Shape{2, 4}, 1.0);
    mask->data[3] = 0.0;
    auto w = rand_tensor({2, 2, 3, 4}, rng, false);
    results.push_back(probe_check(
        "masked_softmax", 1e-6,
        [&](Tape<double>& t) { return weighted_sum(t, masked_softmax(t, scores, mask), w); },
        {scores}));
  }
  {
    auto x = rand_tensor({3, 5}, rng);
    auto g = rand_tensor({5}, rng);
    auto b = rand_tensor({5}, rng);
    auto w = rand_tensor({3, 5}, rng, false);
    results.push_back(probe_check(
        "layer_norm", 1e-6,
        [&](Tape<double>& t) { return weighted_sum(t, layer_norm(t, x, g, b), w); },
        {x, g, b}));
  }
  {
    auto x = rand_tensor({1, 2, 6, 6}, rng);
    auto k = rand_tensor({3, 2, 4, 4}, rng);
    auto b = rand_tensor({3}, rng);
    auto w = rand_tensor({1, 3, 6, 6}, rng, false);
    results.push_back(probe_check(
        "conv2d", 1e-6,
        [&](Tape<double>& t) {
          return weighted_sum(t, conv2d(t, x, k, b, 1, same_pad_4x4()), w);
        },
        {x, k, b}));
  }
  {
    auto x = rand_tensor({1, 2, 6, 8}, rng);
    auto k = rand_tensor({2, 2, 3, 3}, rng);
    auto b = rand_tensor({2}, rng);
    auto w = rand_tensor({1, 2, 3, 4}, rng, false);
    results.push_back(probe_check(
        "conv2d_stride2", 1e-6,
        [&](Tape<double>& t) {
          return weighted_sum(t, conv2d(t, x, k, b, 2, ConvPad{1, 0, 1, 0}), w);
        },
        {x, k, b}));
  }
  {
    auto x = rand_tensor({2, 2, 3, 4}, rng);
    auto k = rand_tensor({2, 3, 4, 4}, rng);
    auto b = rand_tensor({3}, rng);
    auto w = rand_tensor({2, 3, 6, 8}, rng, false);
    results.push_back(probe_check(
        "conv_transpose2d", 1e-6,
        [&](Tape<double>& t) { return weighted_sum(t, conv_transpose2d(t, x, k, b), w); },
        {x, k, b}));
  }
  {
    auto x = rand_tensor({1, 3, 4, 6}, rng);
    auto w = rand_tensor({1, 3, 2, 3}, rng, false);
    results.push_back(probe_check(
        "avg_pool2d", 1e-7,
        [&](Tape<double>& t) { return weighted_sum(t, avg_pool2d(t, x), w); }, {x}));
  }
  {
    auto x = rand_tensor({2, 3, 4, 4}, rng);
    auto g = rand_tensor({3}, rng, true, 0.5, 1.5);
    auto b = rand_tensor({3}, rng);
    auto w = rand_tensor({2, 3, 4, 4}, rng, false);
    results.push_back(probe_check(
        "batch_norm2d_train", 1e-5,
        [&](Tape<double>& t) {
          Tensor<double> rm(Shape{3}), rv(Shape{3}, 1.0);
          return weighted_sum(t, batch_norm2d(t, x, g, b, rm, rv, BnMode::Train), w);
        },
        {x, g, b}));
    Tensor<double> rm(Shape{3}, 0.1), rv(Shape{3}, 0.9);
    results.push_back(probe_check(
        "batch_norm2d_eval", 1e-6,
        [&](Tape<double>& t) {
          return weighted_sum(t, batch_norm2d(t, x, g, b, rm, rv, BnMode::Eval), w);
        },
        {x, g, b}));
  }
  {
    auto x = rand_tensor({2, 3, 2, 2}, rng);
    auto g = rand_tensor({2, 3}, rng);
    auto b = rand_tensor({2, 3}, rng);
    auto w = rand_tensor({2, 3, 2, 2}, rng, false);
    results.push_back(probe_check(
        "film", 1e-7,
        [&](Tape<double>& t) { return weighted_sum(t, film(t, x, g, b), w); }, {x, g, b}));
  }
  {
    auto a = rand_tensor({2, 2, 3, 3}, rng);
    auto b = rand_tensor({2, 1, 3, 3}, rng);
    auto w = rand_tensor({2, 3, 3, 3}, rng, false);
    results.push_back(probe_check(
        "concat_channels", 1e-7,
        [&](Tape<double>& t) { return weighted_sum(t, concat_channels(t, a, b), w); },
        {a, b}));
  }
  {
    auto x = rand_tensor({1, 2, 3, 4}, rng);
    auto w = rand_tensor({1, 2, 4, 4}, rng, false);
    results.push_back(probe_check(
        "pad_crop_tf", 1e-7,
        [&](Tape<double>& t) {
          auto y = pad_tf(t, x, 1, 1, 0, 1);
          return weighted_sum(t, crop_tf(t, y, 0, 1, 0, 1), w);
        },
        {x}));
  }
  {
    // One full encoder block at D=8, heads=2, L=3, with its own generators:
    // the check point stays fixed no matter what runs before it.
    Rng wrng(404);
    Rng xrng(1234);
    query::TransformerBlockWeights<double> bw;
    auto mk = [&](Shape sh, double s) {
      auto t = rand_tensor(std::move(sh), wrng, true, -s, s);
      return t;
    };
    bw.wq = mk({8, 8}, 0.5);
    bw.bq = mk({8}, 0.1);
    bw.wk = mk({8, 8}, 0.5);
    bw.bk = mk({8}, 0.1);
    bw.wv = mk({8, 8}, 0.5);
    bw.bv = mk({8}, 0.1);
    bw.wo = mk({8, 8}, 0.5);
    bw.bo = mk({8}, 0.1);
    bw.ff1_w = mk({16, 8}, 0.5);
    bw.ff1_b = mk({16}, 0.1);
    bw.ff2_w = mk({8, 16}, 0.5);
    bw.ff2_b = mk({8}, 0.1);
    bw.ln1_g = mk({8}, 1.0);
    bw.ln1_b = mk({8}, 0.1);
    bw.ln2_g = mk({8}, 1.0);
    bw.ln2_b = mk({8}, 0.1);
    auto x = rand_tensor({1, 3, 8}, xrng);
    auto w = rand_tensor({1, 3, 8}, xrng, false);
    std::vector<TensorPtr<double>> inputs = {x,       bw.wq,    bw.bq,    bw.wk,    bw.bk,
                                             bw.wv,   bw.bv,    bw.wo,    bw.bo,    bw.ff1_w,
                                             bw.ff1_b, bw.ff2_w, bw.ff2_b, bw.ln1_g, bw.ln1_b,
                                             bw.ln2_g, bw.ln2_b};
    results.push_back(probe_check(
        "transformer_block", 1e-5,
        [&](Tape<double>& t) {
          return weighted_sum(t, query::transformer_block(t, x, bw, 2, nullptr), w);
        },
        inputs));
  }
  {
    // FiLM generator g at toy size.
    Rng grng(31);
    sep::FilmGenerator<double> gen(4, {2, 3}, grng);
    auto e = rand_tensor({2, 4}, rng);
    auto w0 = rand_tensor({2, 2}, rng, false);
    auto w1 = rand_tensor({2, 3}, rng, false);
    std::vector<TensorPtr<double>> inputs = {e};
    std::vector<NamedParam<double>> ps;
    gen.collect_params("g", ps);
    for (auto& p : ps) inputs.push_back(p.tensor);
    results.push_back(probe_check(
        "film_generator", 1e-6,
        [&](Tape<double>& t) {
          auto pairs = gen.forward(t, e);
          auto acc = weighted_sum(t, pairs[0].first, w0);
          acc = add(t, acc, weighted_sum(t, pairs[0].second, w0));
          acc = add(t, acc, weighted_sum(t, pairs[1].first, w1));
          return add(t, acc, weighted_sum(t, pairs[1].second, w1));
        },
        inputs));
  }
  {
    // Query encoder end to end at toy size.
    query::QueryEncoderConfig qc;
    qc.vocab_size = 7;
    qc.dim = 8;
    qc.blocks = 1;
    qc.heads = 2;
    qc.ffn_mult = 2;
    qc.max_len = 6;
    qc.out_dim = 5;
    Rng qrng(13);
    query::TextQueryEncoder<double> enc(qc, qrng);
    std::vector<std::vector<int>> toks = {{1, 3, 4, 6}, {1, 5}};
    auto w = rand_tensor({2, 5}, rng, false);
    std::vector<TensorPtr<double>> inputs;
    std::vector<NamedParam<double>> ps;
    enc.collect_params("q", ps);
    for (auto& p : ps) inputs.push_back(p.tensor);
    results.push_back(probe_check(
        "encode_query", 1e-5,
        [&](Tape<double>& t) { return weighted_sum(t, enc.forward(t, toks), w); }, inputs));
  }
  if (deep) results.push_back(check_composed_model(1e-4));
  return results;
}

}  // namespace lass::ad
