#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "lass/datagen.hpp"
#include "lass/model.hpp"
#include "lass/separator.hpp"

using namespace lass;
using namespace lass::sep;
using lass::ad::BnMode;
using lass::ad::Shape;
using lass::ad::Tape;
using lass::ad::TensorPtr;
using lass::ad::make_tensor;

namespace {

SeparatorConfig toy_config() {
  SeparatorConfig cfg;
  cfg.encoder_channels = {2, 3};
  cfg.decoder_channels = {3, 2};
  cfg.final_channels = 2;
  return cfg;
}

model::ModelConfig toy_model_config() {
  model::ModelConfig mc;
  mc.query.dim = 8;
  mc.query.blocks = 1;
  mc.query.heads = 2;
  mc.query.ffn_mult = 2;
  mc.query.max_len = 8;
  mc.query.out_dim = 8;
  mc.separator = toy_config();
  return mc;
}

TensorPtr<double> random_mag(Shape sh, uint64_t seed) {
  auto t = make_tensor<double>(std::move(sh));
  Rng rng(seed);
  for (auto& v : t->data) v = rng.uniform(0.0, 1.0);
  return t;
}

}  // namespace

TEST_CASE("film_apply identity and constant cases") {
  Tape<double> t;
  auto x = random_mag({2, 3, 4, 4}, 1);
  auto g1 = make_tensor<double>(Shape{2, 3}, 1.0);
  auto b0 = make_tensor<double>(Shape{2, 3}, 0.0);
  auto y = ad::film(t, x, g1, b0);
  CHECK(y->data == x->data);

  auto g0 = make_tensor<double>(Shape{2, 3}, 0.0);
  auto bc = make_tensor<double>(Shape{2, 3}, 2.5);
  auto z = ad::film(t, x, g0, bc);
  for (double v : z->data) CHECK(v == 2.5);
}

TEST_CASE("film_apply is additive in H at beta = 0") {
  Tape<double> t;
  auto h1 = random_mag({1, 2, 3, 3}, 2);
  auto h2 = random_mag({1, 2, 3, 3}, 3);
  auto g = random_mag({1, 2}, 4);
  auto b0 = make_tensor<double>(Shape{1, 2});
  auto sum = ad::add(t, h1, h2);
  auto lhs = ad::film(t, sum, g, b0);
  auto rhs = ad::add(t, ad::film(t, h1, g, b0), ad::film(t, h2, g, b0));
  for (size_t i = 0; i < lhs->numel(); ++i)
    CHECK(lhs->data[i] == doctest::Approx(rhs->data[i]).epsilon(1e-12));
}

TEST_CASE("film pair count follows the ConvBlock layout") {
  CHECK(toy_config().conv_block_count() == 9);  // 2*2 + 2*2 + 1
  CHECK(SeparatorConfig{}.conv_block_count() == 17);
  CHECK(SeparatorConfig::paper_scale().conv_block_count() == 25);

  const auto layout = SeparatorConfig::paper_scale().film_channel_layout();
  CHECK(layout.size() == 25);
  CHECK(layout.front() == 32);
  CHECK(layout.back() == 32);

  Rng rng(5);
  FilmGenerator<double> gen(8, toy_config().film_channel_layout(), rng);
  CHECK(gen.pair_count() == toy_config().conv_block_count());
  Tape<double> t;
  auto e = random_mag({2, 8}, 6);
  auto pairs = gen.forward(t, e);
  CHECK(pairs.size() == 9);
  const auto layout2 = toy_config().film_channel_layout();
  for (size_t i = 0; i < pairs.size(); ++i) {
    CHECK(pairs[i].first->shape == Shape{2, layout2[i]});
    CHECK(pairs[i].second->shape == Shape{2, layout2[i]});
  }
  // deterministic given e_q
  Tape<double> t2;
  auto again = gen.forward(t2, e);
  for (size_t i = 0; i < pairs.size(); ++i) {
    CHECK(pairs[i].first->data == again[i].first->data);
    CHECK(pairs[i].second->data == again[i].second->data);
  }
}

TEST_CASE("separator config validation") {
  SeparatorConfig bad = toy_config();
  bad.decoder_channels = {2, 3};  // not mirrored
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = toy_config();
  bad.decoder_channels = {3};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("separator preserves shape, pads time, restores the Nyquist row") {
  Rng rng(7);
  auto cfg = toy_config();  // depth 2
  ResUNetSeparator<double> sep(cfg, rng);
  FilmGenerator<double> gen(8, cfg.film_channel_layout(), rng);

  for (size_t T : {5u, 8u, 13u}) {
    auto mag = random_mag({1, 1, T, 33}, 100 + T);
    Tape<double> t;
    auto films = gen.forward(t, random_mag({1, 8}, 9));
    auto out = sep.forward(t, mag, films, BnMode::Eval);
    CHECK(out.latent->shape == Shape{1, 1, T, 33});
    CHECK(out.mask->shape == Shape{1, 1, T, 33});
    // Nyquist row: zero logit, half-open mask
    for (size_t tt = 0; tt < T; ++tt) {
      CHECK(out.latent->data[tt * 33 + 32] == 0.0);
      CHECK(out.mask->data[tt * 33 + 32] == doctest::Approx(0.5));
    }
    // strict mask bounds everywhere
    for (double v : out.mask->data) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }
}

TEST_CASE("separator rejects bad frequency axes and non-finite input") {
  Rng rng(7);
  auto cfg = toy_config();
  ResUNetSeparator<double> sep(cfg, rng);
  FilmGenerator<double> gen(8, cfg.film_channel_layout(), rng);
  Tape<double> t;
  auto films = gen.forward(t, random_mag({1, 8}, 9));
  CHECK_THROWS(sep.forward(t, random_mag({1, 1, 8, 32}, 1), films, BnMode::Eval));
  auto bad = random_mag({1, 1, 8, 33}, 2);
  bad->data[5] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS(sep.forward(t, bad, films, BnMode::Eval));
}

TEST_CASE("zeroed weights give Z = 0 and M = 0.5 everywhere") {
  model::LassNet<double> net(toy_model_config(), query::Vocabulary({"tone"}),
                             data::all_tags(), 3);
  for (auto& p : net.parameters()) std::fill(p.tensor->data.begin(), p.tensor->data.end(), 0.0);
  Tape<double> t;
  auto mag = random_mag({1, 1, 8, 33}, 4);
  auto out = net.forward_text(t, mag, {{1, 3}}, BnMode::Eval);
  for (double v : out.latent->data) CHECK(v == 0.0);
  for (double v : out.mask->data) CHECK(v == doctest::Approx(0.5));
}

TEST_CASE("desk-default separator handles the 10 s grid and a short grid") {
  Rng rng(17);
  SeparatorConfig cfg;  // desk default, depth 4
  ResUNetSeparator<float> sep(cfg, rng);
  FilmGenerator<float> gen(64, cfg.film_channel_layout(), rng);
  for (size_t T : {63u, 626u}) {
    auto mag = make_tensor<float>(Shape{1, 1, T, 513}, 0.1f);
    Tape<float> t;
    auto e = make_tensor<float>(Shape{1, 64}, 0.2f);
    auto out = sep.forward(t, mag, gen.forward(t, e), BnMode::Eval);
    CHECK(out.mask->shape == Shape{1, 1, T, 513});
  }
}

TEST_CASE("paper-scale separator instantiates and preserves 513 x T") {
  Rng rng(23);
  auto cfg = SeparatorConfig::paper_scale();
  ResUNetSeparator<float> sep(cfg, rng);
  FilmGenerator<float> gen(256, cfg.film_channel_layout(), rng);
  auto mag = make_tensor<float>(Shape{1, 1, 64, 513}, 0.05f);
  Tape<float> t;
  auto e = make_tensor<float>(Shape{1, 256}, 0.1f);
  auto out = sep.forward(t, mag, gen.forward(t, e), BnMode::Eval);
  CHECK(out.mask->shape == Shape{1, 1, 64, 513});
}

TEST_CASE("distinct query embeddings modulate the mask") {
  model::LassNet<double> net(toy_model_config(), query::Vocabulary({"tone", "noise"}),
                             data::all_tags(), 11);
  auto mag = random_mag({1, 1, 8, 33}, 21);
  Tape<double> t1, t2;
  auto m1 = net.forward_text(t1, mag, {{1, 3}}, BnMode::Eval).mask;
  auto m2 = net.forward_text(t2, mag, {{1, 4}}, BnMode::Eval).mask;
  double diff = 0.0;
  for (size_t i = 0; i < m1->numel(); ++i)
    diff = std::max(diff, std::abs(m1->data[i] - m2->data[i]));
  CHECK(diff > 0.0);
}

TEST_CASE("ablating a skip connection changes the output") {
  Rng rng(31);
  auto cfg = toy_config();
  ResUNetSeparator<double> sep(cfg, rng);
  FilmGenerator<double> gen(8, cfg.film_channel_layout(), rng);
  auto mag = random_mag({1, 1, 8, 33}, 5);
  auto e = random_mag({1, 8}, 6);
  Tape<double> t1, t2;
  auto full = sep.forward(t1, mag, gen.forward(t1, e), BnMode::Eval);
  auto cut = sep.forward(t2, mag, gen.forward(t2, e), BnMode::Eval, /*debug_zero_skip=*/0);
  double diff = 0.0;
  for (size_t i = 0; i < full.mask->numel(); ++i)
    diff = std::max(diff, std::abs(full.mask->data[i] - cut.mask->data[i]));
  CHECK(diff > 0.0);
}

TEST_CASE("query-encoder weights receive gradient through the whole chain") {
  model::LassNet<double> net(toy_model_config(), query::Vocabulary({"tone", "noise"}),
                             data::all_tags(), 13);
  auto mag = random_mag({2, 1, 8, 33}, 31);
  auto tgt = random_mag({2, 1, 8, 33}, 32);
  for (auto& p : net.parameters()) p.tensor->zero_grad();
  Tape<double> t;
  auto out = net.forward_text(t, mag, {{1, 3}, {1, 4}}, BnMode::Train);
  auto loss = ad::mae_loss(t, ad::mul(t, out.mask, mag), tgt);
  t.backward(loss);
  double total = 0.0;
  for (auto& p : net.parameters())
    if (p.name.rfind("query/", 0) == 0)
      for (double g : p.tensor->grad) total += std::abs(g);
  CHECK(total > 0.0);
}

TEST_CASE("predict_source keeps length, is deterministic, and mask-ones is identity") {
  model::ModelConfig mc = toy_model_config();
  // frame 64 -> 33 bins, matching the toy separator depth
  mc.stft_frame = 64;
  mc.stft_hop = 32;
  model::LassNet<float> net(mc, query::Vocabulary({"tone", "beep"}), data::all_tags(), 41);

  dsp::Waveform x;
  x.samples.resize(32000);
  Rng rng(55);
  for (auto& v : x.samples) v = rng.uniform(-0.5, 0.5);

  auto y1 = model::predict_source(net, x, "a tone");
  auto y2 = model::predict_source(net, x, "a tone");
  CHECK(y1.samples.size() == x.samples.size());
  CHECK(y1.samples == y2.samples);

  model::PredictOptions opt;
  opt.mask_ones = true;
  auto ident = model::predict_source(net, x, "anything", opt);
  double diff = 0.0;
  for (size_t i = 0; i < x.samples.size(); ++i)
    diff = std::max(diff, std::abs(ident.samples[i] - x.samples[i]));
  CHECK(diff < 1e-9);

  dsp::Waveform wrong_rate = x;
  wrong_rate.sample_rate = 16000;
  CHECK_THROWS(model::predict_source(net, wrong_rate, "a tone"));

  // empty query degrades to the bare <SOS> embedding
  auto empty = model::predict_source(net, x, "");
  CHECK(empty.samples.size() == x.samples.size());
}
