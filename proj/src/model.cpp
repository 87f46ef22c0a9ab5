#include <stdexcept>

#include "lass/model.hpp"

namespace lass::model {

using namespace lass::ad;

template <typename S>
LassNet<S>::LassNet(ModelConfig cfg, query::Vocabulary vocab, std::vector<std::string> tags,
                    uint64_t seed)
    : cfg_(cfg), vocab_(std::move(vocab)), tags_(std::move(tags)) {
  cfg_.separator.validate();
  lass::Rng rng(seed);
  if (cfg_.mode == QueryMode::Language) {
    cfg_.query.vocab_size = vocab_.size();
    cfg_.query.validate();
    text_encoder_ = std::make_unique<query::TextQueryEncoder<S>>(cfg_.query, rng);
  } else {
    if (tags_.empty()) throw std::invalid_argument("model: tag mode needs a tag list");
    tag_encoder_ =
        std::make_unique<query::TagQueryEncoder<S>>(tags_.size(), cfg_.query.out_dim, rng);
  }
  film_gen_ = sep::FilmGenerator<S>(cfg_.query.out_dim,
                                    cfg_.separator.film_channel_layout(), rng);
  separator_ = sep::ResUNetSeparator<S>(cfg_.separator, rng);
}

template <typename S>
typename LassNet<S>::Output LassNet<S>::forward_text(
    Tape<S>& tape, const TensorPtr<S>& magnitude,
    const std::vector<std::vector<int>>& token_batch, BnMode mode, int debug_zero_skip) {
  if (!text_encoder_)
    throw std::invalid_argument("model: text query on a tag-mode checkpoint");
  Output out;
  out.query_embedding = text_encoder_->forward(tape, token_batch);
  auto films = film_gen_.forward(tape, out.query_embedding);
  auto sep_out = separator_.forward(tape, magnitude, films, mode, debug_zero_skip);
  out.latent = sep_out.latent;
  out.mask = sep_out.mask;
  return out;
}

template <typename S>
typename LassNet<S>::Output LassNet<S>::forward_tags(Tape<S>& tape,
                                                     const TensorPtr<S>& magnitude,
                                                     const TensorPtr<S>& multi_hot,
                                                     BnMode mode) {
  if (!tag_encoder_)
    throw std::invalid_argument("model: tag query on a language-mode checkpoint");
  Output out;
  out.query_embedding = tag_encoder_->forward(tape, multi_hot);
  auto films = film_gen_.forward(tape, out.query_embedding);
  auto sep_out = separator_.forward(tape, magnitude, films, mode);
  out.latent = sep_out.latent;
  out.mask = sep_out.mask;
  return out;
}

template <typename S>
std::vector<NamedParam<S>> LassNet<S>::parameters() {
  std::vector<NamedParam<S>> out;
  if (text_encoder_) text_encoder_->collect_params("query", out);
  if (tag_encoder_) tag_encoder_->collect_params("query_tags", out);
  film_gen_.collect_params("film", out);
  separator_.collect_params("separator", out);
  return out;
}

template <typename S>
std::vector<std::pair<std::string, Tensor<S>*>> LassNet<S>::buffers() {
  std::vector<std::pair<std::string, Tensor<S>*>> out;
  separator_.collect_buffers("separator", out);
  return out;
}

template <typename S>
std::vector<S> LassNet<S>::tags_to_multihot(const std::vector<std::string>& active) const {
  std::vector<S> hot(tags_.size(), S(0));
  for (const auto& t : active) {
    bool found = false;
    for (size_t i = 0; i < tags_.size(); ++i)
      if (tags_[i] == t) {
        hot[i] = S(1);
        found = true;
        break;
      }
    if (!found)
      throw std::invalid_argument("model: tag '" + t + "' not in the model's tag vocabulary");
  }
  return hot;
}

template class LassNet<float>;
template class LassNet<double>;

namespace {

// [F, T] double magnitudes -> [1, 1, T, F] model input.
TensorPtr<float> magnitude_to_tensor(const dsp::ComplexSpectrogram& spec) {
  const size_t F = spec.bins(), T = spec.frames();
  auto mag = make_tensor<float>(Shape{1, 1, T, F});
  for (size_t f = 0; f < F; ++f)
    for (size_t t = 0; t < T; ++t)
      mag->data[t * F + f] = static_cast<float>(spec.magnitude[f * T + t]);
  return mag;
}

dsp::Mask mask_from_tensor(const TensorPtr<float>& m, size_t F, size_t T) {
  dsp::Mask mask;
  mask.bins = F;
  mask.frames = T;
  mask.values.resize(F * T);
  for (size_t f = 0; f < F; ++f)
    for (size_t t = 0; t < T; ++t)
      mask.values[f * T + t] = static_cast<double>(m->data[t * F + f]);
  return mask;
}

}  // namespace

dsp::Mask predict_mask(LassNet<float>& net, const dsp::ComplexSpectrogram& spec,
                       const std::string* query_text,
                       const std::vector<std::string>* query_tags) {
  Tape<float> tape;
  auto mag = magnitude_to_tensor(spec);
  LassNet<float>::Output out;
  if (query_text) {
    auto toks = query::tokenize(*query_text, net.vocab());
    out = net.forward_text(tape, mag, {toks.ids}, BnMode::Eval);
  } else if (query_tags) {
    auto hot = net.tags_to_multihot(*query_tags);
    auto mh = make_tensor<float>(Shape{1, net.tags().size()}, std::move(hot));
    out = net.forward_tags(tape, mag, mh, BnMode::Eval);
  } else {
    throw std::invalid_argument("predict_mask: no query given");
  }
  return mask_from_tensor(out.mask, spec.bins(), spec.frames());
}

namespace {

dsp::Waveform predict_impl(LassNet<float>& net, const dsp::Waveform& x,
                           const std::string* text, const std::vector<std::string>* tags,
                           const PredictOptions& opt) {
  if (x.sample_rate != dsp::kCanonicalSampleRate)
    throw std::invalid_argument("predict_source: expected " +
                                std::to_string(dsp::kCanonicalSampleRate) + " Hz input, got " +
                                std::to_string(x.sample_rate));
  const auto spec = dsp::stft(x, net.config().stft_frame, net.config().stft_hop);
  dsp::Mask mask = opt.mask_ones ? dsp::Mask::ones(spec.bins(), spec.frames())
                                 : predict_mask(net, spec, text, tags);
  return dsp::istft(dsp::apply_mask(mask, spec));
}

}  // namespace

dsp::Waveform predict_source(LassNet<float>& net, const dsp::Waveform& x,
                             const std::string& query_text, const PredictOptions& opt) {
  return predict_impl(net, x, &query_text, nullptr, opt);
}

dsp::Waveform predict_source_tags(LassNet<float>& net, const dsp::Waveform& x,
                                  const std::vector<std::string>& query_tags,
                                  const PredictOptions& opt) {
  return predict_impl(net, x, nullptr, &query_tags, opt);
}

}  // namespace lass::model
