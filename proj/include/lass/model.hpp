#pragma once

#include <memory>
#include <string>
#include <vector>

#include "lass/dsp.hpp"
#include "lass/query_encoder.hpp"
#include "lass/separator.hpp"
#include "lass/vocab.hpp"

namespace lass::model {

using ad::BnMode;
using ad::NamedParam;
using ad::Tape;
using ad::Tensor;
using ad::TensorPtr;

enum class QueryMode { Language, Tag };

struct ModelConfig {
  QueryMode mode = QueryMode::Language;
  query::QueryEncoderConfig query;  // vocab_size filled from the vocabulary
  sep::SeparatorConfig separator;
  size_t stft_frame = 1024;
  size_t stft_hop = 512;
};

// The full network: a query encoder feeding FiLM generators that condition
// the mask-predicting separator.
template <typename S>
class LassNet {
 public:
  LassNet(ModelConfig cfg, query::Vocabulary vocab, std::vector<std::string> tags,
          uint64_t seed);

  struct Output {
    TensorPtr<S> latent;  // Z [N, 1, T, F]
    TensorPtr<S> mask;    // M = sigmoid(Z)
    TensorPtr<S> query_embedding;
  };

  // Language-mode batch: one token sequence per batch element.
  Output forward_text(Tape<S>& tape, const TensorPtr<S>& magnitude,
                      const std::vector<std::vector<int>>& token_batch, BnMode mode,
                      int debug_zero_skip = -1);

  // Tag-mode batch: multi_hot [N, n_tags].
  Output forward_tags(Tape<S>& tape, const TensorPtr<S>& magnitude,
                      const TensorPtr<S>& multi_hot, BnMode mode);

  std::vector<NamedParam<S>> parameters();
  std::vector<std::pair<std::string, Tensor<S>*>> buffers();

  const ModelConfig& config() const { return cfg_; }
  const query::Vocabulary& vocab() const { return vocab_; }
  const std::vector<std::string>& tags() const { return tags_; }
  sep::ResUNetSeparator<S>& separator() { return separator_; }
  query::TextQueryEncoder<S>* text_encoder() { return text_encoder_.get(); }
  query::TagQueryEncoder<S>* tag_encoder() { return tag_encoder_.get(); }
  const sep::FilmGenerator<S>& film_generator() const { return film_gen_; }

  // Multi-hot over this model's tag list; unknown tags are an error.
  std::vector<S> tags_to_multihot(const std::vector<std::string>& active) const;

 private:
  ModelConfig cfg_;
  query::Vocabulary vocab_;
  std::vector<std::string> tags_;
  std::unique_ptr<query::TextQueryEncoder<S>> text_encoder_;
  std::unique_ptr<query::TagQueryEncoder<S>> tag_encoder_;
  sep::FilmGenerator<S> film_gen_;
  sep::ResUNetSeparator<S> separator_;
};

struct PredictOptions {
  bool mask_ones = false;  // debug hook: skip the model, pass the mixture through
};

// stft -> mask -> apply with the mixture phase -> istft, trimmed to len(x).
dsp::Waveform predict_source(LassNet<float>& net, const dsp::Waveform& x,
                             const std::string& query_text, const PredictOptions& opt = {});

dsp::Waveform predict_source_tags(LassNet<float>& net, const dsp::Waveform& x,
                                  const std::vector<std::string>& query_tags,
                                  const PredictOptions& opt = {});

// Shared helper: run the separator over a spectrogram magnitude and return the
// mask (language or tag mode picked by the arguments given).
dsp::Mask predict_mask(LassNet<float>& net, const dsp::ComplexSpectrogram& spec,
                       const std::string* query_text,
                       const std::vector<std::string>* query_tags);

}  // namespace lass::model
