#pragma once

#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "lass/adam.hpp"
#include "lass/checkpoint.hpp"
#include "lass/datagen.hpp"
#include "lass/metrics.hpp"
#include "lass/model.hpp"

namespace lass::train {

struct TrainConfig {
  std::string mode = "language";  // or "tag"
  size_t batch_size = 16;
  double lr = 3e-4;
  size_t iterations = 5000;
  uint64_t seed = 1234;
  size_t checkpoint_interval = 1000;
  size_t log_every = 50;
  std::string out_dir = "run";

  size_t stft_frame = 1024;
  size_t stft_hop = 512;
  double clip_seconds = 0.25;
  double snr_db = 0.0;
  double two_event_fraction = 0.0;

  size_t d_q = 64;
  size_t query_dim = 64;
  size_t query_blocks = 2;
  size_t query_heads = 4;
  size_t query_ffn_mult = 4;
  size_t query_max_len = 32;

  std::vector<size_t> encoder_channels = {2, 4, 8, 16};
  size_t final_channels = 8;
  double leaky_slope = 0.01;

  double grad_clip = 0.0;       // 0 disables; recovery knob for NaN blowups
  bool overfit_one_batch = false;

  std::string to_text() const;
  static TrainConfig from_text(const std::string& text);
  static TrainConfig from_file(const std::string& path);
  void validate() const;

  model::ModelConfig to_model_config() const;
  data::CorpusConfig to_corpus_config() const;
};

// Model + optimizer + step counter; everything a checkpoint round-trips.
struct TrainerState {
  TrainConfig cfg;
  std::unique_ptr<model::LassNet<float>> net;
  ad::AdamState<float> adam;
  uint64_t step = 0;

  static TrainerState fresh(const TrainConfig& cfg);
  static TrainerState from_checkpoint(const std::string& path);
  void save(const std::string& path) const;
};

struct TrainResult {
  std::string checkpoint_path;
  std::vector<double> losses;  // one entry per optimizer step taken
};

// Runs state.cfg.iterations - state.step further steps, mixing batches on the
// fly; logs "step<TAB>loss<TAB>seconds" lines. (config, seed) fully determines
// the loss sequence and the resulting weights.
TrainResult train_loop(TrainerState& state, std::ostream* log);

// One training step on an explicit batch; returns the loss. Exposed for the
// fixed-batch overfit check and the trainer tests.
double train_step(TrainerState& state, const std::vector<data::MixtureRecord>& batch);

}  // namespace lass::train
