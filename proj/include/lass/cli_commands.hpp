#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lass::cli {

struct SynthDataArgs {
  size_t targets = 50;
  size_t backgrounds_per_target = 5;
  uint64_t seed = 7;
  double duration_s = 0.25;
  double snr_db = 0.0;
  double two_event_fraction = 0.0;
  std::string out_dir;
};
int cmd_synth_data(const SynthDataArgs& args);

struct TrainArgs {
  std::string config_path;                 // optional key=value file
  std::vector<std::string> overrides;      // key=value, applied after the file
  std::string resume_checkpoint;           // optional
  std::string log_path;                    // optional; stdout always gets the log
};
int cmd_train(const TrainArgs& args);

struct SeparateArgs {
  std::string mixture_wav;
  std::string checkpoint;
  std::string out_wav;
  std::string query_text;          // language mode
  std::vector<std::string> tags;   // tag mode
  bool mask_ones = false;          // debug: identity mask
  std::string dump_spectrograms;   // optional directory for text grids
};
int cmd_separate(const SeparateArgs& args);

struct EvaluateArgs {
  std::string manifest;
  std::string checkpoint;
  std::string report_json;
  std::string report_csv;          // optional
  std::string caption_mode = "manifest";  // manifest | heldout | average
  bool use_tags = false;
  size_t bss_taps = 512;
};
int cmd_evaluate(const EvaluateArgs& args);

// Runs the finite-difference suite; returns the number of failures.
int cmd_gradcheck(bool deep);

}  // namespace lass::cli
