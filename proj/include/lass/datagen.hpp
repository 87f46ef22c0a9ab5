#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lass/dsp.hpp"
#include "lass/rng.hpp"
#include "lass/vocab.hpp"

namespace lass::data {

enum class SoundClass {
  Tone,
  ChirpUp,
  ChirpDown,
  WhiteNoise,
  PinkNoise,
  AmTone,
  ClickTrain,
  SquareWave,
};

inline constexpr size_t kNumClasses = 8;

const std::string& class_tag(SoundClass c);
SoundClass class_from_tag(const std::string& tag);
// All tags, sorted; the multi-hot axis for the tag baseline.
const std::vector<std::string>& all_tags();

struct EventSpec {
  SoundClass cls = SoundClass::Tone;
  double freq_hz = 0.0;   // tonal classes; chirp start
  double freq2_hz = 0.0;  // chirp end
  double rate_hz = 0.0;   // am / click rate
};

// A deterministic synthetic source: one event, or two events joined in time.
struct SourceSpec {
  std::vector<EventSpec> events;  // 1 or 2
  double duration_s = 1.0;
  uint64_t seed = 0;

  std::vector<std::string> tags() const;
};

// 32 kHz, peak-normalized to 0.5, bit-identical for identical (spec, seed).
dsp::Waveform synthesize_source(const SourceSpec& spec);

// Caption machinery. Paraphrase ids [0, seen_paraphrase_count) appear in
// training captions; the rest are held out for the robustness experiment.
size_t paraphrase_count();
size_t seen_paraphrase_count();
std::string render_caption(const SourceSpec& spec, int paraphrase_id);
// Vocabulary over every template (seen and held out) with all slot fills.
query::Vocabulary build_vocabulary();

// Background scaled to the requested SNR (energy convention), then summed.
// Returns (mixture, scaled_background); the shorter signal is looped with a
// 10 ms crossfade and trimmed to the target length first.
std::pair<dsp::Waveform, dsp::Waveform> make_mixture(const dsp::Waveform& target,
                                                     const dsp::Waveform& background,
                                                     double snr_db = 0.0);

dsp::Waveform loop_to_length(const dsp::Waveform& w, size_t length, double crossfade_s = 0.01);

struct MixtureRecord {
  std::string id;
  SourceSpec target_spec;
  SourceSpec background_spec;
  std::string caption;
  int paraphrase_id = 0;
  std::vector<std::string> target_tags;
  std::vector<std::string> background_tags;
  uint64_t seed = 0;
  double snr_db = 0.0;
  // Relative WAV paths, set once materialized.
  std::string mixture_wav;
  std::string target_wav;

  dsp::Waveform mixture;  // filled by synthesis helpers, empty in manifests
  dsp::Waveform target;
};

struct CorpusConfig {
  double duration_s = 0.25;
  double snr_db = 0.0;
  double two_event_fraction = 0.0;  // probability a target has two events
  std::vector<SoundClass> classes = {
      SoundClass::Tone,       SoundClass::ChirpUp,   SoundClass::ChirpDown,
      SoundClass::WhiteNoise, SoundClass::PinkNoise, SoundClass::AmTone,
      SoundClass::ClickTrain, SoundClass::SquareWave,
  };
};

class Corpus {
 public:
  explicit Corpus(CorpusConfig cfg);

  const CorpusConfig& config() const { return cfg_; }

  SourceSpec sample_target(Rng& rng) const;
  // Single-event background whose tags are disjoint from `taken`.
  SourceSpec sample_background(Rng& rng, const std::vector<std::string>& taken) const;

  // On-the-fly training batch with synthesized audio; a pure function of rng.
  std::vector<MixtureRecord> next_training_batch(size_t batch_size, Rng& rng,
                                                 bool heldout_captions = false) const;

  // Deterministic records without audio: n_targets * backgrounds_per_target.
  std::vector<MixtureRecord> build_test_set(size_t n_targets, size_t backgrounds_per_target,
                                            uint64_t seed) const;

 private:
  CorpusConfig cfg_;
};

// Synthesizes the audio for a manifest record (mixture, target).
void realize_record(MixtureRecord& rec, double snr_db);

// JSON-lines manifest, one record per line; audio fields are path references.
void write_manifest(const std::string& path, const std::vector<MixtureRecord>& records);
std::vector<MixtureRecord> read_manifest(const std::string& path);

}  // namespace lass::data
