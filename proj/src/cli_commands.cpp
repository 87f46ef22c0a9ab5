#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "lass/cli_commands.hpp"
#include "lass/datagen.hpp"
#include "lass/gradcheck.hpp"
#include "lass/metrics.hpp"
#include "lass/trainer.hpp"
#include "lass/wav_io.hpp"

namespace lass::cli {

namespace fs = std::filesystem;

int cmd_synth_data(const SynthDataArgs& args) {
  if (args.out_dir.empty()) throw std::runtime_error("synth-data: --out is required");
  fs::create_directories(args.out_dir);
  fs::create_directories(args.out_dir + "/audio");

  data::CorpusConfig cc;
  cc.duration_s = args.duration_s;
  cc.snr_db = args.snr_db;
  cc.two_event_fraction = args.two_event_fraction;
  data::Corpus corpus(cc);
  auto records = corpus.build_test_set(args.targets, args.backgrounds_per_target, args.seed);
  for (auto& rec : records) {
    data::realize_record(rec, rec.snr_db);
    rec.mixture_wav = "audio/" + rec.id + "_mixture.wav";
    rec.target_wav = "audio/" + rec.id + "_target.wav";
    dsp::write_wav(args.out_dir + "/" + rec.mixture_wav, rec.mixture);
    dsp::write_wav(args.out_dir + "/" + rec.target_wav, rec.target);
  }
  const std::string manifest = args.out_dir + "/manifest.jsonl";
  data::write_manifest(manifest, records);
  std::printf("wrote %zu records (%zu targets x %zu backgrounds) to %s\n", records.size(),
              args.targets, args.backgrounds_per_target, manifest.c_str());
  return 0;
}

int cmd_train(const TrainArgs& args) {
  std::string text;
  if (!args.config_path.empty()) {
    std::ifstream in(args.config_path);
    if (!in) throw std::runtime_error("train: cannot open config " + args.config_path);
    text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    text += "\n";
  }
  for (const auto& kv : args.overrides) text += kv + "\n";

  train::TrainerState state;
  if (!args.resume_checkpoint.empty()) {
    state = train::TrainerState::from_checkpoint(args.resume_checkpoint);
    // Only schedule-level keys may change on resume; the model layout is fixed.
    train::TrainConfig patched = state.cfg;
    train::TrainConfig wanted = train::TrainConfig::from_text(state.cfg.to_text() + text);
    patched.iterations = wanted.iterations;
    patched.out_dir = wanted.out_dir;
    patched.checkpoint_interval = wanted.checkpoint_interval;
    patched.log_every = wanted.log_every;
    if (wanted.to_text() != patched.to_text())
      throw std::runtime_error(
          "train: only iterations/out_dir/checkpoint_interval/log_every may be overridden "
          "when resuming");
    state.cfg = patched;
  } else {
    state = train::TrainerState::fresh(train::TrainConfig::from_text(text));
  }

  std::ofstream log_file;
  if (!args.log_path.empty()) {
    log_file.open(args.log_path);
    if (!log_file) throw std::runtime_error("train: cannot open log " + args.log_path);
  }
  auto result = train::train_loop(state, log_file.is_open()
                                             ? static_cast<std::ostream*>(&log_file)
                                             : static_cast<std::ostream*>(&std::cout));
  std::printf("checkpoint: %s (after %llu steps)\n", result.checkpoint_path.c_str(),
              static_cast<unsigned long long>(state.step));
  return 0;
}

namespace {

void dump_magnitude(const std::string& path, const dsp::ComplexSpectrogram& spec) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("separate: cannot write " + path);
  const size_t F = spec.bins(), T = spec.frames();
  for (size_t f = 0; f < F; ++f) {
    for (size_t t = 0; t < T; ++t) out << (t ? "\t" : "") << spec.magnitude[f * T + t];
    out << "\n";
  }
}

}  // namespace

int cmd_separate(const SeparateArgs& args) {
  auto state = train::TrainerState::from_checkpoint(args.checkpoint);
  auto mix = dsp::read_wav(args.mixture_wav);
  if (mix.sample_rate != dsp::kCanonicalSampleRate)
    throw std::runtime_error("separate: input must be " +
                             std::to_string(dsp::kCanonicalSampleRate) + " Hz, got " +
                             std::to_string(mix.sample_rate));
  const bool tag_mode = state.cfg.mode == "tag";
  if (!args.mask_ones) {
    if (tag_mode && args.tags.empty())
      throw std::runtime_error("separate: checkpoint is tag-queried; pass --tags");
    if (!tag_mode && args.query_text.empty() && !args.tags.empty())
      throw std::runtime_error("separate: checkpoint is language-queried; pass --query");
  }

  model::PredictOptions opt;
  opt.mask_ones = args.mask_ones;
  dsp::Waveform est = tag_mode
                          ? model::predict_source_tags(*state.net, mix, args.tags, opt)
                          : model::predict_source(*state.net, mix, args.query_text, opt);
  dsp::write_wav(args.out_wav, est);

  if (!args.dump_spectrograms.empty()) {
    fs::create_directories(args.dump_spectrograms);
    const auto mix_spec = dsp::stft(mix, state.cfg.stft_frame, state.cfg.stft_hop);
    const auto est_spec = dsp::stft(est, state.cfg.stft_frame, state.cfg.stft_hop);
    dump_magnitude(args.dump_spectrograms + "/mixture_magnitude.txt", mix_spec);
    dump_magnitude(args.dump_spectrograms + "/estimate_magnitude.txt", est_spec);
  }
  std::printf("wrote %s (%zu samples)\n", args.out_wav.c_str(), est.samples.size());
  return 0;
}

int cmd_evaluate(const EvaluateArgs& args) {
  auto state = train::TrainerState::from_checkpoint(args.checkpoint);
  auto records = data::read_manifest(args.manifest);

  metrics::EvalOptions opt;
  opt.bss_taps = args.bss_taps;
  opt.use_tags = args.use_tags || state.cfg.mode == "tag";
  if (args.caption_mode == "manifest") opt.caption_mode = metrics::CaptionMode::Manifest;
  else if (args.caption_mode == "heldout") opt.caption_mode = metrics::CaptionMode::Heldout;
  else if (args.caption_mode == "average") opt.caption_mode = metrics::CaptionMode::Average;
  else throw std::runtime_error("evaluate: unknown caption mode " + args.caption_mode);
  opt.audio_dir = fs::path(args.manifest).parent_path().string();

  auto report = metrics::evaluate_testset(*state.net, records, opt);
  report.manifest_path = args.manifest;
  report.checkpoint_path = args.checkpoint;
  if (!args.report_json.empty()) metrics::write_report_json(args.report_json, report);
  if (!args.report_csv.empty()) {
    std::ofstream out(args.report_csv);
    out << metrics::report_csv(report);
  }
  for (const auto& row : report.rows)
    std::printf("%-12s median SDR %7.2f  SIR %7.2f  SAR %7.2f  SI-SDR %7.2f  (n=%zu, inf=%zu)\n",
                row.name.c_str(), row.sdr.median, row.sir.median, row.sar.median,
                row.si_sdr.median, row.sdr.count, row.sdr.inf_count);
  return 0;
}

int cmd_gradcheck(bool deep) {
  auto results = ad::run_gradcheck_suite(deep);
  int failures = 0;
  for (const auto& r : results) {
    std::printf("%-20s rel_err %.3e  tol %.0e  %s\n", r.name.c_str(), r.rel_err, r.tol,
                r.pass() ? "ok" : "FAIL");
    if (!r.pass()) ++failures;
  }
  if (failures)
    std::printf("gradcheck: %d FAILURES\n", failures);
  else
    std::printf("gradcheck: all %zu checks passed\n", results.size());
  return failures;
}

}  // namespace lass::cli
