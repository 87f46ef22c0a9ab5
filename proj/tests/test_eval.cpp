#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "lass/metrics.hpp"
#include "lass/trainer.hpp"
#include "lass/wav_io.hpp"

using namespace lass;

namespace {

train::TrainerState tiny_model(const std::string& mode) {
  train::TrainConfig cfg;
  cfg.mode = mode;
  cfg.batch_size = 2;
  cfg.iterations = 1;
  cfg.clip_seconds = 0.1;
  cfg.d_q = 16;
  cfg.query_dim = 16;
  cfg.query_blocks = 1;
  cfg.query_heads = 2;
  cfg.encoder_channels = {2, 4};
  cfg.final_channels = 4;
  return train::TrainerState::fresh(cfg);
}

std::vector<data::MixtureRecord> tiny_manifest() {
  data::CorpusConfig cc;
  cc.duration_s = 0.1;
  data::Corpus corpus(cc);
  return corpus.build_test_set(3, 2, 321);
}

}  // namespace

TEST_CASE("evaluate reports unprocessed and model rows over every record") {
  auto state = tiny_model("language");
  auto records = tiny_manifest();
  metrics::EvalOptions opt;
  opt.bss_taps = 16;
  auto rep = metrics::evaluate_testset(*state.net, records, opt);
  REQUIRE(rep.rows.size() == 2);
  const auto* unproc = rep.row("unprocessed");
  const auto* model = rep.row("model");
  REQUIRE(unproc);
  REQUIRE(model);
  CHECK(unproc->examples.size() == records.size());
  CHECK(model->examples.size() == records.size());
  for (const auto& e : model->examples) CHECK(e.ok);
  // 0 dB two-source mixtures: unprocessed SI-SDR hugs 0 dB.
  CHECK(std::abs(unproc->si_sdr.median) < 1.0);
}

TEST_CASE("evaluation is deterministic given checkpoint and manifest") {
  auto state = tiny_model("language");
  auto records = tiny_manifest();
  metrics::EvalOptions opt;
  opt.bss_taps = 16;
  auto r1 = metrics::evaluate_testset(*state.net, records, opt);
  auto r2 = metrics::evaluate_testset(*state.net, records, opt);
  for (size_t row = 0; row < 2; ++row) {
    REQUIRE(r1.rows[row].examples.size() == r2.rows[row].examples.size());
    for (size_t i = 0; i < r1.rows[row].examples.size(); ++i) {
      CHECK(r1.rows[row].examples[i].values.sdr == r2.rows[row].examples[i].values.sdr);
      CHECK(r1.rows[row].examples[i].values.si_sdr ==
            r2.rows[row].examples[i].values.si_sdr);
    }
  }
}

TEST_CASE("caption modes: heldout re-renders, average folds all paraphrases") {
  auto state = tiny_model("language");
  auto records = tiny_manifest();
  metrics::EvalOptions opt;
  opt.bss_taps = 16;
  auto seen = metrics::evaluate_testset(*state.net, records, opt);
  opt.caption_mode = metrics::CaptionMode::Heldout;
  auto held = metrics::evaluate_testset(*state.net, records, opt);
  opt.caption_mode = metrics::CaptionMode::Average;
  auto avg = metrics::evaluate_testset(*state.net, records, opt);
  CHECK(held.caption_mode == "heldout");
  CHECK(avg.row("model")->examples.size() == records.size());
  // The unprocessed row never depends on the caption mode.
  for (size_t i = 0; i < records.size(); ++i)
    CHECK(seen.row("unprocessed")->examples[i].values.sdr ==
          held.row("unprocessed")->examples[i].values.sdr);
}

TEST_CASE("tag mode evaluates through the same pipeline") {
  auto state = tiny_model("tag");
  auto records = tiny_manifest();
  metrics::EvalOptions opt;
  opt.bss_taps = 16;
  opt.use_tags = true;
  auto rep = metrics::evaluate_testset(*state.net, records, opt);
  CHECK(rep.caption_mode == "tags");
  for (const auto& e : rep.row("model")->examples) CHECK(e.ok);
}

TEST_CASE("evaluate reads materialized WAVs and records per-example failures") {
  auto state = tiny_model("language");
  auto records = tiny_manifest();
  const std::string dir = "eval_wav_dir";
  std::filesystem::create_directories(dir);
  for (size_t i = 0; i < records.size(); ++i) {
    data::realize_record(records[i], records[i].snr_db);
    records[i].mixture_wav = records[i].id + "_mix.wav";
    records[i].target_wav = records[i].id + "_tgt.wav";
    dsp::write_wav(dir + "/" + records[i].mixture_wav, records[i].mixture);
    dsp::write_wav(dir + "/" + records[i].target_wav, records[i].target);
    records[i].mixture.samples.clear();
    records[i].target.samples.clear();
  }
  // Break one file: that example must fail, the run must continue.
  std::ofstream(dir + "/" + records[1].mixture_wav, std::ios::trunc) << "not a wav";

  metrics::EvalOptions opt;
  opt.bss_taps = 16;
  opt.audio_dir = dir;
  auto rep = metrics::evaluate_testset(*state.net, records, opt);
  const auto* model = rep.row("model");
  REQUIRE(model->examples.size() == records.size());
  CHECK(model->examples[0].ok);
  CHECK(!model->examples[1].ok);
  CHECK(!model->examples[1].error.empty());
  CHECK(model->examples[2].ok);
  std::filesystem::remove_all(dir);
}
