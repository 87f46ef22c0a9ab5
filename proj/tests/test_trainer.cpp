#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "lass/trainer.hpp"

using namespace lass;
using namespace lass::train;

namespace {

// Tiny everything: short clips, small net, small batch. frame 128 -> 65 bins,
// so the depth-2 separator sees a 64-row grid.
TrainConfig tiny_config(const std::string& out_dir) {
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.iterations = 8;
  cfg.seed = 77;
  cfg.checkpoint_interval = 0;
  cfg.out_dir = out_dir;
  cfg.stft_frame = 128;
  cfg.stft_hop = 64;
  cfg.clip_seconds = 0.05;
  cfg.d_q = 16;
  cfg.query_dim = 16;
  cfg.query_blocks = 1;
  cfg.query_heads = 2;
  cfg.encoder_channels = {2, 4};
  cfg.final_channels = 4;
  cfg.log_every = 1000;
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config text round trip") {
  TrainConfig cfg = tiny_config("x");
  cfg.mode = "tag";
  cfg.lr = 1.5e-4;
  cfg.two_event_fraction = 0.25;
  auto parsed = TrainConfig::from_text(cfg.to_text());
  CHECK(parsed.to_text() == cfg.to_text());
  CHECK(parsed.mode == "tag");
  CHECK(parsed.encoder_channels == std::vector<size_t>{2, 4});
  CHECK(parsed.lr == doctest::Approx(1.5e-4));
  CHECK_THROWS(TrainConfig::from_text("bogus_key=1\n"));
  CHECK_THROWS(TrainConfig::from_text("no equals sign"));
}

TEST_CASE("defaults follow the training recipe") {
  TrainConfig cfg;
  CHECK(cfg.batch_size == 16);
  CHECK(cfg.lr == doctest::Approx(3e-4));
  CHECK(cfg.stft_frame == 1024);
  CHECK(cfg.stft_hop == 512);
}

TEST_CASE("checkpoint save -> load -> save is byte-identical") {
  auto cfg = tiny_config("ckpt_test_run");
  cfg.iterations = 3;
  auto state = TrainerState::fresh(cfg);
  auto result = train_loop(state, nullptr);
  const std::string again = cfg.out_dir + "/copy.lassckpt";
  auto loaded = TrainerState::from_checkpoint(result.checkpoint_path);
  loaded.save(again);
  CHECK(slurp(result.checkpoint_path) == slurp(again));
  CHECK(loaded.step == 3);
  std::filesystem::remove_all(cfg.out_dir);
}

TEST_CASE("loading into a mismatched layout names the offending tensor") {
  auto cfg = tiny_config("ckpt_mismatch_run");
  cfg.iterations = 1;
  auto state = TrainerState::fresh(cfg);
  auto result = train_loop(state, nullptr);

  // Corrupt one tensor's shape in the file by rewriting records.
  auto recs = read_checkpoint(result.checkpoint_path);
  bool touched = false;
  for (auto& r : recs)
    if (r.name == "separator/enc0/a/conv/weight") {
      r.shape = {1, 1, 4, 4};
      r.f32.assign(16, 0.0f);
      touched = true;
    }
  REQUIRE(touched);
  const std::string bad = cfg.out_dir + "/bad.lassckpt";
  write_checkpoint(bad, recs);
  CHECK_THROWS_WITH_AS(TrainerState::from_checkpoint(bad),
                       doctest::Contains("separator/enc0/a/conv/weight"),
                       std::runtime_error);
  std::filesystem::remove_all(cfg.out_dir);
}

TEST_CASE("unknown tensors in a checkpoint are rejected, not ignored") {
  auto cfg = tiny_config("ckpt_extra_run");
  cfg.iterations = 1;
  auto state = TrainerState::fresh(cfg);
  auto result = train_loop(state, nullptr);
  auto recs = read_checkpoint(result.checkpoint_path);
  recs.push_back(scalar_record("mystery/neuron", 3.14));
  const std::string bad = cfg.out_dir + "/extra.lassckpt";
  write_checkpoint(bad, recs);
  CHECK_THROWS_WITH_AS(TrainerState::from_checkpoint(bad), doctest::Contains("mystery"),
                       std::runtime_error);
  std::filesystem::remove_all(cfg.out_dir);
}

TEST_CASE("truncated checkpoint is an error") {
  auto cfg = tiny_config("ckpt_trunc_run");
  cfg.iterations = 1;
  auto state = TrainerState::fresh(cfg);
  auto result = train_loop(state, nullptr);
  auto bytes = slurp(result.checkpoint_path);
  const std::string bad = cfg.out_dir + "/trunc.lassckpt";
  std::ofstream(bad, std::ios::binary).write(bytes.data(), bytes.size() / 2);
  CHECK_THROWS(TrainerState::from_checkpoint(bad));
  std::filesystem::remove_all(cfg.out_dir);
}

TEST_CASE("identical config and seed give identical loss curves") {
  auto cfg = tiny_config("det_run_a");
  auto s1 = TrainerState::fresh(cfg);
  auto r1 = train_loop(s1, nullptr);
  cfg.out_dir = "det_run_b";
  auto s2 = TrainerState::fresh(cfg);
  auto r2 = train_loop(s2, nullptr);
  CHECK(r1.losses == r2.losses);  // bitwise
  std::filesystem::remove_all("det_run_a");
  std::filesystem::remove_all("det_run_b");
}

TEST_CASE("resumed training is bit-identical to uninterrupted training") {
  auto full_cfg = tiny_config("resume_full");
  full_cfg.iterations = 6;
  auto full = TrainerState::fresh(full_cfg);
  auto full_res = train_loop(full, nullptr);

  auto part_cfg = tiny_config("resume_part");
  part_cfg.iterations = 3;
  auto part = TrainerState::fresh(part_cfg);
  train_loop(part, nullptr);
  auto resumed = TrainerState::from_checkpoint(part_cfg.out_dir + "/checkpoint.lassckpt");
  REQUIRE(resumed.step == 3);
  resumed.cfg.iterations = 6;
  auto resumed_res = train_loop(resumed, nullptr);

  // Same final parameters, bit for bit.
  auto pa = full.net->parameters();
  auto pb = resumed.net->parameters();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].name == pb[i].name);
    CHECK(pa[i].tensor->data == pb[i].tensor->data);
  }
  // And the loss continuation matches the uninterrupted tail.
  REQUIRE(resumed_res.losses.size() == 3);
  for (size_t i = 0; i < 3; ++i) CHECK(resumed_res.losses[i] == full_res.losses[3 + i]);
  std::filesystem::remove_all("resume_full");
  std::filesystem::remove_all("resume_part");
}

TEST_CASE("tag mode trains end to end") {
  auto cfg = tiny_config("tag_run");
  cfg.mode = "tag";
  cfg.iterations = 4;
  auto state = TrainerState::fresh(cfg);
  auto res = train_loop(state, nullptr);
  CHECK(res.losses.size() == 4);
  for (double l : res.losses) CHECK(std::isfinite(l));
  // Round trip keeps the mode.
  auto loaded = TrainerState::from_checkpoint(res.checkpoint_path);
  CHECK(loaded.cfg.mode == "tag");
  CHECK(loaded.net->tag_encoder() != nullptr);
  std::filesystem::remove_all("tag_run");
}

TEST_CASE("overfitting one fixed batch drops the loss at least 10x in 500 steps") {
  auto cfg = tiny_config("overfit_run");
  cfg.overfit_one_batch = true;
  cfg.iterations = 500;
  cfg.lr = 3e-3;
  cfg.seed = 123;
  cfg.encoder_channels = {4, 8};
  auto state = TrainerState::fresh(cfg);
  auto res = train_loop(state, nullptr);
  REQUIRE(res.losses.size() == 500);
  CHECK(res.losses.back() < res.losses.front() / 10.0);
  std::filesystem::remove_all("overfit_run");
}

TEST_CASE("exploding training aborts with a diagnostic instead of writing garbage") {
  auto cfg = tiny_config("nan_run");
  cfg.lr = 1e30;  // guarantees overflow within a few steps
  cfg.iterations = 30;
  cfg.checkpoint_interval = 2;
  auto state = TrainerState::fresh(cfg);
  CHECK_THROWS_AS(train_loop(state, nullptr), std::runtime_error);
  std::filesystem::remove_all("nan_run");
}

TEST_CASE("gradient clipping keeps the exploding run alive") {
  auto cfg = tiny_config("clip_run");
  cfg.lr = 1e30;
  cfg.grad_clip = 1e-3;  // recovery knob: updates stay bounded
  cfg.iterations = 3;
  auto state = TrainerState::fresh(cfg);
  CHECK_THROWS(train_loop(state, nullptr));  // lr is still absurd; weights blow up
  std::filesystem::remove_all("clip_run");
}

TEST_CASE("loss log lines are step TAB loss TAB seconds") {
  auto cfg = tiny_config("log_run");
  cfg.iterations = 2;
  cfg.log_every = 1;
  auto state = TrainerState::fresh(cfg);
  std::ostringstream log;
  train_loop(state, &log);
  std::istringstream lines(log.str());
  std::string line;
  size_t count = 0;
  while (std::getline(lines, line)) {
    ++count;
    std::istringstream fields(line);
    uint64_t step;
    double loss, secs;
    char tab1, tab2;
    fields >> step;
    fields.get(tab1);
    fields >> loss;
    fields.get(tab2);
    fields >> secs;
    CHECK(tab1 == '\t');
    CHECK(tab2 == '\t');
    CHECK(std::isfinite(loss));
    CHECK(secs >= 0.0);
  }
  CHECK(count == 2);
  std::filesystem::remove_all("log_run");
}
