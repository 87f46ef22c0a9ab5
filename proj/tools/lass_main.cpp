#include <cstdio>
#include <exception>

#include "CLI11.hpp"
#include "lass/cli_commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"lass - language-queried audio source separation"};
  app.require_subcommand(1);

  lass::cli::SynthDataArgs synth;
  auto* synth_cmd = app.add_subcommand("synth-data", "Materialize a test-set manifest + WAVs");
  synth_cmd->add_option("--targets", synth.targets, "Number of target clips");
  synth_cmd->add_option("--backgrounds", synth.backgrounds_per_target,
                        "Backgrounds mixed per target");
  synth_cmd->add_option("--seed", synth.seed, "Dataset seed");
  synth_cmd->add_option("--duration", synth.duration_s, "Clip length in seconds");
  synth_cmd->add_option("--snr-db", synth.snr_db, "Mixing ratio in dB");
  synth_cmd->add_option("--two-event-fraction", synth.two_event_fraction,
                        "Fraction of targets made of two events");
  synth_cmd->add_option("--out", synth.out_dir, "Output directory")->required();

  lass::cli::TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a separation model");
  train_cmd->add_option("--config", train.config_path, "key=value config file");
  train_cmd->add_option("--set", train.overrides, "Override, e.g. --set iterations=100");
  train_cmd->add_option("--resume", train.resume_checkpoint, "Checkpoint to resume from");
  train_cmd->add_option("--log", train.log_path, "Loss log file (tab separated)");

  lass::cli::SeparateArgs sep;
  auto* sep_cmd = app.add_subcommand("separate", "Extract the queried source from a mixture");
  sep_cmd->add_option("mixture", sep.mixture_wav, "Input mixture WAV")->required();
  sep_cmd->add_option("--checkpoint", sep.checkpoint, "Model checkpoint")->required();
  sep_cmd->add_option("--out", sep.out_wav, "Output WAV")->required();
  sep_cmd->add_option("--query", sep.query_text, "Natural-language query");
  sep_cmd->add_option("--tags", sep.tags, "Tag query (tag-mode checkpoints)");
  sep_cmd->add_flag("--mask-ones", sep.mask_ones, "Debug: skip the model, unit mask");
  sep_cmd->add_option("--dump-spectrograms", sep.dump_spectrograms,
                      "Write magnitude grids as text into this directory");

  lass::cli::EvaluateArgs eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "Run the metric suite over a manifest");
  eval_cmd->add_option("manifest", eval.manifest, "Manifest (JSON lines)")->required();
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Model checkpoint")->required();
  eval_cmd->add_option("--report", eval.report_json, "Report JSON path");
  eval_cmd->add_option("--csv", eval.report_csv, "Report CSV path");
  eval_cmd->add_option("--caption-mode", eval.caption_mode, "manifest | heldout | average");
  eval_cmd->add_flag("--use-tags", eval.use_tags, "Query with tag multi-hot");
  eval_cmd->add_option("--bss-taps", eval.bss_taps, "Distortion filter length");

  bool shallow = false;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  grad_cmd->add_flag("--skip-composed", shallow, "Skip the composed-model check");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth_cmd->parsed()) return lass::cli::cmd_synth_data(synth);
    if (train_cmd->parsed()) return lass::cli::cmd_train(train);
    if (sep_cmd->parsed()) return lass::cli::cmd_separate(sep);
    if (eval_cmd->parsed()) return lass::cli::cmd_evaluate(eval);
    if (grad_cmd->parsed()) return lass::cli::cmd_gradcheck(!shallow);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
  return 0;
}
