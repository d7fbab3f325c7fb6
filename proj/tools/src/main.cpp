#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"

using namespace dims::cli;

namespace {

void add_config_flags(CLI::App* app, ConfigFlags& flags) {
  app->add_option("--config", flags.config_file, "JSON config file with flat keys")
      ->check(CLI::ExistingFile);
  app->add_option("--ablation", flags.ablations,
                  "disable_conditional_self_attention (dims-s) or disable_global_attention (dims-g)");
  const dims::RunConfig defaults;
  for (const auto& key : dims::RunConfig::keys()) {
    app->add_option_function<std::string>(
           "--" + key, [&flags, key](const std::string& v) { flags.values[key] = v; },
           "config key (default " + defaults.get(key) + ")")
        ->group("Config keys");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal article/video summarizer: training, evaluation and inference"};
  app.require_subcommand(1);
  Global global;
  app.add_flag("--json", global.json, "machine-readable JSON on stdout");
  app.footer(
      "Exit codes: 0 ok, 1 gradient check failed, 2 usage or config error, 3 data error,\n"
      "            4 checkpoint/config mismatch, 5 non-finite values during training,\n"
      "            6 unexpected internal error.\n"
      "DIMS_SEED overrides the seed from the config file (explicit --seed still wins).");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train a model and write checkpoints");
  add_config_flags(train_cmd, train.config);
  train_cmd->add_option("--data", train.data, "training JSONL manifest")->required();
  train_cmd->add_option("--val", train.val, "validation JSONL manifest");
  train_cmd->add_option("--out", train.out, "output directory")->capture_default_str();
  train_cmd->add_option("--max-steps", train.max_steps, "stop after this many updates");
  train_cmd->add_flag("--quiet", train.quiet, "no per-epoch progress on stderr");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "decode a dataset and report ROUGE, MAP and R@k");
  add_config_flags(eval_cmd, eval.config);
  auto* ckpt = eval_cmd->add_option("--checkpoint", eval.checkpoint, "checkpoint directory");
  auto* ckpts = eval_cmd->add_option("--checkpoints", eval.checkpoints,
                                     "run directory holding ckpt-* checkpoints (with --report)");
  ckpt->excludes(ckpts);
  eval_cmd->add_option("--report", eval.report, "avg5: average over the best checkpoints")
      ->check(CLI::IsMember({"avg5"}))
      ->needs(ckpts);
  eval_cmd->add_option("--data", eval.data, "JSONL manifest")->required();
  eval_cmd->add_option("--details", eval.details, "write per-sample outputs as JSONL");
  eval_cmd->add_option("--beam", eval.beam, "beam size (default: config beam_size)");
  eval_cmd->add_flag("--greedy", eval.greedy, "argmax decoding");

  InferArgs infer;
  auto* infer_cmd = app.add_subcommand("infer", "summarize one sample and pick its cover");
  add_config_flags(infer_cmd, infer.config);
  infer_cmd->add_option("--checkpoint", infer.checkpoint, "checkpoint directory")->required();
  infer_cmd->add_option("--input", infer.input, "JSONL manifest")->required();
  infer_cmd->add_option("--id", infer.id, "sample id (default: first record)");
  infer_cmd->add_option("--beam", infer.beam, "beam size (default: config beam_size)");
  infer_cmd->add_flag("--greedy", infer.greedy, "argmax decoding");
  infer_cmd->add_option("--dump-attention", infer.dump_attention,
                        "write the token x segment global attention scores as JSON");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  synth_cmd->add_option("--spec", synth.spec, "JSON synthetic spec")->check(CLI::ExistingFile);
  synth_cmd->add_option("--out", synth.out, "output JSONL path")->required();
  synth_cmd->add_option("--samples", synth.samples, "override sample count");
  synth_cmd->add_option("--seed", synth.seed, "override seed");
  synth_cmd->add_option("--noise", synth.noise, "override noise level");

  GradCheckArgs grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of every parameter");
  add_config_flags(grad_cmd, grad.config);
  grad_cmd->add_option("--corrupt", grad.corrupt, "perturb this parameter's gradient (test hook)");
  grad_cmd->add_option("--tol", grad.tol, "relative error tolerance")->capture_default_str();
  grad_cmd->add_option("--eps", grad.eps, "finite-difference step")->capture_default_str();
  grad_cmd->add_option("--data-seed", grad.seed, "seed for the check batch")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  if (*train_cmd) return run_train(global, train);
  if (*eval_cmd) return run_eval(global, eval);
  if (*infer_cmd) return run_infer(global, infer);
  if (*synth_cmd) return run_synth(global, synth);
  if (*grad_cmd) return run_gradcheck(global, grad);
  return kUsage;
}
