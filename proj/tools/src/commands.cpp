#include "commands.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "dims/checkpoint.hpp"
#include "dims/data.hpp"
#include "dims/encoders.hpp"
#include "dims/model_check.hpp"
#include "dims/synthetic.hpp"
#include "dims/training.hpp"
#include "json.hpp"

namespace dims::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// Maps library exceptions onto exit codes. `input_code` is what an input that
// does not fit the model means for the calling command.
int guarded(const std::function<int()>& body, int input_code) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << "config error [" << e.key() << "]: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << '\n';
    return kCheckpointMismatch;
  } catch (const InputError& e) {
    std::cerr << (input_code == kDataError ? "data error: " : "input does not fit the model: ")
              << e.what() << '\n';
    return input_code;
  } catch (const TrainingError& e) {
    std::cerr << "training aborted: " << e.what() << '\n' << e.diagnostics();
    return kNumericFailure;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}

std::vector<Sample> load_or_fail(const std::string& path, const RunConfig& config,
                                 bool allow_empty = false) {
  if (!fs::exists(path)) throw DataError("no such file: " + path);
  LoadOptions opts;
  opts.max_article = static_cast<std::size_t>(config.encode_steps);
  opts.max_summary = static_cast<std::size_t>(config.max_decode);
  LoadReport report;
  auto samples = load_dataset(path, opts, &report);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
  for (const auto& e : report.errors) std::cerr << "skipped: " << e << '\n';
  if (samples.empty() && !allow_empty) throw DataError(path + " contains no usable samples");
  return samples;
}

json rouge_json(const metrics::RougeScore& r) {
  auto one = [](const metrics::RougeComponent& c) {
    return json{{"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}};
  };
  return {{"rouge1", one(r.rouge1)}, {"rouge2", one(r.rouge2)}, {"rougeL", one(r.rougeL)}};
}

json eval_json(const EvalResult& r) {
  json out = {{"rouge1", r.rouge.rouge1.f1}, {"rouge2", r.rouge.rouge2.f1},
              {"rougeL", r.rouge.rougeL.f1}, {"map", r.map}};
  json at = json::object();
  for (const auto& [k, v] : r.recall) at[std::to_string(k)] = v;
  out["r_at_k"] = at;
  out["candidates"] = r.candidates;
  out["samples"] = r.samples.size();
  out["rouge_detail"] = rouge_json(r.rouge);
  return out;
}

void print_eval_text(const EvalResult& r) {
  std::cout << "ROUGE-1 " << r.rouge.rouge1.f1 << "  ROUGE-2 " << r.rouge.rouge2.f1 << "  ROUGE-L "
            << r.rouge.rougeL.f1 << '\n'
            << "MAP " << r.map;
  for (const auto& [k, v] : r.recall) std::cout << "  R" << r.candidates << "@" << k << " " << v;
  std::cout << '\n';
}

void write_details(const std::string& path, const EvalResult& r) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& s : r.samples) {
    json line = {{"id", s.id},
                 {"summary", s.summary},
                 {"reference", s.reference},
                 {"cover", s.cover},
                 {"positive", s.positive},
                 {"cover_scores", s.cover_scores},
                 {"rouge", rouge_json(s.rouge)}};
    out << line.dump() << '\n';
  }
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

/// Checkpoint config with explicit flags applied on top; the seed env var is
/// irrelevant once a model exists.
RunConfig checkpoint_config(const fs::path& dir, const ConfigFlags& flags) {
  return resolve_config(flags, read_checkpoint_config(dir), false);
}

std::vector<fs::path> best_checkpoints(const fs::path& run_dir, std::size_t limit) {
  if (!fs::is_directory(run_dir)) throw CheckpointError("no such directory: " + run_dir.string());
  std::vector<std::pair<double, fs::path>> found;
  for (const auto& entry : fs::directory_iterator(run_dir)) {
    if (!entry.is_directory() || !entry.path().filename().string().starts_with("ckpt-")) continue;
    if (!fs::exists(entry.path() / "manifest.json")) continue;
    auto meta = read_checkpoint_meta(entry.path());
    auto it = meta.metrics.find("val_rouge_l");
    found.emplace_back(it == meta.metrics.end() ? 0.0 : it->second, entry.path());
  }
  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  if (found.size() > limit) found.resize(limit);
  std::vector<fs::path> out;
  for (auto& [score, path] : found) out.push_back(path);
  return out;
}

}  // namespace

RunConfig resolve_config(const ConfigFlags& flags, const RunConfig& base, bool use_env_seed) {
  RunConfig config = flags.config_file.empty() ? base : RunConfig::from_file(flags.config_file);
  if (use_env_seed) {
    if (const char* env = std::getenv("DIMS_SEED"); env != nullptr && *env != '\0') {
      config.set("seed", env);
    }
  }
  for (const auto& [key, value] : flags.values) config.set(key, value);
  for (const auto& a : flags.ablations) config.apply_ablation(a);
  config.validate();
  return config;
}

int run_train(const Global& g, const TrainArgs& args) {
  return guarded(
      [&] {
        const auto config = resolve_config(args.config, RunConfig{}, true);
        auto train = load_or_fail(args.data, config);
        std::vector<Sample> val;
        if (!args.val.empty()) val = load_or_fail(args.val, config);
        auto vocab = Vocabulary::build(train, static_cast<std::size_t>(config.vocab_size));

        TrainerOptions opts;
        opts.out_dir = args.out;
        opts.max_steps = args.max_steps;
        double epoch_seq = 0, epoch_pic = 0;
        std::size_t epoch_steps = 0;
        std::size_t steps_per_epoch = 1;
        opts.on_step = [&](const StepRecord& rec) {
          epoch_seq += rec.seq_loss;
          epoch_pic += rec.pic_loss;
          ++epoch_steps;
          if (rec.step % steps_per_epoch != 0 && !rec.val_map) return;
          if (!args.quiet) {
            std::cerr << "epoch " << rec.epoch + 1 << " step " << rec.step << " seq "
                      << epoch_seq / static_cast<double>(epoch_steps) << " pic "
                      << epoch_pic / static_cast<double>(epoch_steps);
            if (rec.val_rouge_l) {
              std::cerr << " val_rougeL " << *rec.val_rouge_l << " val_map " << *rec.val_map;
            }
            std::cerr << '\n';
          }
          epoch_seq = epoch_pic = 0;
          epoch_steps = 0;
        };
        Trainer trainer(config, std::move(vocab), std::move(train), std::move(val), opts);
        steps_per_epoch = trainer.steps_per_epoch();
        auto run = trainer.run();
        json out = {{"steps", run.final_step},
                    {"out", args.out},
                    {"last_seq_loss", run.steps.empty() ? 0.0 : run.steps.back().seq_loss},
                    {"last_pic_loss", run.steps.empty() ? 0.0 : run.steps.back().pic_loss}};
        json kept = json::array();
        for (const auto& p : run.kept_checkpoints) kept.push_back(p.string());
        out["best_checkpoints"] = kept;
        if (g.json) {
          std::cout << out.dump() << '\n';
        } else {
          std::cout << "trained " << run.final_step << " steps; checkpoints in " << args.out << '\n';
        }
        return int{kOk};
      },
      kDataError);
}

int run_eval(const Global& g, const EvalArgs& args) {
  return guarded(
      [&]() -> int {
        std::vector<fs::path> dirs;
        if (!args.checkpoints.empty()) {
          if (args.report != "avg5") {
            std::cerr << "--checkpoints requires --report avg5\n";
            return kUsage;
          }
          dirs = best_checkpoints(args.checkpoints, 5);
          if (dirs.empty()) throw CheckpointError("no checkpoints under " + args.checkpoints);
          if (dirs.size() < 5) {
            std::cerr << "warning: only " << dirs.size() << " checkpoints available\n";
          }
        } else if (!args.checkpoint.empty()) {
          dirs.push_back(args.checkpoint);
        } else {
          std::cerr << "eval needs --checkpoint or --checkpoints with --report avg5\n";
          return kUsage;
        }

        std::vector<EvalResult> results;
        for (const auto& dir : dirs) {
          const auto config = checkpoint_config(dir, args.config);
          auto samples = load_or_fail(args.data, config);
          auto ckpt = load_checkpoint(dir, config);
          EvalOptions opts;
          opts.beam_size = args.beam.value_or(static_cast<std::size_t>(config.beam_size));
          opts.greedy = args.greedy;
          results.push_back(evaluate(*ckpt.model, ckpt.vocab, samples, opts));
        }
        const auto summary = results.size() == 1 ? results.front() : average_results(results);
        if (!args.details.empty()) write_details(args.details, results.front());
        if (g.json) {
          auto out = eval_json(summary);
          if (dirs.size() > 1 || !args.report.empty()) {
            json used = json::array();
            for (const auto& d : dirs) used.push_back(d.string());
            out["checkpoints"] = used;
          }
          std::cout << out.dump() << '\n';
        } else {
          if (dirs.size() > 1) std::cout << "averaged over " << dirs.size() << " checkpoints\n";
          print_eval_text(summary);
        }
        return kOk;
      },
      kCheckpointMismatch);
}

int run_infer(const Global& g, const InferArgs& args) {
  return guarded(
      [&]() -> int {
        const auto config = checkpoint_config(args.checkpoint, args.config);
        auto samples = load_or_fail(args.input, config);
        const Sample* sample = &samples.front();
        if (!args.id.empty()) {
          auto it = std::find_if(samples.begin(), samples.end(),
                                 [&](const Sample& s) { return s.id == args.id; });
          if (it == samples.end()) throw DataError("no sample with id " + args.id);
          sample = &*it;
        }
        auto ckpt = load_checkpoint(args.checkpoint, config);
        auto ids = encode_sample(*sample, ckpt.vocab);
        const auto beam = args.beam.value_or(static_cast<std::size_t>(config.beam_size));
        auto pred = args.greedy ? ckpt.model->predict_greedy(*sample, ids, ckpt.vocab)
                                : ckpt.model->predict(*sample, ids, ckpt.vocab, beam);

        if (!args.dump_attention.empty()) {
          if (!pred.attention_scores.defined()) {
            std::cerr << "this model has no global attention to dump\n";
            return kUsage;
          }
          const auto& e = pred.attention_scores;
          json rows = json::array();
          for (std::size_t r = 0; r < e.rows(); ++r) {
            json row = json::array();
            for (std::size_t c = 0; c < e.cols(); ++c) row.push_back(e.at(r, c));
            rows.push_back(row);
          }
          const auto seg = static_cast<std::size_t>(config.segment_len);
          json segments = json::array();
          for (const auto& s : segment_frames(sample->frames.count(), seg)) {
            segments.push_back(std::vector<std::size_t>(s.frames.begin(),
                                                        s.frames.begin() + s.real_count));
          }
          std::vector<std::string> tokens(sample->article.begin(),
                                          sample->article.begin() + e.rows());
          json dump = {{"id", sample->id},
                       {"shape", {e.rows(), e.cols()}},
                       {"tokens", tokens},
                       {"segments", segments},
                       {"scores", rows}};
          std::ofstream(args.dump_attention) << dump.dump(2) << '\n';
        }

        if (g.json) {
          json out = {{"id", sample->id},
                      {"summary", join(pred.summary)},
                      {"tokens", pred.summary},
                      {"cover", pred.cover},
                      {"cover_scores", pred.cover_scores},
                      {"log_prob", pred.beam.log_prob},
                      {"ended_with_eos", pred.beam.ended_with_eos}};
          std::cout << out.dump() << '\n';
        } else {
          std::cout << "summary: " << join(pred.summary) << '\n' << "cover: " << pred.cover << '\n';
          std::cout << "scores:";
          for (auto s : pred.cover_scores) std::cout << ' ' << s;
          std::cout << '\n';
        }
        return kOk;
      },
      kCheckpointMismatch);
}

int run_synth(const Global& g, const SynthArgs& args) {
  return guarded(
      [&]() -> int {
        SyntheticSpec spec;
        if (!args.spec.empty()) {
          std::ifstream in(args.spec);
          std::stringstream text;
          text << in.rdbuf();
          spec = SyntheticSpec::from_json(text.str());
        }
        if (args.samples) spec.samples = *args.samples;
        if (args.seed) spec.seed = *args.seed;
        if (args.noise) spec.noise = *args.noise;
        spec.validate();
        auto samples = gen_synthetic(spec);
        save_dataset(args.out, samples);
        if (g.json) {
          std::cout << json{{"samples", samples.size()}, {"out", args.out}}.dump() << '\n';
        } else {
          std::cout << "wrote " << samples.size() << " samples to " << args.out << '\n';
        }
        return kOk;
      },
      kDataError);
}

int run_gradcheck(const Global& g, const GradCheckArgs& args) {
  return guarded(
      [&]() -> int {
        const auto config = resolve_config(args.config, tiny_check_config(), true);
        auto batch = tiny_check_batch(config, args.seed);
        GradCheckOptions opts;
        opts.tol = static_cast<Real>(args.tol);
        opts.eps = static_cast<Real>(args.eps);
        GradHook hook;
        if (!args.corrupt.empty()) {
          DimsModel probe(config, batch.vocab.size());
          if (!probe.parameters().contains(args.corrupt)) {
            std::cerr << "unknown parameter " << args.corrupt << '\n';
            return kUsage;
          }
          hook = [&](const std::string& name, std::span<Real> grad) {
            if (name != args.corrupt) return;
            for (auto& v : grad) v = v * Real{1.5} + Real{0.01};
          };
        }
        auto report = check_model_gradients(config, batch, opts, hook);
        if (g.json) {
          json params = json::array();
          for (const auto& p : report.params) {
            params.push_back({{"name", p.name},
                            {"max_rel_error", p.max_rel_error},
                            {"worst_index", p.worst_index},
                            {"analytic", p.analytic},
                            {"numeric", p.numeric}});
          }
          std::cout << json{{"passed", report.passed},
                            {"max_rel_error", report.max_rel_error},
                            {"worst_param", report.worst_param},
                            {"worst_index", report.worst_index},
                            {"tol", args.tol},
                            {"params", params}}
                           .dump()
                    << '\n';
        } else {
          std::cout << (report.passed ? "PASS" : "FAIL") << " max relative error "
                    << report.max_rel_error << " (tol " << args.tol << "), worst "
                    << report.worst_param << "[" << report.worst_index << "]\n";
        }
        if (!report.diagnostics.empty()) std::cerr << report.diagnostics << '\n';
        if (!report.passed) {
          std::cerr << "gradient check failed at parameter " << report.worst_param << '\n';
          return kGradCheckFailed;
        }
        return kOk;
      },
      kDataError);
}

}  // namespace dims::cli
