#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dims/config.hpp"

namespace dims::cli {

enum ExitCode : int {
  kOk = 0,
  kGradCheckFailed = 1,
  kUsage = 2,
  kDataError = 3,
  kCheckpointMismatch = 4,
  kNumericFailure = 5,
  kInternal = 6,
};

/// Config keys given explicitly on the command line.
struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;
  std::vector<std::string> ablations;
};

struct Global {
  bool json = false;
};

/// defaults < config file < DIMS_SEED < explicit flags < ablations.
RunConfig resolve_config(const ConfigFlags& flags, const RunConfig& base, bool use_env_seed);

struct TrainArgs {
  ConfigFlags config;
  std::string data;
  std::string val;
  std::string out = "dims-run";
  std::size_t max_steps = 0;
  bool quiet = false;
};

struct EvalArgs {
  ConfigFlags config;
  std::string checkpoint;
  std::string checkpoints;
  std::string report;
  std::string data;
  std::string details;
  std::optional<std::size_t> beam;
  bool greedy = false;
};

struct InferArgs {
  ConfigFlags config;
  std::string checkpoint;
  std::string input;
  std::string id;
  std::string dump_attention;
  std::optional<std::size_t> beam;
  bool greedy = false;
};

struct SynthArgs {
  std::string spec;
  std::string out;
  std::optional<std::int64_t> samples;
  std::optional<std::int64_t> seed;
  std::optional<double> noise;
};

struct GradCheckArgs {
  ConfigFlags config;
  std::string corrupt;
  double tol = 1e-4;
  double eps = 1e-4;
  std::uint64_t seed = 7;
};

int run_train(const Global& g, const TrainArgs& args);
int run_eval(const Global& g, const EvalArgs& args);
int run_infer(const Global& g, const InferArgs& args);
int run_synth(const Global& g, const SynthArgs& args);
int run_gradcheck(const Global& g, const GradCheckArgs& args);

}  // namespace dims::cli
