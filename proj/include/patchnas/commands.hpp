#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "patchnas/backend.hpp"
#include "patchnas/flops.hpp"
#include "patchnas/search.hpp"

namespace patchnas {

struct RunConfig {
  std::filesystem::path manifest;
  int k = 1;
  std::vector<std::uint64_t> seeds{0};
  int budget = 100;
  std::optional<double> constraint_gflops;
  BackendKind backend = BackendKind::kSynthetic;
  std::string backend_addr;
  std::filesystem::path out = "runs";
  int input_size = kDefaultInputResolution;
  SamplerKind sampler = SamplerKind::kMotpe;
};

// Throws ConfigError unless budget >= 1, seeds is nonempty and
// input_size >= 32.
void validate_run_config(const RunConfig& config);
nlohmann::json run_config_to_json(const RunConfig& config);

struct SeedRun {
  std::uint64_t seed = 0;
  std::filesystem::path dir;  // <out>/<category>/k<k>/seed<seed>
  Study study;
};

// One search per seed. Each seed directory gets run_config.json,
// trials.jsonl (written as trials finish, exactly budget lines) and
// front.json. If every trial of a seed failed because the feature source
// was unreachable, throws BackendError after writing the files.
std::vector<SeedRun> cmd_search(const RunConfig& config);

enum class EvalSplit { kValidation, kTest };

struct EvaluateOptions {
  std::filesystem::path manifest;
  std::filesystem::path config_file;
  int k = 1;
  EvalSplit split = EvalSplit::kTest;
  std::vector<std::string> metrics{"auroc", "auroc@0.3", "ap", "rwap", "aupro"};
  BackendKind backend = BackendKind::kSynthetic;
  std::string backend_addr;
  int input_size = kDefaultInputResolution;
  // Scores every pixel with its ground-truth label instead of running the
  // model. Useful for checking a dataset and the metric plumbing.
  bool oracle_scores = false;
  // When set, one <id>.f32 raster (row-major float32 LE) plus <id>.json
  // sidecar {height, width, image_id} per scored image.
  std::optional<std::filesystem::path> export_maps;
};

// {"config_key", "split", "k", "metrics": [{metric, value, fpr_limit?}]}
nlohmann::json cmd_evaluate(const EvaluateOptions& options);

struct ParetoOptions {
  std::vector<std::filesystem::path> logs;
  bool per_seed = false;
  bool front_only = false;
};

struct ParetoReport {
  nlohmann::json fronts;  // [{"seed": s or "all", "members": [trial...]}]
  std::string csv;        // gflops,rwap,seed,k
};

// Merged (or per-seed) fronts over the successful feasible trials of the
// logs. The CSV lists every successful trial, or only front members with
// front_only. Throws DataError when the logs hold no trials.
ParetoReport cmd_pareto(const ParetoOptions& options);

// Reads a trials.jsonl file. Each record may carry "k".
struct LoggedTrial {
  Trial trial;
  std::optional<int> k;
};
std::vector<LoggedTrial> read_trial_log(const std::filesystem::path& path);

nlohmann::json flops_report_json(const ArchitectureConfig& config, int input_size);

}  // namespace patchnas
