#include "patchnas/commands.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "patchnas/datasets.hpp"
#include "patchnas/error.hpp"
#include "patchnas/pipeline.hpp"

namespace patchnas {

namespace fs = std::filesystem;

namespace {

const char* backend_name(BackendKind kind) {
  switch (kind) {
    case BackendKind::kSynthetic: return "synthetic";
    case BackendKind::kCache: return "cache";
    case BackendKind::kExternal: return "external";
  }
  return "?";
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

nlohmann::json front_json(const std::vector<Trial>& members, std::optional<int> k) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : members) {
    auto j = trial_to_json(t);
    if (k) j["k"] = *k;
    arr.push_back(std::move(j));
  }
  return arr;
}

bool source_unreachable(const Study& study) {
  return !study.trials.empty() &&
         std::all_of(study.trials.begin(), study.trials.end(), [](const Trial& t) {
           return t.failed && t.error.rfind("feature source unavailable", 0) == 0;
         });
}

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void validate_run_config(const RunConfig& config) {
  if (config.budget < 1) throw ConfigError("invalid parameter: budget must be >= 1");
  if (config.seeds.empty()) throw ConfigError("invalid parameter: seeds must be nonempty");
  if (config.input_size < 32) throw ConfigError("invalid parameter: input size must be >= 32");
  if (config.k != 1 && config.k != 2 && config.k != 4) {
    throw ConfigError("invalid parameter: k must be 1, 2 or 4");
  }
  if (config.constraint_gflops && !(*config.constraint_gflops > 0.0)) {
    throw ConfigError("invalid parameter: constraint must be positive");
  }
}

nlohmann::json run_config_to_json(const RunConfig& config) {
  nlohmann::json j = {
      {"manifest", config.manifest.generic_string()},
      {"k", config.k},
      {"seeds", config.seeds},
      {"budget", config.budget},
      {"constraint_gflops", config.constraint_gflops ? nlohmann::json(*config.constraint_gflops)
                                                     : nlohmann::json(nullptr)},
      {"backend", backend_name(config.backend)},
      {"backend_addr", config.backend_addr},
      {"out", config.out.generic_string()},
      {"input_size", config.input_size},
      {"sampler", config.sampler == SamplerKind::kMotpe ? "motpe" : "random"},
  };
  return j;
}

std::vector<SeedRun> cmd_search(const RunConfig& config) {
  validate_run_config(config);
  const DatasetManifest manifest = load_manifest(config.manifest);
  const SplitSpec split = make_splits(manifest, config.k);
  const SplitImages data = load_split_images(manifest, split, config.input_size);
  auto source = make_source(config.backend, config.backend_addr, config.input_size);
  const Evaluator evaluator = make_rwap_evaluator(*source, data);

  std::vector<SeedRun> runs;
  for (const auto seed : config.seeds) {
    SeedRun run;
    run.seed = seed;
    run.dir = config.out / manifest.category / ("k" + std::to_string(config.k)) /
              ("seed" + std::to_string(seed));
    fs::create_directories(run.dir);
    {
      auto rc = run_config_to_json(config);
      rc["seed"] = seed;
      rc["category"] = manifest.category;
      open_out(run.dir / "run_config.json") << rc.dump(2) << '\n';
    }

    auto log = open_out(run.dir / "trials.jsonl");
    SearchOptions opts;
    opts.budget = config.budget;
    opts.constraint_gflops = config.constraint_gflops;
    opts.seed = seed;
    opts.sampler = config.sampler;
    opts.on_trial = [&](const Trial& t) {
      auto j = trial_to_json(t);
      j["k"] = config.k;
      log << j.dump() << '\n';
      log.flush();
      if (!log) throw std::runtime_error("cannot append to " + (run.dir / "trials.jsonl").string());
    };
    run.study = run_search(evaluator, opts);
    log.close();

    const std::vector<Trial> members = run.study.front ? run.study.front->members : std::vector<Trial>{};
    open_out(run.dir / "front.json") << front_json(members, config.k).dump(2) << '\n';
    if (source_unreachable(run.study)) {
      throw BackendError(run.study.trials.front().error);
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

nlohmann::json cmd_evaluate(const EvaluateOptions& options) {
  std::vector<MetricRequest> requests;
  for (const auto& name : options.metrics) requests.push_back(parse_metric(name));
  if (requests.empty()) throw ConfigError("no metrics requested");
  if (options.input_size < 32) throw ConfigError("invalid parameter: input size must be >= 32");
  const ArchitectureConfig config = load_config(options.config_file.string());
  validate(config);

  const DatasetManifest manifest = load_manifest(options.manifest);
  const SplitSpec split = make_splits(manifest, options.k);
  const auto& indices = options.split == EvalSplit::kTest ? split.test : split.validation;
  const auto images = load_images(manifest, indices, options.input_size);

  EvalSet eval;
  if (options.oracle_scores) {
    for (const auto& img : images) {
      ScoreMap s(img.mask.height, img.mask.width);
      for (std::size_t i = 0; i < s.scores.size(); ++i) s.scores[i] = img.mask.is_anomalous(i) ? 1.0 : 0.0;
      eval.push_back({std::move(s), img.mask});
    }
  } else {
    auto source = make_source(options.backend, options.backend_addr, options.input_size);
    const auto train = load_images(manifest, split.train, options.input_size);
    const MemoryBank bank = build_memory_bank(*source, config, train);
    eval = score_images(*source, config, bank, images);
  }

  if (options.export_maps) {
    for (std::size_t i = 0; i < images.size(); ++i) {
      const ScoreMap& s = eval[i].scores;
      const fs::path base = *options.export_maps / images[i].id;
      auto raster = open_out(base.string() + ".f32");
      for (double v : s.scores) {
        const float f = static_cast<float>(v);
        std::uint8_t b[4];
        std::memcpy(b, &f, 4);
        if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + 4);
        raster.write(reinterpret_cast<const char*>(b), 4);
      }
      nlohmann::json side = {{"height", s.height}, {"width", s.width}, {"image_id", images[i].id}};
      open_out(base.string() + ".json") << side.dump() << '\n';
    }
  }

  nlohmann::json metrics = nlohmann::json::array();
  for (const auto& r : evaluate_metrics(eval, requests)) {
    nlohmann::json m = {{"metric", r.metric}, {"value", r.value}};
    if (r.fpr_limit) m["fpr_limit"] = *r.fpr_limit;
    metrics.push_back(std::move(m));
  }
  return {{"config_key", config_key(config)},
          {"split", options.split == EvalSplit::kTest ? "test" : "validation"},
          {"k", options.k},
          {"metrics", metrics}};
}

std::vector<LoggedTrial> read_trial_log(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trial log " + path.string());
  std::vector<LoggedTrial> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("trial log " + path.string() + ": " + e.what());
    }
    LoggedTrial lt{trial_from_json(j), std::nullopt};
    if (j.contains("k") && j["k"].is_number_integer()) lt.k = j["k"].get<int>();
    out.push_back(std::move(lt));
  }
  return out;
}

ParetoReport cmd_pareto(const ParetoOptions& options) {
  if (options.logs.empty()) throw ConfigError("pareto needs at least one trial log");
  std::vector<LoggedTrial> all;
  for (const auto& p : options.logs) {
    auto part = read_trial_log(p);
    all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  if (all.empty()) throw DataError("empty logs: no trial records");

  // Group key: seed for per-seed output, a single group otherwise.
  std::map<std::uint64_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < all.size(); ++i) {
    groups[options.per_seed ? all[i].trial.seed : 0].push_back(i);
  }

  ParetoReport report;
  report.fronts = nlohmann::json::array();
  report.csv = "gflops,rwap,seed,k\n";
  for (const auto& [seed, idx] : groups) {
    std::vector<Trial> trials;
    for (auto i : idx) trials.push_back(all[i].trial);
    std::vector<Trial> members;
    const bool any = std::any_of(trials.begin(), trials.end(),
                                 [](const Trial& t) { return t.feasible && !t.failed; });
    if (any) members = pareto_front(trials).members;

    nlohmann::json block = {{"seed", options.per_seed ? nlohmann::json(seed) : nlohmann::json("all")}};
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& m : members) arr.push_back(trial_to_json(m));
    block["members"] = std::move(arr);
    report.fronts.push_back(std::move(block));

    auto in_front = [&](const Trial& t) {
      return std::any_of(members.begin(), members.end(), [&](const Trial& m) {
        return m.index == t.index && m.seed == t.seed && m.performance == t.performance &&
               m.complexity_gflops == t.complexity_gflops;
      });
    };
    for (auto i : idx) {
      const Trial& t = all[i].trial;
      if (t.failed) continue;
      if (options.front_only && !in_front(t)) continue;
      report.csv += format_number(t.complexity_gflops) + "," + format_number(t.performance) + "," +
                    std::to_string(t.seed) + "," + (all[i].k ? std::to_string(*all[i].k) : "") + "\n";
    }
  }
  return report;
}

nlohmann::json flops_report_json(const ArchitectureConfig& config, int input_size) {
  const StagePlan plan = validate(config);
  const FlopsReport r = estimate_flops(plan, config, input_size);
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : r.blocks) {
    blocks.push_back({{"stage", b.stage},
                      {"position", b.position},
                      {"in_channels", b.in_channels},
                      {"out_channels", b.out_channels},
                      {"hidden_channels", b.hidden_channels},
                      {"kernel", b.kernel},
                      {"stride", b.stride},
                      {"in_resolution", b.in_resolution},
                      {"out_resolution", b.out_resolution},
                      {"squeeze_excite", b.squeeze_excite},
                      {"flops", b.flops}});
  }
  return {{"config_key", config_key(config)},
          {"input_size", input_size},
          {"stem_flops", r.stem_flops},
          {"total_flops", r.total_flops},
          {"gflops", r.total_gflops()},
          {"reference_gflops",
           {{"wideresnet50_patchcore", kWideResNet50PatchCoreGflops},
            {"mobilenetv3_large_patchcore", kMobileNetV3LargePatchCoreGflops}}},
          {"blocks", blocks}};
}

}  // namespace patchnas
