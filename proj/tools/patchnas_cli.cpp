#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "patchnas/commands.hpp"
#include "patchnas/datasets.hpp"
#include "patchnas/error.hpp"
#include "patchnas/image_io.hpp"
#include "patchnas/metrics.hpp"

using namespace patchnas;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(s)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("invalid parameter: bad seed '" + item + "'");
    }
  }
  return out;
}

std::vector<std::pair<std::string, int>> parse_types(const std::string& s) {
  std::vector<std::pair<std::string, int>> out;
  for (const auto& item : split_list(s)) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("invalid parameter: type spec '" + item + "' needs name:count");
    try {
      out.emplace_back(item.substr(0, colon), std::stoi(item.substr(colon + 1)));
    } catch (const std::exception&) {
      throw ConfigError("invalid parameter: type spec '" + item + "'");
    }
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

void emit(const nlohmann::json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_text(out_path, j.dump(2) + "\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Patch-based anomaly segmentation architecture search"};
  app.require_subcommand(1);

  // search
  auto* search = app.add_subcommand("search", "Run the bi-objective architecture search");
  RunConfig run;
  std::string seeds = "0";
  std::string backend = "synthetic";
  std::string sampler = "motpe";
  double constraint = 0.0;
  search->add_option("--manifest", run.manifest, "Dataset manifest JSON")->required();
  search->add_option("--k", run.k, "Validation anomalies per type (1, 2 or 4)");
  search->add_option("--seeds", seeds, "Comma-separated seeds");
  search->add_option("--budget", run.budget, "Trials per seed");
  auto* constraint_opt = search->add_option("--constraint-gflops", constraint, "Complexity constraint");
  search->add_option("--backend", backend, "synthetic, cache or external");
  search->add_option("--backend-addr", run.backend_addr, "Cache directory or exporter address");
  search->add_option("--out", run.out, "Output directory");
  search->add_option("--input-size", run.input_size, "Square encoder input resolution");
  search->add_option("--sampler", sampler, "motpe or random");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score one architecture on a split");
  EvaluateOptions ev;
  std::string ev_split = "test";
  std::string ev_metrics = "auroc,auroc@0.3,ap,rwap,aupro";
  std::string ev_backend = "synthetic";
  std::string ev_out;
  std::string ev_maps;
  evaluate->add_option("--manifest", ev.manifest, "Dataset manifest JSON")->required();
  evaluate->add_option("--config", ev.config_file, "Architecture config JSON")->required();
  evaluate->add_option("--k", ev.k, "Validation anomalies per type (1, 2 or 4)");
  evaluate->add_option("--split", ev_split, "validation or test");
  evaluate->add_option("--metrics", ev_metrics, "Comma-separated metric names");
  evaluate->add_option("--backend", ev_backend, "synthetic, cache or external");
  evaluate->add_option("--backend-addr", ev.backend_addr, "Cache directory or exporter address");
  evaluate->add_option("--input-size", ev.input_size, "Square encoder input resolution");
  evaluate->add_flag("--oracle", ev.oracle_scores, "Score pixels with their ground-truth labels");
  evaluate->add_option("--export-maps", ev_maps, "Directory for float32 anomaly maps");
  evaluate->add_option("--out", ev_out, "Write the report here instead of stdout");

  // pareto
  auto* pareto = app.add_subcommand("pareto", "Pareto fronts and plot data from trial logs");
  ParetoOptions po;
  std::string pareto_out;
  std::string pareto_csv;
  pareto->add_option("logs", po.logs, "trials.jsonl files")->required();
  pareto->add_flag("--per-seed", po.per_seed, "One front per seed");
  pareto->add_flag("--front-only", po.front_only, "CSV lists front members only");
  pareto->add_option("--out", pareto_out, "Front JSON path (stdout if omitted)");
  pareto->add_option("--csv", pareto_csv, "Plot-data CSV path");

  // flops
  auto* flops = app.add_subcommand("flops", "Analytical complexity of a config");
  std::string flops_config;
  int flops_input = kDefaultInputResolution;
  flops->add_option("--config", flops_config, "Architecture config JSON")->required();
  flops->add_option("--input-size", flops_input, "Square input resolution");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic anomaly dataset");
  SyntheticSpec spec;
  std::string synth_out;
  std::string categories = "synthetic";
  std::string types = "blob:5,scratch:5,hole:5";
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--categories", categories, "Comma-separated category names");
  synth->add_option("--n-train", spec.n_train, "Train normals per category");
  synth->add_option("--n-test-normal", spec.n_test_normal, "Test normals per category");
  synth->add_option("--types", types, "name:count pairs");
  synth->add_option("--image-size", spec.image_size, "Square image size");
  synth->add_option("--seed", spec.seed, "Generator seed");

  // regions
  auto* regions = app.add_subcommand("regions", "Connected anomaly regions of a mask");
  std::string mask_path;
  std::string mask_type;
  regions->add_option("--mask", mask_path, "8-bit mask PNG")->required();
  regions->add_option("--type", mask_type, "Anomaly type label");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*search) {
      run.seeds = parse_seeds(seeds);
      run.backend = parse_backend_kind(backend);
      if (*constraint_opt) run.constraint_gflops = constraint;
      if (sampler == "motpe") {
        run.sampler = SamplerKind::kMotpe;
      } else if (sampler == "random") {
        run.sampler = SamplerKind::kRandom;
      } else {
        throw ConfigError("unknown sampler '" + sampler + "'");
      }
      for (const auto& r : cmd_search(run)) {
        std::size_t failed = 0;
        for (const auto& t : r.study.trials) failed += t.failed ? 1 : 0;
        std::cout << "seed " << r.seed << ": " << r.study.trials.size() << " trials (" << failed
                  << " failed), front size "
                  << (r.study.front ? r.study.front->members.size() : 0) << ", " << r.dir.string()
                  << '\n';
      }
    } else if (*evaluate) {
      if (ev_split == "test") {
        ev.split = EvalSplit::kTest;
      } else if (ev_split == "validation") {
        ev.split = EvalSplit::kValidation;
      } else {
        throw ConfigError("unknown split '" + ev_split + "'");
      }
      ev.metrics = split_list(ev_metrics);
      ev.backend = parse_backend_kind(ev_backend);
      if (!ev_maps.empty()) ev.export_maps = ev_maps;
      emit(cmd_evaluate(ev), ev_out);
    } else if (*pareto) {
      const ParetoReport report = cmd_pareto(po);
      emit(report.fronts, pareto_out);
      if (!pareto_csv.empty()) write_text(pareto_csv, report.csv);
    } else if (*flops) {
      std::cout << flops_report_json(load_config(flops_config), flops_input).dump(2) << '\n';
    } else if (*synth) {
      spec.categories = split_list(categories);
      spec.types = parse_types(types);
      for (const auto& m : generate_synthetic(spec, synth_out)) {
        std::cout << (m.root / "manifest.json").string() << '\n';
      }
    } else if (*regions) {
      const GrayImage mask = read_png_gray(mask_path);
      std::vector<std::uint8_t> binary(mask.pixels.size());
      for (std::size_t i = 0; i < binary.size(); ++i) binary[i] = mask.pixels[i] >= 128 ? 1 : 0;
      const RegionMask rm = label_regions(binary, mask.height, mask.width,
                                          mask_type.empty() ? std::nullopt : std::optional(mask_type));
      nlohmann::json j = {{"height", rm.height},
                          {"width", rm.width},
                          {"num_regions", rm.num_regions},
                          {"areas", rm.region_areas()}};
      if (rm.anomaly_type) j["type"] = *rm.anomaly_type;
      std::cout << j.dump(2) << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const BackendError& e) {
    std::cerr << "backend error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
