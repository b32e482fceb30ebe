#include "patchnas/architecture.hpp"

#include <algorithm>
#include <fstream>

#include "patchnas/error.hpp"
#include "patchnas/patch_engine.hpp"

namespace patchnas {

namespace {

constexpr std::array<int, kNumStages> kStageStrides{2, 2, 2, 1, 2};

template <std::size_t N>
bool in_choices(const std::array<int, N>& choices, int v) {
  return std::find(choices.begin(), choices.end(), v) != choices.end();
}

template <std::size_t N>
int choice_index(const std::array<int, N>& choices, int v) {
  return static_cast<int>(std::find(choices.begin(), choices.end(), v) - choices.begin());
}

[[noreturn]] void invalid(const std::string& what) {
  throw ConfigError("invalid parameter: " + what);
}

}  // namespace

int stage_width(WidthChoice width, int stage) {
  return width == WidthChoice::kWide ? kWideWidths.at(stage) : kBaseWidths.at(stage);
}

StagePlan validate(const ArchitectureConfig& config) {
  StagePlan plan;
  for (int s = 0; s < kNumStages; ++s) {
    const StageConfig& st = config.stages[s];
    const std::string where = "stage " + std::to_string(s);
    if (!in_choices(kExpansionChoices, st.expansion)) invalid(where + " expansion " + std::to_string(st.expansion));
    if (!in_choices(kKernelChoices, st.kernel)) invalid(where + " kernel " + std::to_string(st.kernel));
    if (st.patch < kMinPatchSize || st.patch > kMaxPatchSize) invalid(where + " patch " + std::to_string(st.patch));
    if (st.extract) {
      const int pos = *st.extract - kBlocksPerStage * s;
      if (pos < 1 || pos > kBlocksPerStage) invalid(where + " extraction block " + std::to_string(*st.extract));
      plan.extraction_position[s] = pos;
      plan.extracted_stages.push_back(s);
      plan.last_computed_stage = s;
    }
  }
  if (plan.extracted_stages.empty()) {
    throw ConfigError("degenerate config: no stage is extracted");
  }
  for (int s = 0; s <= plan.last_computed_stage; ++s) {
    plan.depths[s] = std::max(kMinStageDepth, plan.extraction_position[s]);
  }
  return plan;
}

ArchitectureConfig canonical(const ArchitectureConfig& config) {
  ArchitectureConfig out = config;
  for (auto& st : out.stages) {
    if (!st.extract) st.patch = 1;
  }
  return out;
}

std::string config_key(const ArchitectureConfig& config) {
  const ArchitectureConfig c = canonical(config);
  std::string key = c.width == WidthChoice::kWide ? "wide" : "base";
  for (const auto& st : c.stages) {
    key += "_e" + std::to_string(st.expansion) + "k" + std::to_string(st.kernel);
    key += st.extract ? "b" + std::to_string(*st.extract) + "p" + std::to_string(st.patch) : "bx";
  }
  return key;
}

int stage_resolution(int input_size, int stage) {
  int res = (input_size + 1) / 2;  // stem
  for (int s = 0; s <= stage; ++s) {
    res = (res + kStageStrides[s] - 1) / kStageStrides[s];
  }
  return res;
}

nlohmann::json config_to_json(const ArchitectureConfig& config) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& st : config.stages) {
    nlohmann::json js = {{"expansion", st.expansion}, {"kernel", st.kernel}, {"patch", st.patch}};
    js["extract"] = st.extract ? nlohmann::json(*st.extract) : nlohmann::json(nullptr);
    stages.push_back(std::move(js));
  }
  return {{"width", config.width == WidthChoice::kWide ? "wide" : "base"}, {"stages", stages}};
}

ArchitectureConfig config_from_json(const nlohmann::json& j) {
  ArchitectureConfig config;
  try {
    const std::string width = j.at("width").get<std::string>();
    if (width == "base") {
      config.width = WidthChoice::kBase;
    } else if (width == "wide") {
      config.width = WidthChoice::kWide;
    } else {
      invalid("width '" + width + "'");
    }
    const auto& stages = j.at("stages");
    if (!stages.is_array() || stages.size() != kNumStages) {
      invalid("expected " + std::to_string(kNumStages) + " stages");
    }
    for (int s = 0; s < kNumStages; ++s) {
      const auto& js = stages[s];
      StageConfig& st = config.stages[s];
      st.expansion = js.at("expansion").get<int>();
      st.kernel = js.at("kernel").get<int>();
      st.patch = js.at("patch").get<int>();
      const auto& ex = js.at("extract");
      if (ex.is_null()) {
        st.extract.reset();
      } else {
        st.extract = ex.get<int>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid parameter: malformed config JSON: ") + e.what());
  }
  return config;
}

ArchitectureConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse config file " + path + ": " + e.what());
  }
  return config_from_json(j);
}

ArchitectureConfig random_config(std::mt19937_64& rng) {
  const auto& card = param_cardinalities();
  for (;;) {
    ParamVector params{};
    for (int d = 0; d < kNumParams; ++d) {
      std::uniform_int_distribution<int> pick(0, card[d] - 1);
      params[d] = pick(rng);
    }
    bool any_extract = false;
    for (int s = 0; s < kNumStages; ++s) any_extract |= params[extract_param(s)] != 0;
    if (any_extract) return decode_params(params);
  }
}

const std::array<int, kNumParams>& param_cardinalities() {
  static const std::array<int, kNumParams> card = [] {
    std::array<int, kNumParams> c{};
    c[0] = 2;
    for (int s = 0; s < kNumStages; ++s) {
      c[expansion_param(s)] = static_cast<int>(kExpansionChoices.size());
      c[kernel_param(s)] = static_cast<int>(kKernelChoices.size());
      c[extract_param(s)] = kBlocksPerStage + 1;
      c[patch_param(s)] = kMaxPatchSize;
    }
    return c;
  }();
  return card;
}

ParamVector encode_params(const ArchitectureConfig& config) {
  ParamVector p{};
  p[0] = config.width == WidthChoice::kWide ? 1 : 0;
  for (int s = 0; s < kNumStages; ++s) {
    const StageConfig& st = config.stages[s];
    p[expansion_param(s)] = choice_index(kExpansionChoices, st.expansion);
    p[kernel_param(s)] = choice_index(kKernelChoices, st.kernel);
    p[extract_param(s)] = st.extract ? *st.extract - kBlocksPerStage * s : 0;
    p[patch_param(s)] = st.patch - 1;
  }
  return p;
}

ArchitectureConfig decode_params(const ParamVector& params) {
  ArchitectureConfig c;
  c.width = params[0] == 1 ? WidthChoice::kWide : WidthChoice::kBase;
  for (int s = 0; s < kNumStages; ++s) {
    StageConfig& st = c.stages[s];
    st.expansion = kExpansionChoices.at(params[expansion_param(s)]);
    st.kernel = kKernelChoices.at(params[kernel_param(s)]);
    const int pos = params[extract_param(s)];
    if (pos == 0) {
      st.extract.reset();
    } else {
      st.extract = kBlocksPerStage * s + pos;
    }
    st.patch = params[patch_param(s)] + 1;
  }
  return c;
}

bool param_active(const ParamVector& params, int dim) {
  if (dim == 0) return true;
  const int stage = (dim - 1) / 4;
  if (dim == patch_param(stage)) return params[extract_param(stage)] != 0;
  return true;
}

}  // namespace patchnas
