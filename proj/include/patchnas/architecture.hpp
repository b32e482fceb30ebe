#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

namespace patchnas {

inline constexpr int kNumStages = 5;
inline constexpr int kBlocksPerStage = 4;
inline constexpr int kMinStageDepth = 2;

enum class WidthChoice { kBase, kWide };

inline constexpr std::array<int, kNumStages> kBaseWidths{24, 40, 80, 112, 160};
inline constexpr std::array<int, kNumStages> kWideWidths{32, 48, 96, 136, 192};
inline constexpr std::array<int, 3> kExpansionChoices{3, 4, 6};
inline constexpr std::array<int, 3> kKernelChoices{3, 5, 7};
// Output resolution of each stage as a divisor of the input resolution.
inline constexpr std::array<int, kNumStages> kStageResolutionDivisor{4, 8, 16, 16, 32};

int stage_width(WidthChoice width, int stage);

struct StageConfig {
  int expansion = 3;
  int kernel = 3;
  // Global block index 4s+1..4s+4, or empty when the stage is not extracted.
  std::optional<int> extract;
  int patch = 1;

  friend bool operator==(const StageConfig&, const StageConfig&) = default;
};

struct ArchitectureConfig {
  WidthChoice width = WidthChoice::kBase;
  std::array<StageConfig, kNumStages> stages{};

  friend bool operator==(const ArchitectureConfig&, const ArchitectureConfig&) = default;
};

struct StagePlan {
  std::array<int, kNumStages> depths{};
  int last_computed_stage = -1;
  // Stages with an extraction block, ascending.
  std::vector<int> extracted_stages;
  // Position (1..4) of the extraction block inside each stage, 0 if none.
  std::array<int, kNumStages> extraction_position{};
};

// Checks search-space domains and derives per-stage depths. Throws ConfigError
// with "invalid parameter" or "degenerate config".
StagePlan validate(const ArchitectureConfig& config);

// Patch sizes of non-extracted stages reset to 1.
ArchitectureConfig canonical(const ArchitectureConfig& config);

// Stable, filesystem-safe identifier of the canonical config.
std::string config_key(const ArchitectureConfig& config);

// Resolution of a stage's output for a square input, following the stride
// chain (stem /2, then stages 2, 2, 2, 1, 2) with ceil rounding.
int stage_resolution(int input_size, int stage);

nlohmann::json config_to_json(const ArchitectureConfig& config);
// Structural parse only; domain checks are left to validate().
ArchitectureConfig config_from_json(const nlohmann::json& j);
ArchitectureConfig load_config(const std::string& path);

// Uniform independent draw per field, redrawn until some stage is extracted.
ArchitectureConfig random_config(std::mt19937_64& rng);

// Categorical view of the search space used by the optimizer:
// [width, then per stage: expansion, kernel, extract (0 = none), patch - 1].
inline constexpr int kNumParams = 1 + 4 * kNumStages;
using ParamVector = std::array<int, kNumParams>;

const std::array<int, kNumParams>& param_cardinalities();
ParamVector encode_params(const ArchitectureConfig& config);
ArchitectureConfig decode_params(const ParamVector& params);
inline int expansion_param(int stage) { return 1 + 4 * stage; }
inline int kernel_param(int stage) { return 2 + 4 * stage; }
inline int extract_param(int stage) { return 3 + 4 * stage; }
inline int patch_param(int stage) { return 4 + 4 * stage; }
// Patch dimensions only matter when their stage is extracted.
bool param_active(const ParamVector& params, int dim);

}  // namespace patchnas
