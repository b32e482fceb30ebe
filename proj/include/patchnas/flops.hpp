#pragma once

#include <cstdint>
#include <vector>

#include "patchnas/architecture.hpp"

namespace patchnas {

// Reference encoder costs of the two PatchCore baselines at 224x224, kept
// for report comparison only; they are not derived from this model.
inline constexpr double kWideResNet50PatchCoreGflops = 18.41;
inline constexpr double kMobileNetV3LargePatchCoreGflops = 0.31;

inline constexpr int kStemChannels = 16;
inline constexpr int kStemKernel = 3;
inline constexpr int kDefaultInputResolution = 224;

// Stride of the first block of each stage.
inline constexpr std::array<int, kNumStages> kStageStride{2, 2, 2, 1, 2};
// Stages carrying squeeze-excite, as in MobileNetV3-Large.
inline constexpr std::array<bool, kNumStages> kStageUsesSqueezeExcite{false, true, false, true, true};
inline constexpr int kSqueezeReduction = 4;

struct BlockFlops {
  int stage = 0;
  int position = 0;  // 1-based block index inside the stage
  int in_channels = 0;
  int out_channels = 0;
  int hidden_channels = 0;
  int kernel = 0;
  int stride = 1;
  int in_resolution = 0;
  int out_resolution = 0;
  bool squeeze_excite = false;
  std::int64_t flops = 0;
};

struct FlopsReport {
  std::int64_t stem_flops = 0;
  std::vector<BlockFlops> blocks;
  std::int64_t total_flops = 0;

  double total_gflops() const { return static_cast<double>(total_flops) * 1e-9; }
};

// Analytical encoder cost, 2 FLOPS per multiply-accumulate, convolutions
// only: stem, then for every computed block expand 1x1, depthwise kxk,
// squeeze-excite (two 1x1 convs on the pooled vector) and project 1x1.
// Pooling, patch fusion and nearest-neighbor search are not counted.
FlopsReport estimate_flops(const StagePlan& plan, const ArchitectureConfig& config,
                           int input_resolution = kDefaultInputResolution);

inline double config_gflops(const ArchitectureConfig& config,
                            int input_resolution = kDefaultInputResolution) {
  return estimate_flops(validate(config), config, input_resolution).total_gflops();
}

}  // namespace patchnas
