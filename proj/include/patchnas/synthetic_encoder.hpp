#pragma once

#include <cstdint>
#include <vector>

#include "patchnas/architecture.hpp"
#include "patchnas/tensor.hpp"

namespace patchnas {

// Deterministic random-weight stand-in for a pretrained supernet. Follows
// the MobileNetV3 block layout (stem, then per block expand 1x1 ->
// depthwise kxk -> project 1x1 with a residual when shapes agree) so that
// stage widths and resolutions match the search space exactly. Every
// block's weights are drawn from a hash of (width, stage, block,
// expansion, kernel); the same config always yields the same network.
class SyntheticEncoder {
 public:
  explicit SyntheticEncoder(const ArchitectureConfig& config);

  // image: 3 x H x W, values in [0, 1]. Returns one tensor per extracted
  // stage in ascending stage order.
  std::vector<StageTensor> encode(const FeatureTensor& image) const;

  const ArchitectureConfig& config() const { return config_; }

 private:
  struct Block {
    int in_channels = 0;
    int out_channels = 0;
    int hidden = 0;
    int kernel = 0;
    int stride = 1;
    std::vector<float> expand;     // hidden x in
    std::vector<float> depthwise;  // hidden x k x k
    std::vector<float> project;    // out x hidden
  };

  ArchitectureConfig config_;
  StagePlan plan_;
  std::vector<float> stem_;  // 16 x 3 x 3 x 3
  std::vector<std::vector<Block>> stages_;
};

std::vector<StageTensor> synthetic_encode(const FeatureTensor& image,
                                          const ArchitectureConfig& config);

// Hash used to seed block weights; exposed for tests.
std::uint64_t block_weight_seed(WidthChoice width, int stage, int block, int expansion,
                                int kernel);

}  // namespace patchnas
