#include "patchnas/flops.hpp"

namespace patchnas {

namespace {

int strided(int in, int stride) { return (in + stride - 1) / stride; }

std::int64_t block_macs(const BlockFlops& b) {
  const std::int64_t in_px = static_cast<std::int64_t>(b.in_resolution) * b.in_resolution;
  const std::int64_t out_px = static_cast<std::int64_t>(b.out_resolution) * b.out_resolution;
  std::int64_t macs = in_px * b.in_channels * b.hidden_channels;  // expand
  macs += out_px * b.hidden_channels * b.kernel * b.kernel;       // depthwise
  if (b.squeeze_excite) {
    const std::int64_t squeezed = b.hidden_channels / kSqueezeReduction;
    macs += 2 * squeezed * b.hidden_channels;
  }
  macs += out_px * b.hidden_channels * b.out_channels;  // project
  return macs;
}

}  // namespace

FlopsReport estimate_flops(const StagePlan& plan, const ArchitectureConfig& config,
                           int input_resolution) {
  FlopsReport report;
  int res = strided(input_resolution, 2);
  report.stem_flops = 2LL * res * res * kStemChannels * kStemKernel * kStemKernel * 3;
  report.total_flops = report.stem_flops;

  int channels = kStemChannels;
  for (int s = 0; s <= plan.last_computed_stage; ++s) {
    const StageConfig& st = config.stages[s];
    const int width = stage_width(config.width, s);
    for (int pos = 1; pos <= plan.depths[s]; ++pos) {
      BlockFlops b;
      b.stage = s;
      b.position = pos;
      b.in_channels = channels;
      b.out_channels = width;
      b.hidden_channels = channels * st.expansion;
      b.kernel = st.kernel;
      b.stride = pos == 1 ? kStageStride[s] : 1;
      b.in_resolution = res;
      b.out_resolution = strided(res, b.stride);
      b.squeeze_excite = kStageUsesSqueezeExcite[s];
      b.flops = 2 * block_macs(b);
      report.total_flops += b.flops;
      report.blocks.push_back(b);
      channels = width;
      res = b.out_resolution;
    }
  }
  return report;
}

}  // namespace patchnas
