#include "patchnas/synthetic_encoder.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "patchnas/flops.hpp"
#include "patchnas/seeding.hpp"

namespace patchnas {

namespace {

std::vector<float> random_weights(std::mt19937_64& rng, std::size_t n, int fan_in) {
  const float bound = std::sqrt(3.0f / static_cast<float>(fan_in));
  std::uniform_real_distribution<float> dist(-bound, bound);
  std::vector<float> w(n);
  for (auto& v : w) v = dist(rng);
  return w;
}

int strided(int in, int stride) { return (in + stride - 1) / stride; }

FeatureTensor stem_conv(const FeatureTensor& in, const std::vector<float>& w) {
  constexpr int k = kStemKernel;
  constexpr int pad = k / 2;
  FeatureTensor out(kStemChannels, strided(in.height, 2), strided(in.width, 2));
  for (int co = 0; co < kStemChannels; ++co) {
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < out.width; ++x) {
        float acc = 0.0f;
        for (int ci = 0; ci < in.channels; ++ci) {
          for (int ky = 0; ky < k; ++ky) {
            const int iy = y * 2 + ky - pad;
            if (iy < 0 || iy >= in.height) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = x * 2 + kx - pad;
              if (ix < 0 || ix >= in.width) continue;
              acc += w[((co * in.channels + ci) * k + ky) * k + kx] * in.at(ci, iy, ix);
            }
          }
        }
        out.at(co, y, x) = std::tanh(acc);
      }
    }
  }
  return out;
}

FeatureTensor pointwise(const FeatureTensor& in, const std::vector<float>& w, int out_channels,
                        bool activate) {
  FeatureTensor out(out_channels, in.height, in.width);
  const std::size_t n = in.plane_size();
  for (int co = 0; co < out_channels; ++co) {
    float* dst = out.plane(co).data();
    for (int ci = 0; ci < in.channels; ++ci) {
      const float wv = w[static_cast<std::size_t>(co) * in.channels + ci];
      const float* src = in.plane(ci).data();
      for (std::size_t p = 0; p < n; ++p) dst[p] += wv * src[p];
    }
    if (activate) {
      for (std::size_t p = 0; p < n; ++p) dst[p] = std::tanh(dst[p]);
    }
  }
  return out;
}

FeatureTensor depthwise(const FeatureTensor& in, const std::vector<float>& w, int k, int stride) {
  const int pad = k / 2;
  FeatureTensor out(in.channels, strided(in.height, stride), strided(in.width, stride));
  for (int c = 0; c < in.channels; ++c) {
    const float* wc = w.data() + static_cast<std::size_t>(c) * k * k;
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < out.width; ++x) {
        float acc = 0.0f;
        for (int ky = 0; ky < k; ++ky) {
          const int iy = y * stride + ky - pad;
          if (iy < 0 || iy >= in.height) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = x * stride + kx - pad;
            if (ix < 0 || ix >= in.width) continue;
            acc += wc[ky * k + kx] * in.at(c, iy, ix);
          }
        }
        out.at(c, y, x) = std::tanh(acc);
      }
    }
  }
  return out;
}

}  // namespace

std::uint64_t block_weight_seed(WidthChoice width, int stage, int block, int expansion,
                                int kernel) {
  std::uint64_t h = splitmix64(width == WidthChoice::kWide ? 2 : 1);
  h = splitmix64(h ^ static_cast<std::uint64_t>(stage + 1));
  h = splitmix64(h ^ static_cast<std::uint64_t>(block));
  h = splitmix64(h ^ static_cast<std::uint64_t>(expansion));
  return splitmix64(h ^ static_cast<std::uint64_t>(kernel));
}

SyntheticEncoder::SyntheticEncoder(const ArchitectureConfig& config)
    : config_(config), plan_(validate(config)) {
  {
    std::mt19937_64 rng(block_weight_seed(config.width, -1, 0, 0, kStemKernel));
    stem_ = random_weights(rng, static_cast<std::size_t>(kStemChannels) * 3 * kStemKernel * kStemKernel,
                           3 * kStemKernel * kStemKernel);
  }
  int channels = kStemChannels;
  stages_.resize(plan_.last_computed_stage + 1);
  for (int s = 0; s <= plan_.last_computed_stage; ++s) {
    const StageConfig& st = config.stages[s];
    const int width = stage_width(config.width, s);
    for (int pos = 1; pos <= plan_.depths[s]; ++pos) {
      std::mt19937_64 rng(block_weight_seed(config.width, s, pos, st.expansion, st.kernel));
      Block b;
      b.in_channels = channels;
      b.out_channels = width;
      b.hidden = channels * st.expansion;
      b.kernel = st.kernel;
      b.stride = pos == 1 ? kStageStride[s] : 1;
      b.expand = random_weights(rng, static_cast<std::size_t>(b.hidden) * b.in_channels, b.in_channels);
      b.depthwise = random_weights(rng, static_cast<std::size_t>(b.hidden) * b.kernel * b.kernel,
                                   b.kernel * b.kernel);
      b.project = random_weights(rng, static_cast<std::size_t>(b.out_channels) * b.hidden, b.hidden);
      stages_[s].push_back(std::move(b));
      channels = width;
    }
  }
}

std::vector<StageTensor> SyntheticEncoder::encode(const FeatureTensor& image) const {
  if (image.channels != 3) throw std::invalid_argument("synthetic encoder expects a 3-channel image");
  FeatureTensor x = image;
  for (auto& v : x.values) v = (v - 0.5f) * 2.0f;
  x = stem_conv(x, stem_);

  std::vector<StageTensor> out;
  for (int s = 0; s <= plan_.last_computed_stage; ++s) {
    for (std::size_t i = 0; i < stages_[s].size(); ++i) {
      const Block& b = stages_[s][i];
      FeatureTensor h = pointwise(x, b.expand, b.hidden, true);
      h = depthwise(h, b.depthwise, b.kernel, b.stride);
      FeatureTensor y = pointwise(h, b.project, b.out_channels, false);
      if (b.stride == 1 && b.in_channels == b.out_channels) {
        for (std::size_t p = 0; p < y.values.size(); ++p) y.values[p] += x.values[p];
      }
      x = std::move(y);
      if (plan_.extraction_position[s] == static_cast<int>(i) + 1) {
        out.push_back({s, x});
      }
    }
  }
  return out;
}

std::vector<StageTensor> synthetic_encode(const FeatureTensor& image,
                                          const ArchitectureConfig& config) {
  return SyntheticEncoder(config).encode(image);
}

}  // namespace patchnas
