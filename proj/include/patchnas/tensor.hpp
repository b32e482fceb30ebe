#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace patchnas {

// C x H x W activation map, row-major within each channel plane.
struct FeatureTensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> values;

  FeatureTensor() = default;
  FeatureTensor(int c, int h, int w, float fill = 0.0f)
      : channels(c), height(h), width(w),
        values(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }

  std::span<float> plane(int c) {
    return {values.data() + c * plane_size(), plane_size()};
  }
  std::span<const float> plane(int c) const {
    return {values.data() + c * plane_size(), plane_size()};
  }

  float& at(int c, int y, int x) { return values[c * plane_size() + y * width + x]; }
  float at(int c, int y, int x) const { return values[c * plane_size() + y * width + x]; }

  friend bool operator==(const FeatureTensor&, const FeatureTensor&) = default;
};

// Per-pixel real-valued map (anomaly scores, distance grids).
struct ScoreMap {
  int height = 0;
  int width = 0;
  std::vector<double> scores;

  ScoreMap() = default;
  ScoreMap(int h, int w, double fill = 0.0)
      : height(h), width(w), scores(static_cast<std::size_t>(h) * w, fill) {}

  double& at(int y, int x) { return scores[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const { return scores[static_cast<std::size_t>(y) * width + x]; }
};

using AnomalyMap = ScoreMap;

// Output of one extraction block, tagged with its stage index.
struct StageTensor {
  int stage = 0;
  FeatureTensor tensor;

  friend bool operator==(const StageTensor&, const StageTensor&) = default;
};

}  // namespace patchnas
