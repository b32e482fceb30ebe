#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "patchnas/tensor.hpp"

namespace patchnas {

inline constexpr int kMinPatchSize = 1;
inline constexpr int kMaxPatchSize = 16;

// Stride-1 average pooling that keeps the input resolution. The window for
// output cell (y, x) starts at (y - (p-1)/2, x - (p-1)/2); out-of-bounds
// cells are skipped and the divisor is the number of in-bounds cells.
FeatureTensor avg_pool_same(const FeatureTensor& feature, int patch_size);

// Bilinear resize with half-pixel centers and edge clamping:
// src = (dst + 0.5) * (src_size / dst_size) - 0.5, clamped to [0, src_size - 1].
FeatureTensor bilinear_resize(const FeatureTensor& feature, int target_h, int target_w);
ScoreMap bilinear_resize(const ScoreMap& map, int target_h, int target_w);

// Fused per-cell patch vectors. Cell (y, x) occupies
// values[(y * width + x) * dim .. + dim).
struct PatchGrid {
  int dim = 0;
  int height = 0;
  int width = 0;
  std::vector<float> values;

  std::size_t cells() const { return static_cast<std::size_t>(height) * width; }
  std::span<const float> cell(std::size_t i) const {
    return {values.data() + i * dim, static_cast<std::size_t>(dim)};
  }
};

// Pools each stage with its patch size, upsamples to the first stage's
// resolution and concatenates channels in stage order.
PatchGrid extract_patches(std::span<const FeatureTensor> stage_features,
                          std::span<const int> patch_sizes);

// Immutable flat store of normal patch vectors.
class MemoryBank {
 public:
  // Entries are packed into blocks of this many vectors, dimension-major
  // inside a block, for the distance kernel.
  static constexpr int kBlock = 16;

  int dim() const { return dim_; }
  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }
  std::span<const float> entry(std::size_t i) const {
    return {rows_.data() + i * dim_, static_cast<std::size_t>(dim_)};
  }
  // Index of the training grid each entry came from.
  std::uint32_t source(std::size_t i) const { return sources_[i]; }

  // Packed layout: block b, dimension d, lane l at
  // packed()[(b * dim + d) * kBlock + l]. Lanes past size() are zero.
  std::span<const float> packed() const { return packed_; }

 private:
  friend MemoryBank build_bank(std::span<const PatchGrid> train_grids);
  friend MemoryBank make_bank(int dim, std::vector<float> rows,
                              std::vector<std::uint32_t> sources);
  MemoryBank(int dim, std::vector<float> rows, std::vector<std::uint32_t> sources);

  int dim_ = 0;
  std::size_t count_ = 0;
  std::vector<float> rows_;
  std::vector<std::uint32_t> sources_;
  std::vector<float> packed_;
};

MemoryBank build_bank(std::span<const PatchGrid> train_grids);
// Bank from explicit row-major vectors; sources default to 0 when empty.
MemoryBank make_bank(int dim, std::vector<float> rows,
                     std::vector<std::uint32_t> sources = {});

// Exact Euclidean distance from each grid cell to its nearest bank entry.
// Per-pair squared distances are accumulated in dimension order in float,
// so results are identical to a naive double loop.
ScoreMap nn_distances(const PatchGrid& query, const MemoryBank& bank);

// Algorithm end to end: fuse patches, score against the bank, upsample the
// distance grid to the image resolution.
AnomalyMap segment(std::span<const FeatureTensor> stage_features,
                   std::span<const int> patch_sizes, const MemoryBank& bank,
                   int image_h, int image_w);

// Greedy k-center selection of ceil(ratio * |bank|) entries. The first
// center is drawn from rng_seed; ties pick the lowest index. Kept entries
// stay in their original order.
MemoryBank coreset_subsample(const MemoryBank& bank, double ratio, std::uint64_t rng_seed);
// Same selection with an explicit first center. Returns selected indices in
// selection order.
std::vector<std::size_t> greedy_k_center(const MemoryBank& bank, std::size_t count,
                                         std::size_t first_center);

}  // namespace patchnas
