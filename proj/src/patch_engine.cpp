#include "patchnas/patch_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "parallel.hpp"

namespace patchnas {

namespace {

// Box sums along one axis with clipped windows, in double.
void box_mean_rows(const float* src, double* dst, int h, int w, int p) {
  const int before = (p - 1) / 2;
  std::vector<double> prefix(w + 1);
  for (int y = 0; y < h; ++y) {
    const float* row = src + static_cast<std::size_t>(y) * w;
    prefix[0] = 0.0;
    for (int x = 0; x < w; ++x) prefix[x + 1] = prefix[x] + row[x];
    for (int x = 0; x < w; ++x) {
      const int lo = std::max(0, x - before);
      const int hi = std::min(w, x - before + p);
      dst[static_cast<std::size_t>(y) * w + x] = (prefix[hi] - prefix[lo]) / (hi - lo);
    }
  }
}

void box_mean_cols(const double* src, float* dst, int h, int w, int p) {
  const int before = (p - 1) / 2;
  std::vector<double> prefix(h + 1);
  for (int x = 0; x < w; ++x) {
    prefix[0] = 0.0;
    for (int y = 0; y < h; ++y) prefix[y + 1] = prefix[y] + src[static_cast<std::size_t>(y) * w + x];
    for (int y = 0; y < h; ++y) {
      const int lo = std::max(0, y - before);
      const int hi = std::min(h, y - before + p);
      dst[static_cast<std::size_t>(y) * w + x] =
          static_cast<float>((prefix[hi] - prefix[lo]) / (hi - lo));
    }
  }
}

struct AxisTap {
  int i0;
  int i1;
  double frac;
};

std::vector<AxisTap> axis_taps(int src, int dst) {
  std::vector<AxisTap> taps(dst);
  const double scale = static_cast<double>(src) / dst;
  for (int i = 0; i < dst; ++i) {
    double s = (i + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src - 1));
    const int i0 = static_cast<int>(std::floor(s));
    const int i1 = std::min(i0 + 1, src - 1);
    taps[i] = {i0, i1, s - i0};
  }
  return taps;
}

template <typename In, typename Out>
void resize_plane(const In* src, int sw, Out* dst, int th, int tw,
                  const std::vector<AxisTap>& ys, const std::vector<AxisTap>& xs) {
  for (int y = 0; y < th; ++y) {
    const AxisTap& ty = ys[y];
    const In* r0 = src + static_cast<std::size_t>(ty.i0) * sw;
    const In* r1 = src + static_cast<std::size_t>(ty.i1) * sw;
    for (int x = 0; x < tw; ++x) {
      const AxisTap& tx = xs[x];
      const double top = r0[tx.i0] + (static_cast<double>(r0[tx.i1]) - r0[tx.i0]) * tx.frac;
      const double bot = r1[tx.i0] + (static_cast<double>(r1[tx.i1]) - r1[tx.i0]) * tx.frac;
      dst[static_cast<std::size_t>(y) * tw + x] = static_cast<Out>(top + (bot - top) * ty.frac);
    }
  }
}

void check_targets(int target_h, int target_w) {
  if (target_h < 1 || target_w < 1) {
    throw std::invalid_argument("bilinear_resize: target size must be positive");
  }
}

}  // namespace

FeatureTensor avg_pool_same(const FeatureTensor& feature, int patch_size) {
  if (patch_size < 1) throw std::invalid_argument("avg_pool_same: patch_size must be >= 1");
  if (patch_size == 1) return feature;
  FeatureTensor out(feature.channels, feature.height, feature.width);
  std::vector<double> tmp(feature.plane_size());
  for (int c = 0; c < feature.channels; ++c) {
    box_mean_rows(feature.plane(c).data(), tmp.data(), feature.height, feature.width, patch_size);
    box_mean_cols(tmp.data(), out.plane(c).data(), feature.height, feature.width, patch_size);
  }
  return out;
}

FeatureTensor bilinear_resize(const FeatureTensor& feature, int target_h, int target_w) {
  check_targets(target_h, target_w);
  if (feature.height == target_h && feature.width == target_w) return feature;
  FeatureTensor out(feature.channels, target_h, target_w);
  const auto ys = axis_taps(feature.height, target_h);
  const auto xs = axis_taps(feature.width, target_w);
  for (int c = 0; c < feature.channels; ++c) {
    resize_plane(feature.plane(c).data(), feature.width,
                 out.plane(c).data(), target_h, target_w, ys, xs);
  }
  return out;
}

ScoreMap bilinear_resize(const ScoreMap& map, int target_h, int target_w) {
  check_targets(target_h, target_w);
  if (map.height == target_h && map.width == target_w) return map;
  ScoreMap out(target_h, target_w);
  resize_plane(map.scores.data(), map.width, out.scores.data(), target_h,
               target_w, axis_taps(map.height, target_h), axis_taps(map.width, target_w));
  return out;
}

PatchGrid extract_patches(std::span<const FeatureTensor> stage_features,
                          std::span<const int> patch_sizes) {
  if (stage_features.empty()) {
    throw std::invalid_argument("extract_patches: no extracted stages");
  }
  if (patch_sizes.size() != stage_features.size()) {
    throw std::invalid_argument("extract_patches: one patch size per stage required");
  }
  PatchGrid grid;
  grid.height = stage_features.front().height;
  grid.width = stage_features.front().width;
  for (const auto& f : stage_features) grid.dim += f.channels;
  grid.values.resize(grid.cells() * grid.dim);

  int offset = 0;
  for (std::size_t s = 0; s < stage_features.size(); ++s) {
    const FeatureTensor pooled = avg_pool_same(stage_features[s], patch_sizes[s]);
    const FeatureTensor aligned = bilinear_resize(pooled, grid.height, grid.width);
    for (int c = 0; c < aligned.channels; ++c) {
      const auto plane = aligned.plane(c);
      for (std::size_t cell = 0; cell < grid.cells(); ++cell) {
        grid.values[cell * grid.dim + offset + c] = plane[cell];
      }
    }
    offset += aligned.channels;
  }
  return grid;
}

MemoryBank::MemoryBank(int dim, std::vector<float> rows, std::vector<std::uint32_t> sources)
    : dim_(dim), rows_(std::move(rows)), sources_(std::move(sources)) {
  count_ = dim_ > 0 ? rows_.size() / dim_ : 0;
  if (sources_.empty()) sources_.assign(count_, 0);
  const std::size_t blocks = (count_ + kBlock - 1) / kBlock;
  packed_.assign(blocks * dim_ * kBlock, 0.0f);
  for (std::size_t i = 0; i < count_; ++i) {
    const std::size_t b = i / kBlock;
    const std::size_t lane = i % kBlock;
    for (int d = 0; d < dim_; ++d) {
      packed_[(b * dim_ + d) * kBlock + lane] = rows_[i * dim_ + d];
    }
  }
}

MemoryBank make_bank(int dim, std::vector<float> rows, std::vector<std::uint32_t> sources) {
  if (dim < 1) throw std::invalid_argument("make_bank: dimension must be positive");
  if (rows.size() % dim != 0) throw std::invalid_argument("make_bank: ragged rows");
  if (!sources.empty() && sources.size() != rows.size() / dim) {
    throw std::invalid_argument("make_bank: one source per entry required");
  }
  return MemoryBank(dim, std::move(rows), std::move(sources));
}

MemoryBank build_bank(std::span<const PatchGrid> train_grids) {
  if (train_grids.empty()) throw std::invalid_argument("build_bank: no training grids");
  const int dim = train_grids.front().dim;
  std::size_t total = 0;
  for (const auto& g : train_grids) {
    if (g.dim != dim) throw std::invalid_argument("build_bank: patch dimension mismatch");
    total += g.values.size();
  }
  std::vector<float> rows;
  rows.reserve(total);
  std::vector<std::uint32_t> sources;
  sources.reserve(total / std::max(dim, 1));
  for (std::size_t gi = 0; gi < train_grids.size(); ++gi) {
    const auto& g = train_grids[gi];
    rows.insert(rows.end(), g.values.begin(), g.values.end());
    sources.insert(sources.end(), g.cells(), static_cast<std::uint32_t>(gi));
  }
  return MemoryBank(dim, std::move(rows), std::move(sources));
}

ScoreMap nn_distances(const PatchGrid& query, const MemoryBank& bank) {
  if (bank.empty()) throw std::invalid_argument("nn_distances: empty memory bank");
  if (query.dim != bank.dim()) throw std::invalid_argument("nn_distances: dimension mismatch");

  constexpr int kQueryTile = 4;
  constexpr int L = MemoryBank::kBlock;
  const int dim = bank.dim();
  const std::size_t n_queries = query.cells();
  const std::size_t n_entries = bank.size();
  const std::size_t n_blocks = (n_entries + L - 1) / L;
  const std::size_t n_tiles = (n_queries + kQueryTile - 1) / kQueryTile;
  const float* packed = bank.packed().data();

  ScoreMap out(query.height, query.width);
  detail::parallel_chunks(n_tiles, 8, [&](std::size_t tile_begin, std::size_t tile_end) {
    for (std::size_t tile = tile_begin; tile < tile_end; ++tile) {
      const std::size_t q0 = tile * kQueryTile;
      const int nq = static_cast<int>(std::min<std::size_t>(kQueryTile, n_queries - q0));
      const float* q[kQueryTile];
      for (int i = 0; i < kQueryTile; ++i) {
        q[i] = query.values.data() + (q0 + std::min(i, nq - 1)) * dim;
      }
      float best[kQueryTile];
      std::fill(best, best + kQueryTile, std::numeric_limits<float>::infinity());

      for (std::size_t b = 0; b < n_blocks; ++b) {
        float acc[kQueryTile][L] = {};
        const float* block = packed + b * dim * L;
        for (int d = 0; d < dim; ++d) {
          const float* lane = block + d * L;
          for (int i = 0; i < kQueryTile; ++i) {
            const float qv = q[i][d];
            for (int l = 0; l < L; ++l) {
              const float t = qv - lane[l];
              acc[i][l] += t * t;
            }
          }
        }
        const int valid = static_cast<int>(std::min<std::size_t>(L, n_entries - b * L));
        for (int i = 0; i < kQueryTile; ++i) {
          for (int l = 0; l < valid; ++l) best[i] = std::min(best[i], acc[i][l]);
        }
      }
      for (int i = 0; i < nq; ++i) {
        out.scores[q0 + i] = std::sqrt(static_cast<double>(best[i]));
      }
    }
  });
  return out;
}

AnomalyMap segment(std::span<const FeatureTensor> stage_features,
                   std::span<const int> patch_sizes, const MemoryBank& bank,
                   int image_h, int image_w) {
  const PatchGrid grid = extract_patches(stage_features, patch_sizes);
  return bilinear_resize(nn_distances(grid, bank), image_h, image_w);
}

namespace {

float squared_distance(std::span<const float> a, std::span<const float> b) {
  float acc = 0.0f;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const float t = a[d] - b[d];
    acc += t * t;
  }
  return acc;
}

}  // namespace

std::vector<std::size_t> greedy_k_center(const MemoryBank& bank, std::size_t count,
                                         std::size_t first_center) {
  if (bank.empty()) throw std::invalid_argument("coreset: empty memory bank");
  if (first_center >= bank.size()) throw std::invalid_argument("coreset: first center out of range");
  count = std::min(count, bank.size());

  std::vector<std::size_t> selected;
  selected.reserve(count);
  std::vector<float> nearest(bank.size(), std::numeric_limits<float>::infinity());
  std::size_t next = first_center;
  while (selected.size() < count) {
    selected.push_back(next);
    const auto center = bank.entry(next);
    std::size_t far_idx = 0;
    float far_dist = -1.0f;
    for (std::size_t i = 0; i < bank.size(); ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(bank.entry(i), center));
      if (nearest[i] > far_dist) {
        far_dist = nearest[i];
        far_idx = i;
      }
    }
    next = far_idx;
  }
  return selected;
}

MemoryBank coreset_subsample(const MemoryBank& bank, double ratio, std::uint64_t rng_seed) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw std::invalid_argument("coreset: ratio must lie in (0, 1]");
  if (bank.empty()) throw std::invalid_argument("coreset: empty memory bank");
  // The epsilon keeps ratios like 2/3 * 3 from rounding up past the intent.
  const auto count = static_cast<std::size_t>(
      std::ceil(ratio * static_cast<double>(bank.size()) - 1e-9));
  std::mt19937_64 rng(rng_seed);
  std::uniform_int_distribution<std::size_t> pick(0, bank.size() - 1);
  auto selected = greedy_k_center(bank, std::max<std::size_t>(count, 1), pick(rng));
  std::sort(selected.begin(), selected.end());

  std::vector<float> rows;
  rows.reserve(selected.size() * bank.dim());
  std::vector<std::uint32_t> sources;
  sources.reserve(selected.size());
  for (auto i : selected) {
    const auto e = bank.entry(i);
    rows.insert(rows.end(), e.begin(), e.end());
    sources.push_back(bank.source(i));
  }
  return make_bank(bank.dim(), std::move(rows), std::move(sources));
}

}  // namespace patchnas
