#pragma once

#include <optional>
#include <string>
#include <vector>

#include "patchnas/architecture.hpp"
#include "patchnas/backend.hpp"
#include "patchnas/datasets.hpp"
#include "patchnas/metrics.hpp"
#include "patchnas/patch_engine.hpp"
#include "patchnas/search.hpp"

namespace patchnas {

// One image resized to the encoder input resolution. Normal images get an
// all-zero mask.
struct LoadedImage {
  std::string id;
  FeatureTensor image;
  RegionMask mask;
};

// Masks are resized bilinearly and thresholded at 0.5 before labeling.
std::vector<LoadedImage> load_images(const DatasetManifest& manifest,
                                     const std::vector<std::size_t>& indices, int input_size);

struct SplitImages {
  std::vector<LoadedImage> train;
  std::vector<LoadedImage> validation;
  std::vector<LoadedImage> test;
};

SplitImages load_split_images(const DatasetManifest& manifest, const SplitSpec& split,
                              int input_size);

// Patch size of each extracted stage, in stage order.
std::vector<int> extracted_patch_sizes(const ArchitectureConfig& config);

// Full (not subsampled) memory bank over the training images.
MemoryBank build_memory_bank(FeatureSource& source, const ArchitectureConfig& config,
                             const std::vector<LoadedImage>& train);

// Anomaly maps at input resolution, paired with the ground truth.
EvalSet score_images(FeatureSource& source, const ArchitectureConfig& config,
                     const MemoryBank& bank, const std::vector<LoadedImage>& images);

// Evaluator for the search: bank rebuilt from train on every call, rwAP on
// the validation images, GFLOPS at the source's input resolution.
Evaluator make_rwap_evaluator(FeatureSource& source, const SplitImages& data);

}  // namespace patchnas
