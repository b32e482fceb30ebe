#include "patchnas/pipeline.hpp"

#include "patchnas/error.hpp"
#include "patchnas/flops.hpp"
#include "patchnas/image_io.hpp"

namespace patchnas {

namespace {

RegionMask load_mask(const DatasetManifest& manifest, const ManifestItem& item, int input_size) {
  if (!item.mask) {
    std::vector<std::uint8_t> zeros(static_cast<std::size_t>(input_size) * input_size, 0);
    return label_regions(zeros, input_size, input_size);
  }
  const GrayImage raw = read_png_gray(manifest.resolve(*item.mask));
  ScoreMap m(raw.height, raw.width);
  for (std::size_t i = 0; i < raw.pixels.size(); ++i) m.scores[i] = raw.pixels[i] >= 128 ? 1.0 : 0.0;
  const ScoreMap r = bilinear_resize(m, input_size, input_size);
  std::vector<std::uint8_t> binary(r.scores.size());
  for (std::size_t i = 0; i < binary.size(); ++i) binary[i] = r.scores[i] >= 0.5 ? 1 : 0;
  return label_regions(binary, input_size, input_size, item.anomaly_type);
}

std::vector<FeatureTensor> tensors_of(std::vector<StageTensor> stages) {
  std::vector<FeatureTensor> out;
  out.reserve(stages.size());
  for (auto& s : stages) out.push_back(std::move(s.tensor));
  return out;
}

}  // namespace

std::vector<LoadedImage> load_images(const DatasetManifest& manifest,
                                     const std::vector<std::size_t>& indices, int input_size) {
  std::vector<LoadedImage> out;
  out.reserve(indices.size());
  for (auto i : indices) {
    const ManifestItem& item = manifest.items.at(i);
    LoadedImage li;
    li.id = image_id(item);
    li.image = bilinear_resize(read_png_rgb(manifest.resolve(item.image)), input_size, input_size);
    li.mask = load_mask(manifest, item, input_size);
    out.push_back(std::move(li));
  }
  return out;
}

SplitImages load_split_images(const DatasetManifest& manifest, const SplitSpec& split,
                              int input_size) {
  return {load_images(manifest, split.train, input_size),
          load_images(manifest, split.validation, input_size),
          load_images(manifest, split.test, input_size)};
}

std::vector<int> extracted_patch_sizes(const ArchitectureConfig& config) {
  std::vector<int> sizes;
  for (const auto& st : config.stages) {
    if (st.extract) sizes.push_back(st.patch);
  }
  return sizes;
}

MemoryBank build_memory_bank(FeatureSource& source, const ArchitectureConfig& config,
                             const std::vector<LoadedImage>& train) {
  if (train.empty()) throw DataError("no training images");
  const auto patch_sizes = extracted_patch_sizes(config);
  std::vector<PatchGrid> grids;
  grids.reserve(train.size());
  for (const auto& img : train) {
    const auto feats = tensors_of(encode(source, img.id, &img.image, config));
    grids.push_back(extract_patches(feats, patch_sizes));
  }
  return build_bank(grids);
}

EvalSet score_images(FeatureSource& source, const ArchitectureConfig& config,
                     const MemoryBank& bank, const std::vector<LoadedImage>& images) {
  const auto patch_sizes = extracted_patch_sizes(config);
  EvalSet eval;
  eval.reserve(images.size());
  for (const auto& img : images) {
    const auto feats = tensors_of(encode(source, img.id, &img.image, config));
    eval.push_back({segment(feats, patch_sizes, bank, img.image.height, img.image.width), img.mask});
  }
  return eval;
}

Evaluator make_rwap_evaluator(FeatureSource& source, const SplitImages& data) {
  return [&source, &data](const ArchitectureConfig& config) {
    validate(config);
    const MemoryBank bank = build_memory_bank(source, config, data.train);
    const EvalSet eval = score_images(source, config, bank, data.validation);
    return Objectives{rwap(eval), config_gflops(config, source.input_size())};
  };
}

}  // namespace patchnas
