#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace patchnas {

enum class OriginalSplit { kTrain, kTest };

struct ManifestItem {
  std::string image;  // relative to the manifest directory
  std::optional<std::string> mask;
  std::optional<std::string> anomaly_type;
  OriginalSplit split = OriginalSplit::kTrain;

  bool anomalous() const { return anomaly_type.has_value(); }
  friend bool operator==(const ManifestItem&, const ManifestItem&) = default;
};

// One category. Relative paths resolve against root.
struct DatasetManifest {
  std::string category;
  int image_size = 0;
  std::vector<ManifestItem> items;
  std::filesystem::path root;

  std::filesystem::path resolve(const std::string& relative) const { return root / relative; }
};

// Image path without extension; the key used by feature caches and the
// exporter protocol.
std::string image_id(const ManifestItem& item);

nlohmann::json manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const nlohmann::json& j, std::filesystem::path root);

// Structural checks: train items carry no mask or type, anomalous items
// carry both, a mask implies a type, paths are unique. With check_files,
// every mask must match its image's dimensions. Throws DataError.
void validate_manifest(const DatasetManifest& manifest, bool check_files = true);

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// Reads <dir>/train/good, <dir>/test/good, <dir>/test/<type> and masks
// <dir>/ground_truth/<type>/<name>_mask.png.
DatasetManifest scan_mvtec_category(const std::filesystem::path& category_dir);

// Item indices into the manifest for each derived split.
struct SplitSpec {
  int k = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

inline constexpr int kReservedAnomaliesPerType = 4;

// k-shot protocol. Normals and per-type anomalies are ordered by image
// path. train = all but the last n_test_normal train normals;
// validation = those last train normals + the first k anomalies per type;
// test = all test normals + each type's anomalies after the first 4.
// k must be 1, 2 or 4 (ConfigError); a type with fewer than 5 anomalies or
// too few train normals is a DataError.
SplitSpec make_splits(const DatasetManifest& manifest, int k);

// Image paths of one split, in split order.
nlohmann::json split_paths_json(const DatasetManifest& manifest,
                                const std::vector<std::size_t>& indices);

struct SyntheticSpec {
  std::vector<std::string> categories{"synthetic"};
  int n_train = 12;
  int n_test_normal = 4;
  std::vector<std::pair<std::string, int>> types{{"blob", 5}, {"scratch", 5}, {"hole", 5}};
  int image_size = 64;
  std::uint64_t seed = 0;
};

// Writes an MVTec-style tree plus manifest.json under out_dir/<category>
// for each category. The names blob, scratch and hole select that
// perturbation; other names cycle through the three by position. Output
// bytes depend only on the spec.
std::vector<DatasetManifest> generate_synthetic(const SyntheticSpec& spec,
                                                const std::filesystem::path& out_dir);

}  // namespace patchnas
