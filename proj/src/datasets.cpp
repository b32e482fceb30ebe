#include "patchnas/datasets.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "patchnas/error.hpp"
#include "patchnas/image_io.hpp"
#include "patchnas/seeding.hpp"

namespace patchnas {

namespace fs = std::filesystem;

std::string image_id(const ManifestItem& item) {
  fs::path p(item.image);
  return (p.parent_path() / p.stem()).generic_string();
}

nlohmann::json manifest_to_json(const DatasetManifest& manifest) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& it : manifest.items) {
    nlohmann::json j = {{"image", it.image},
                        {"split", it.split == OriginalSplit::kTrain ? "train" : "test"}};
    if (it.mask) j["mask"] = *it.mask;
    if (it.anomaly_type) j["type"] = *it.anomaly_type;
    items.push_back(std::move(j));
  }
  return {{"category", manifest.category}, {"image_size", manifest.image_size}, {"items", items}};
}

DatasetManifest manifest_from_json(const nlohmann::json& j, fs::path root) {
  DatasetManifest m;
  m.root = std::move(root);
  try {
    m.category = j.at("category").get<std::string>();
    m.image_size = j.at("image_size").get<int>();
    for (const auto& ji : j.at("items")) {
      ManifestItem it;
      it.image = ji.at("image").get<std::string>();
      const auto split = ji.at("split").get<std::string>();
      if (split == "train") {
        it.split = OriginalSplit::kTrain;
      } else if (split == "test") {
        it.split = OriginalSplit::kTest;
      } else {
        throw DataError("manifest item " + it.image + ": unknown split '" + split + "'");
      }
      if (ji.contains("mask") && !ji["mask"].is_null()) it.mask = ji["mask"].get<std::string>();
      if (ji.contains("type") && !ji["type"].is_null()) it.anomaly_type = ji["type"].get<std::string>();
      m.items.push_back(std::move(it));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

void validate_manifest(const DatasetManifest& manifest, bool check_files) {
  if (manifest.image_size <= 0) throw DataError("manifest: image_size must be positive");
  std::set<std::string> seen;
  for (const auto& it : manifest.items) {
    if (!seen.insert(it.image).second) throw DataError("manifest: duplicate image path " + it.image);
    if (it.split == OriginalSplit::kTrain && (it.mask || it.anomaly_type)) {
      throw DataError("manifest: train item " + it.image + " has a mask or anomaly type");
    }
    if (it.anomaly_type && !it.mask) {
      throw DataError("manifest: missing mask for anomalous item " + it.image);
    }
    if (it.mask && !it.anomaly_type) {
      throw DataError("manifest: mask without anomaly type for item " + it.image);
    }
    if (check_files && it.mask) {
      const auto a = read_png_size(manifest.resolve(it.image));
      const auto b = read_png_size(manifest.resolve(*it.mask));
      if (a.height != b.height || a.width != b.width) {
        throw DataError("manifest: dimension mismatch between " + it.image + " and " + *it.mask);
      }
    }
  }
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest " + path.string() + " does not parse: " + e.what());
  }
  auto m = manifest_from_json(j, path.parent_path());
  validate_manifest(m);
  return m;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << manifest_to_json(manifest).dump(2) << '\n';
}

namespace {

std::vector<fs::path> sorted_pngs(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string rel(const fs::path& p, const fs::path& root) {
  return fs::relative(p, root).generic_string();
}

}  // namespace

DatasetManifest scan_mvtec_category(const fs::path& category_dir) {
  if (!fs::is_directory(category_dir / "train" / "good")) {
    throw DataError("not an MVTec category directory: " + category_dir.string());
  }
  DatasetManifest m;
  m.root = category_dir;
  m.category = category_dir.filename().string();
  for (const auto& p : sorted_pngs(category_dir / "train" / "good")) {
    m.items.push_back({rel(p, category_dir), std::nullopt, std::nullopt, OriginalSplit::kTrain});
  }
  std::vector<fs::path> type_dirs;
  for (const auto& e : fs::directory_iterator(category_dir / "test")) {
    if (e.is_directory()) type_dirs.push_back(e.path());
  }
  std::sort(type_dirs.begin(), type_dirs.end());
  for (const auto& dir : type_dirs) {
    const std::string type = dir.filename().string();
    for (const auto& p : sorted_pngs(dir)) {
      ManifestItem it{rel(p, category_dir), std::nullopt, std::nullopt, OriginalSplit::kTest};
      if (type != "good") {
        const fs::path mask = category_dir / "ground_truth" / type / (p.stem().string() + "_mask.png");
        if (!fs::exists(mask)) throw DataError("missing mask for anomalous item " + it.image);
        it.mask = rel(mask, category_dir);
        it.anomaly_type = type;
      }
      m.items.push_back(std::move(it));
    }
  }
  if (m.items.empty()) throw DataError("no images under " + category_dir.string());
  const auto size = read_png_size(category_dir / m.items.front().image);
  m.image_size = std::max(size.height, size.width);
  validate_manifest(m);
  return m;
}

SplitSpec make_splits(const DatasetManifest& manifest, int k) {
  if (k != 1 && k != 2 && k != 4) throw ConfigError("invalid parameter: k must be 1, 2 or 4");
  auto by_path = [&](std::size_t a, std::size_t b) {
    return manifest.items[a].image < manifest.items[b].image;
  };
  std::vector<std::size_t> train_normals;
  std::vector<std::size_t> test_normals;
  std::map<std::string, std::vector<std::size_t>> anomalies;
  for (std::size_t i = 0; i < manifest.items.size(); ++i) {
    const auto& it = manifest.items[i];
    if (it.anomaly_type) {
      anomalies[*it.anomaly_type].push_back(i);
    } else if (it.split == OriginalSplit::kTrain) {
      train_normals.push_back(i);
    } else {
      test_normals.push_back(i);
    }
  }
  std::sort(train_normals.begin(), train_normals.end(), by_path);
  std::sort(test_normals.begin(), test_normals.end(), by_path);
  if (train_normals.size() <= test_normals.size()) {
    throw DataError("insufficient normals: need more train normals than test normals");
  }
  for (auto& [type, idx] : anomalies) {
    std::sort(idx.begin(), idx.end(), by_path);
    if (idx.size() < kReservedAnomaliesPerType + 1) {
      throw DataError("insufficient anomalies: type '" + type + "' has " +
                      std::to_string(idx.size()) + ", need at least 5");
    }
  }

  SplitSpec s;
  s.k = k;
  const std::size_t n_keep = train_normals.size() - test_normals.size();
  s.train.assign(train_normals.begin(), train_normals.begin() + static_cast<std::ptrdiff_t>(n_keep));
  s.validation.assign(train_normals.begin() + static_cast<std::ptrdiff_t>(n_keep), train_normals.end());
  s.test = test_normals;
  for (const auto& [type, idx] : anomalies) {
    s.validation.insert(s.validation.end(), idx.begin(), idx.begin() + k);
    s.test.insert(s.test.end(), idx.begin() + kReservedAnomaliesPerType, idx.end());
  }
  return s;
}

nlohmann::json split_paths_json(const DatasetManifest& manifest,
                                const std::vector<std::size_t>& indices) {
  nlohmann::json out = nlohmann::json::array();
  for (auto i : indices) out.push_back(manifest.items.at(i).image);
  return out;
}

namespace {

enum class Perturbation { kBlob, kScratch, kHole };

struct Texture {
  float base[3];
  float f1x, f1y, f2x, f2y;
};

Texture category_texture(std::mt19937_64& rng) {
  std::uniform_real_distribution<float> col(0.3f, 0.6f);
  std::uniform_real_distribution<float> freq(1.5f, 6.0f);
  Texture t{};
  for (auto& b : t.base) b = col(rng);
  t.f1x = freq(rng);
  t.f1y = freq(rng) * 0.5f;
  t.f2x = freq(rng) * 0.5f;
  t.f2y = freq(rng);
  return t;
}

FeatureTensor normal_image(const Texture& t, int size, std::mt19937_64& rng) {
  constexpr float two_pi = 2.0f * std::numbers::pi_v<float>;
  std::uniform_real_distribution<float> phase(0.0f, two_pi);
  std::normal_distribution<float> noise(0.0f, 0.02f);
  const float p1 = phase(rng);
  const float p2 = phase(rng);
  FeatureTensor img(3, size, size);
  const float s = static_cast<float>(size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const float w1 = std::sin(two_pi * (t.f1x * x + t.f1y * y) / s + p1);
      const float w2 = std::sin(two_pi * (t.f2x * x + t.f2y * y) / s + p2);
      for (int c = 0; c < 3; ++c) {
        const float v = t.base[c] + 0.12f * w1 + (c == 1 ? -0.08f : 0.08f) * w2 + noise(rng);
        img.at(c, y, x) = std::clamp(v, 0.0f, 1.0f);
      }
    }
  }
  return img;
}

// Paints the perturbation into img and returns its exact mask.
GrayImage perturb(FeatureTensor& img, Perturbation kind, std::mt19937_64& rng) {
  const int size = img.height;
  const float s = static_cast<float>(size);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  GrayImage mask(size, size);
  const float cx = s * (0.25f + 0.5f * unit(rng));
  const float cy = s * (0.25f + 0.5f * unit(rng));

  auto paint = [&](auto&& inside, auto&& colour) {
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const float px = static_cast<float>(x) + 0.5f;
        const float py = static_cast<float>(y) + 0.5f;
        if (!inside(px, py)) continue;
        mask.at(y, x) = 255;
        const auto rgb = colour(px, py);
        for (int c = 0; c < 3; ++c) img.at(c, y, x) = rgb[c];
      }
    }
  };

  switch (kind) {
    case Perturbation::kBlob: {
      const float rx = s * (1.0f / 12 + unit(rng) / 12);
      const float ry = s * (1.0f / 12 + unit(rng) / 12);
      const float a = unit(rng) * std::numbers::pi_v<float>;
      const float ca = std::cos(a), sa = std::sin(a);
      paint(
          [&](float px, float py) {
            const float dx = px - cx, dy = py - cy;
            const float u = (dx * ca + dy * sa) / rx;
            const float v = (-dx * sa + dy * ca) / ry;
            return u * u + v * v <= 1.0f;
          },
          [](float, float) { return std::array<float, 3>{0.85f, 0.25f, 0.2f}; });
      break;
    }
    case Perturbation::kScratch: {
      const float len = s * (0.3f + 0.3f * unit(rng));
      const float a = unit(rng) * 2.0f * std::numbers::pi_v<float>;
      const float x0 = cx - 0.5f * len * std::cos(a), y0 = cy - 0.5f * len * std::sin(a);
      const float x1 = cx + 0.5f * len * std::cos(a), y1 = cy + 0.5f * len * std::sin(a);
      const float half = std::max(1.0f, s / 64.0f);
      paint(
          [&](float px, float py) {
            const float vx = x1 - x0, vy = y1 - y0;
            float t = ((px - x0) * vx + (py - y0) * vy) / (vx * vx + vy * vy);
            t = std::clamp(t, 0.0f, 1.0f);
            const float dx = px - (x0 + t * vx), dy = py - (y0 + t * vy);
            return dx * dx + dy * dy <= half * half;
          },
          [](float, float) { return std::array<float, 3>{0.97f, 0.97f, 0.92f}; });
      break;
    }
    case Perturbation::kHole: {
      const float r = s * (1.0f / 14 + unit(rng) / 16);
      paint(
          [&](float px, float py) { return (px - cx) * (px - cx) + (py - cy) * (py - cy) <= r * r; },
          [&](float px, float py) {
            const float d = std::sqrt((px - cx) * (px - cx) + (py - cy) * (py - cy)) / r;
            const float v = 0.03f + 0.07f * d;
            return std::array<float, 3>{v, v, v};
          });
      break;
    }
  }
  return mask;
}

Perturbation perturbation_for(const std::string& type, std::size_t type_index) {
  if (type == "blob") return Perturbation::kBlob;
  if (type == "scratch") return Perturbation::kScratch;
  if (type == "hole") return Perturbation::kHole;
  return static_cast<Perturbation>(type_index % 3);
}

std::string numbered(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03d", i);
  return buf;
}

}  // namespace

std::vector<DatasetManifest> generate_synthetic(const SyntheticSpec& spec, const fs::path& out_dir) {
  if (spec.image_size < 32) throw ConfigError("invalid parameter: synthetic image_size must be >= 32");
  if (spec.n_train < 1 || spec.n_test_normal < 0) {
    throw ConfigError("invalid parameter: synthetic image counts");
  }
  if (spec.categories.empty()) throw ConfigError("invalid parameter: no categories");
  std::vector<DatasetManifest> manifests;
  for (std::size_t ci = 0; ci < spec.categories.size(); ++ci) {
    const std::string& cat = spec.categories[ci];
    const fs::path root = out_dir / cat;
    std::mt19937_64 cat_rng(mix_seed(spec.seed, ci));
    const Texture tex = category_texture(cat_rng);

    DatasetManifest m;
    m.category = cat;
    m.image_size = spec.image_size;
    m.root = root;
    std::uint64_t image_counter = 0;
    auto next_rng = [&] { return std::mt19937_64(mix_seed(mix_seed(spec.seed, ci), ++image_counter)); };

    for (int i = 0; i < spec.n_train; ++i) {
      auto rng = next_rng();
      const std::string path = "train/good/" + numbered(i) + ".png";
      write_png_rgb(root / path, normal_image(tex, spec.image_size, rng));
      m.items.push_back({path, std::nullopt, std::nullopt, OriginalSplit::kTrain});
    }
    for (int i = 0; i < spec.n_test_normal; ++i) {
      auto rng = next_rng();
      const std::string path = "test/good/" + numbered(i) + ".png";
      write_png_rgb(root / path, normal_image(tex, spec.image_size, rng));
      m.items.push_back({path, std::nullopt, std::nullopt, OriginalSplit::kTest});
    }
    for (std::size_t ti = 0; ti < spec.types.size(); ++ti) {
      const auto& [type, count] = spec.types[ti];
      if (type == "good" || type.empty()) throw ConfigError("invalid parameter: anomaly type name '" + type + "'");
      const Perturbation kind = perturbation_for(type, ti);
      for (int i = 0; i < count; ++i) {
        auto rng = next_rng();
        FeatureTensor img = normal_image(tex, spec.image_size, rng);
        const GrayImage mask = perturb(img, kind, rng);
        const std::string path = "test/" + type + "/" + numbered(i) + ".png";
        const std::string mask_path = "ground_truth/" + type + "/" + numbered(i) + "_mask.png";
        write_png_rgb(root / path, img);
        write_png_gray(root / mask_path, mask);
        m.items.push_back({path, mask_path, type, OriginalSplit::kTest});
      }
    }
    save_manifest(m, root / "manifest.json");
    manifests.push_back(std::move(m));
  }
  return manifests;
}

}  // namespace patchnas
