#include "patchnas/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "patchnas/error.hpp"

namespace patchnas {

std::vector<std::size_t> RegionMask::region_areas() const {
  std::vector<std::size_t> areas(num_regions, 0);
  for (int label : labels) {
    if (label > 0) ++areas[label - 1];
  }
  return areas;
}

RegionMask label_regions(std::span<const std::uint8_t> binary_mask, int height,
                         int width, std::optional<std::string> anomaly_type) {
  if (height < 1 || width < 1) {
    throw std::invalid_argument("label_regions: mask dimensions must be positive");
  }
  const std::size_t n = static_cast<std::size_t>(height) * width;
  if (binary_mask.size() != n) {
    throw std::invalid_argument("label_regions: mask size does not match dimensions");
  }
  RegionMask out;
  out.height = height;
  out.width = width;
  out.labels.assign(n, 0);
  out.anomaly_type = std::move(anomaly_type);

  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < n; ++start) {
    if (binary_mask[start] == 0 || out.labels[start] != 0) continue;
    const int id = ++out.num_regions;
    out.labels[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const int y = static_cast<int>(p / width);
      const int x = static_cast<int>(p % width);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int ny = y + dy;
          const int nx = x + dx;
          if (ny < 0 || ny >= height || nx < 0 || nx >= width) continue;
          const std::size_t q = static_cast<std::size_t>(ny) * width + nx;
          if (binary_mask[q] != 0 && out.labels[q] == 0) {
            out.labels[q] = id;
            stack.push_back(q);
          }
        }
      }
    }
  }
  return out;
}

namespace {

const std::string& type_key(const RegionMask& mask) {
  static const std::string kUntyped;
  return mask.anomaly_type ? *mask.anomaly_type : kUntyped;
}

void check_eval(const EvalSet& eval) {
  for (const auto& item : eval) {
    const auto& s = item.scores;
    const auto& m = item.mask;
    if (s.height != m.height || s.width != m.width ||
        s.scores.size() != m.labels.size() ||
        s.scores.size() != static_cast<std::size_t>(s.height) * s.width) {
      throw std::invalid_argument("eval set: score map and mask dimensions differ");
    }
    for (double v : s.scores) {
      if (!std::isfinite(v)) throw std::invalid_argument("eval set: non-finite score");
    }
  }
}

struct SweepStep {
  double threshold = 0.0;
  double tp = 0.0;
  double fp = 0.0;
  double weighted_tp = 0.0;
  double overlap_sum = 0.0;  // sum over regions of TP_r / A_r
};

struct Sweep {
  std::vector<SweepStep> steps;  // cumulative, descending threshold
  double positives = 0.0;
  double negatives = 0.0;
  double weighted_positives = 0.0;
  int regions = 0;
};

struct Pixel {
  double key;
  double weight;
  double overlap;
  bool positive;
};

Sweep run_sweep(const EvalSet& eval, const RegionWeights* weights, SweepMode mode) {
  check_eval(eval);
  std::size_t total = 0;
  for (const auto& item : eval) total += item.scores.scores.size();

  std::vector<Pixel> pixels;
  pixels.reserve(total);
  Sweep sweep;
  for (std::size_t i = 0; i < eval.size(); ++i) {
    const auto& item = eval[i];
    const auto areas = item.mask.region_areas();
    sweep.regions += item.mask.num_regions;
    for (std::size_t p = 0; p < item.scores.scores.size(); ++p) {
      const int region = item.mask.labels[p];
      Pixel px{item.scores.scores[p], 0.0, 0.0, region != 0};
      if (px.positive) {
        px.weight = weights ? weights->weight(i, region) : 1.0;
        px.overlap = 1.0 / static_cast<double>(areas[region - 1]);
        sweep.positives += 1.0;
        sweep.weighted_positives += px.weight;
      } else {
        sweep.negatives += 1.0;
      }
      pixels.push_back(px);
    }
  }

  double lo = 0.0;
  double bin_width = 0.0;
  if (mode == SweepMode::kBinned && !pixels.empty()) {
    auto [mn, mx] = std::minmax_element(pixels.begin(), pixels.end(),
                                        [](const Pixel& a, const Pixel& b) { return a.key < b.key; });
    lo = mn->key;
    const double hi = mx->key;
    bin_width = (hi - lo) / kDefaultBins;
    for (auto& px : pixels) {
      double bin = bin_width > 0.0 ? std::floor((px.key - lo) / bin_width) : 0.0;
      px.key = std::clamp(bin, 0.0, static_cast<double>(kDefaultBins - 1));
    }
  }

  std::sort(pixels.begin(), pixels.end(),
            [](const Pixel& a, const Pixel& b) { return a.key > b.key; });

  SweepStep acc;
  for (std::size_t p = 0; p < pixels.size();) {
    const double key = pixels[p].key;
    for (; p < pixels.size() && pixels[p].key == key; ++p) {
      const Pixel& px = pixels[p];
      if (px.positive) {
        acc.tp += 1.0;
        acc.weighted_tp += px.weight;
        acc.overlap_sum += px.overlap;
      } else {
        acc.fp += 1.0;
      }
    }
    acc.threshold = mode == SweepMode::kBinned ? lo + key * bin_width : key;
    sweep.steps.push_back(acc);
  }
  return sweep;
}

void require_positives(const Sweep& sweep) {
  if (sweep.positives == 0.0) {
    throw std::invalid_argument("eval set has no anomalous pixels");
  }
}

void require_both_classes(const Sweep& sweep) {
  if (sweep.positives == 0.0 || sweep.negatives == 0.0) {
    throw std::invalid_argument("eval set contains only one class");
  }
}

std::vector<CurvePoint> pr_from_sweep(const Sweep& sweep, bool weighted) {
  std::vector<CurvePoint> curve;
  curve.reserve(sweep.steps.size());
  const double denom = weighted ? sweep.weighted_positives : sweep.positives;
  for (const auto& s : sweep.steps) {
    const double tp = weighted ? s.weighted_tp : s.tp;
    const double predicted = tp + s.fp;
    const double precision = predicted > 0.0 ? tp / predicted : 1.0;
    curve.push_back({s.threshold, tp / denom, precision});
  }
  return curve;
}

std::vector<CurvePoint> roc_from_sweep(const Sweep& sweep) {
  std::vector<CurvePoint> curve;
  curve.reserve(sweep.steps.size() + 1);
  curve.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  for (const auto& s : sweep.steps) {
    curve.push_back({s.threshold, s.fp / sweep.negatives, s.tp / sweep.positives});
  }
  return curve;
}

std::vector<CurvePoint> pro_from_sweep(const Sweep& sweep) {
  std::vector<CurvePoint> curve;
  curve.reserve(sweep.steps.size() + 1);
  curve.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  for (const auto& s : sweep.steps) {
    curve.push_back({s.threshold, s.fp / sweep.negatives,
                     std::min(1.0, s.overlap_sum / sweep.regions)});
  }
  return curve;
}

void check_limit(double fpr_limit) {
  if (!(fpr_limit > 0.0 && fpr_limit <= 1.0)) {
    throw std::invalid_argument("fpr_limit must lie in (0, 1]");
  }
}

}  // namespace

RegionWeights region_weights(const EvalSet& eval) {
  RegionWeights out;
  std::size_t region_count = 0;
  double area_total = 0.0;
  for (const auto& item : eval) {
    const auto areas = item.mask.region_areas();
    region_count += areas.size();
    for (auto a : areas) area_total += static_cast<double>(a);
    if (item.mask.num_regions > 0) {
      out.regions_per_type[type_key(item.mask)] += item.mask.num_regions;
    }
  }
  if (region_count == 0) throw std::invalid_argument("empty region set");

  out.area_mean = area_total / static_cast<double>(region_count);
  out.regions_per_type_mean =
      static_cast<double>(region_count) / static_cast<double>(out.regions_per_type.size());

  out.weights.reserve(eval.size());
  for (const auto& item : eval) {
    const auto areas = item.mask.region_areas();
    std::vector<double> w(areas.size());
    if (!areas.empty()) {
      const double type_factor = out.regions_per_type_mean /
                                 static_cast<double>(out.regions_per_type.at(type_key(item.mask)));
      for (std::size_t r = 0; r < areas.size(); ++r) {
        w[r] = out.area_mean / static_cast<double>(areas[r]) * type_factor;
      }
    }
    out.weights.push_back(std::move(w));
  }
  return out;
}

RegionWeights unit_weights(const EvalSet& eval) {
  RegionWeights out;
  for (const auto& item : eval) {
    out.weights.emplace_back(item.mask.num_regions, 1.0);
  }
  return out;
}

std::vector<CurvePoint> precision_recall_curve(const EvalSet& eval,
                                               const RegionWeights* weights,
                                               SweepMode mode) {
  const Sweep sweep = run_sweep(eval, weights, mode);
  require_positives(sweep);
  return pr_from_sweep(sweep, weights != nullptr);
}

std::vector<CurvePoint> roc_curve(const EvalSet& eval, SweepMode mode) {
  const Sweep sweep = run_sweep(eval, nullptr, mode);
  require_both_classes(sweep);
  return roc_from_sweep(sweep);
}

std::vector<CurvePoint> pro_curve(const EvalSet& eval, SweepMode mode) {
  const Sweep sweep = run_sweep(eval, nullptr, mode);
  if (sweep.regions == 0) throw std::invalid_argument("empty region set");
  require_both_classes(sweep);
  return pro_from_sweep(sweep);
}

double step_area(std::span<const CurvePoint> pr_curve) {
  double area = 0.0;
  double prev_recall = 0.0;
  for (const auto& pt : pr_curve) {
    area += (pt.x - prev_recall) * pt.y;
    prev_recall = pt.x;
  }
  return area;
}

double normalized_trapezoid_area(std::span<const CurvePoint> curve, double x_limit) {
  check_limit(x_limit);
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    const CurvePoint& a = curve[i - 1];
    const CurvePoint& b = curve[i];
    if (a.x >= x_limit) break;
    if (b.x <= x_limit) {
      area += (b.x - a.x) * (a.y + b.y) * 0.5;
    } else {
      const double t = (x_limit - a.x) / (b.x - a.x);
      const double y_at_limit = a.y + t * (b.y - a.y);
      area += (x_limit - a.x) * (a.y + y_at_limit) * 0.5;
      break;
    }
  }
  return area / x_limit;
}

double average_precision(const EvalSet& eval, SweepMode mode) {
  const auto curve = precision_recall_curve(eval, nullptr, mode);
  return step_area(curve);
}

double rwap(const EvalSet& eval, const RegionWeights& weights, SweepMode mode) {
  if (weights.weights.size() != eval.size()) {
    throw std::invalid_argument("rwap: weights were computed for a different eval set");
  }
  for (std::size_t i = 0; i < eval.size(); ++i) {
    if (weights.weights[i].size() != static_cast<std::size_t>(eval[i].mask.num_regions)) {
      throw std::invalid_argument("rwap: weights were computed for a different eval set");
    }
  }
  const auto curve = precision_recall_curve(eval, &weights, mode);
  return step_area(curve);
}

double rwap(const EvalSet& eval, SweepMode mode) {
  return rwap(eval, region_weights(eval), mode);
}

double auroc(const EvalSet& eval, double fpr_limit, SweepMode mode) {
  check_limit(fpr_limit);
  const auto curve = roc_curve(eval, mode);
  return normalized_trapezoid_area(curve, fpr_limit);
}

double aupro(const EvalSet& eval, double fpr_limit, SweepMode mode) {
  check_limit(fpr_limit);
  const auto curve = pro_curve(eval, mode);
  return normalized_trapezoid_area(curve, fpr_limit);
}

MetricRequest parse_metric(const std::string& name) {
  MetricRequest req;
  req.name = name;
  std::string base = name;
  const auto at = name.find('@');
  if (at != std::string::npos) {
    base = name.substr(0, at);
    const std::string limit_text = name.substr(at + 1);
    double limit = 0.0;
    const auto* first = limit_text.data();
    const auto* last = first + limit_text.size();
    auto [ptr, ec] = std::from_chars(first, last, limit);
    if (ec != std::errc() || ptr != last || !(limit > 0.0 && limit <= 1.0)) {
      throw ConfigError("invalid FPR limit in metric '" + name + "'");
    }
    req.fpr_limit = limit;
  }
  if (base == "ap") {
    req.kind = MetricKind::kAp;
  } else if (base == "rwap") {
    req.kind = MetricKind::kRwap;
  } else if (base == "auroc") {
    req.kind = MetricKind::kAuroc;
  } else if (base == "aupro") {
    req.kind = MetricKind::kAupro;
  } else {
    throw ConfigError("unknown metric '" + name + "'");
  }
  const bool fpr_based = req.kind == MetricKind::kAuroc || req.kind == MetricKind::kAupro;
  if (req.fpr_limit && !fpr_based) {
    throw ConfigError("metric '" + base + "' does not take an FPR limit");
  }
  if (fpr_based && !req.fpr_limit) req.fpr_limit = 1.0;
  return req;
}

std::vector<MetricResult> evaluate_metrics(const EvalSet& eval,
                                           std::span<const MetricRequest> requests,
                                           SweepMode mode) {
  std::vector<MetricResult> out;
  out.reserve(requests.size());
  std::optional<RegionWeights> weights;
  for (const auto& req : requests) {
    MetricResult r{req.name, 0.0, req.fpr_limit};
    switch (req.kind) {
      case MetricKind::kAp:
        r.value = average_precision(eval, mode);
        break;
      case MetricKind::kRwap:
        if (!weights) weights = region_weights(eval);
        r.value = rwap(eval, *weights, mode);
        break;
      case MetricKind::kAuroc:
        r.value = auroc(eval, *req.fpr_limit, mode);
        break;
      case MetricKind::kAupro:
        r.value = aupro(eval, *req.fpr_limit, mode);
        break;
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace patchnas
