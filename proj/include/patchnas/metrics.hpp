#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "patchnas/tensor.hpp"

namespace patchnas {

// Ground truth for one image. Region ids are 1..num_regions, 0 is normal.
struct RegionMask {
  int height = 0;
  int width = 0;
  std::vector<int> labels;
  int num_regions = 0;
  std::optional<std::string> anomaly_type;

  // Pixel count of each region, indexed by region id - 1.
  std::vector<std::size_t> region_areas() const;
  bool is_anomalous(std::size_t pixel) const { return labels[pixel] != 0; }
};

// 8-connected components of the non-zero pixels, numbered in raster order
// of their first pixel.
RegionMask label_regions(std::span<const std::uint8_t> binary_mask, int height,
                         int width,
                         std::optional<std::string> anomaly_type = std::nullopt);

struct EvalItem {
  ScoreMap scores;
  RegionMask mask;
};

using EvalSet = std::vector<EvalItem>;

// Per-region weighting factor (A_mean / A_ij) * (N_mean / N_k).
struct RegionWeights {
  double area_mean = 0.0;
  double regions_per_type_mean = 0.0;
  std::map<std::string, int> regions_per_type;
  // weights[item][region_id - 1]
  std::vector<std::vector<double>> weights;

  double weight(std::size_t item, int region_id) const {
    return weights[item][region_id - 1];
  }
};

RegionWeights region_weights(const EvalSet& eval);

// Uniform weights (every region weight 1). Turns rwAP into plain AP.
RegionWeights unit_weights(const EvalSet& eval);

enum class SweepMode {
  kExact,   // every unique score is a threshold
  kBinned,  // scores quantized into equal-width bins first
};

inline constexpr int kDefaultBins = 1000;

struct CurvePoint {
  double threshold = 0.0;
  double x = 0.0;
  double y = 0.0;
};

// Precision (y) versus recall (x), one point per threshold, descending.
// With weights, recall and true positives are region-weighted while false
// positives stay unweighted.
std::vector<CurvePoint> precision_recall_curve(const EvalSet& eval,
                                               const RegionWeights* weights = nullptr,
                                               SweepMode mode = SweepMode::kExact);
// TPR (y) versus FPR (x), starting at (0, 0).
std::vector<CurvePoint> roc_curve(const EvalSet& eval, SweepMode mode = SweepMode::kExact);
// Mean per-region overlap (y) versus FPR (x), starting at (0, 0).
std::vector<CurvePoint> pro_curve(const EvalSet& eval, SweepMode mode = SweepMode::kExact);

double average_precision(const EvalSet& eval, SweepMode mode = SweepMode::kExact);
double rwap(const EvalSet& eval, const RegionWeights& weights,
            SweepMode mode = SweepMode::kExact);
double rwap(const EvalSet& eval, SweepMode mode = SweepMode::kExact);
double auroc(const EvalSet& eval, double fpr_limit = 1.0,
             SweepMode mode = SweepMode::kExact);
double aupro(const EvalSet& eval, double fpr_limit = 1.0,
             SweepMode mode = SweepMode::kExact);

// Step sum over a PR curve: sum of (R_i - R_{i-1}) * P_i with R_0 = 0.
double step_area(std::span<const CurvePoint> pr_curve);
// Trapezoidal area up to x = x_limit, divided by x_limit.
double normalized_trapezoid_area(std::span<const CurvePoint> curve, double x_limit);

enum class MetricKind { kAuroc, kAp, kRwap, kAupro };

struct MetricRequest {
  std::string name;
  MetricKind kind = MetricKind::kAp;
  std::optional<double> fpr_limit;
};

struct MetricResult {
  std::string metric;
  double value = 0.0;
  std::optional<double> fpr_limit;
};

// Accepts "ap", "rwap", "auroc", "aupro", with an optional "@<limit>" suffix
// on the two FPR-based metrics, e.g. "auroc@0.3".
MetricRequest parse_metric(const std::string& name);

std::vector<MetricResult> evaluate_metrics(const EvalSet& eval,
                                           std::span<const MetricRequest> requests,
                                           SweepMode mode = SweepMode::kExact);

}  // namespace patchnas
