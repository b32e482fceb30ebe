#pragma once

// Independent reference implementations. They share no code with the
// library beyond plain data types, and favour obviousness over speed.

#include <cstdint>
#include <random>
#include <vector>

#include "patchnas/architecture.hpp"
#include "patchnas/metrics.hpp"
#include "patchnas/pareto.hpp"
#include "patchnas/patch_engine.hpp"

namespace oracle {

// One point per unique score, highest threshold first.
struct Confusion {
  double threshold = 0.0;
  double tp = 0, fp = 0, fn = 0, tn = 0;
  double rw_tp = 0, rw_fn = 0;
  double pro = 0;  // mean per-region overlap
};

// Full confusion matrix at every unique threshold, rebuilt from scratch by
// scanning every pixel. Region weights are derived from the labels here,
// not from the library.
std::vector<Confusion> sweep(const patchnas::EvalSet& eval, bool weighted);

double ap(const patchnas::EvalSet& eval);
double rwap(const patchnas::EvalSet& eval);
double auroc(const patchnas::EvalSet& eval, double fpr_limit);
double aupro(const patchnas::EvalSet& eval, double fpr_limit);

// Region weights (A_mean / A) * (N_mean / N_type) from raw labels.
std::vector<std::vector<double>> region_weights(const patchnas::EvalSet& eval);

// Flood fill over the 8-neighbourhood with an explicit stack.
std::vector<int> flood_fill_labels(const std::vector<std::uint8_t>& mask, int h, int w,
                                   int* num_regions);

// Random eval: <= max_side x max_side images, <= max_images images, <= 3
// types, at least one anomalous and one normal pixel. With quantize, scores
// take few distinct values so ties are common.
patchnas::EvalSet random_eval(std::mt19937_64& rng, int max_side = 32, int max_images = 8,
                              bool quantize = false);

// Naive nearest neighbour: float accumulation in dimension order.
patchnas::ScoreMap naive_nn(const patchnas::PatchGrid& query, const std::vector<float>& bank_rows,
                            int dim);

// Encoder cost by enumerating every convolution as
// out_elems x (k*k*C_in_per_group) MACs, FLOPS = 2 x MACs.
std::int64_t flops(const patchnas::ArchitectureConfig& config, int input_resolution);

// O(n^2) dominance filter over feasible, non-failed trials. Returns trial
// indices ascending.
std::vector<std::size_t> pareto_indices(const std::vector<patchnas::Trial>& trials);

// Monte-Carlo estimate of the dominated area inside the reference box
// [ref_p, max_p] x [min_c, ref_c]; returns {estimate, standard error}.
std::pair<double, double> monte_carlo_hypervolume(const std::vector<patchnas::ObjectivePoint>& points,
                                                  double ref_p, double ref_c, int samples,
                                                  std::mt19937_64& rng);

// Seeded bi-objective toy problem over the search space.
struct ToyProblem {
  patchnas::ParamVector target{};
  double ref_performance = 0.0;
  double ref_complexity = 0.0;

  explicit ToyProblem(std::uint64_t seed);
  // 1 - ||x - x*|| / sqrt(dims) over indices scaled to [0, 1].
  double performance(const patchnas::ArchitectureConfig& config) const;
  double complexity(const patchnas::ArchitectureConfig& config) const;
};

}  // namespace oracle
