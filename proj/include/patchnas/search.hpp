#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <json.hpp>

#include "patchnas/architecture.hpp"
#include "patchnas/pareto.hpp"

namespace patchnas {

struct MotpeOptions {
  double gamma = 0.1;
  int min_startup_trials = 10;
  double startup_fraction = 0.05;
  int n_candidates = 24;
  // Weight of the uniform component in each density, and of the uniform
  // spread added to every categorical kernel.
  double prior_weight = 1.0;
};

// max(min_startup_trials, ceil(startup_fraction * budget)).
int startup_trials(const MotpeOptions& options, int budget);

// Multi-objective TPE over the categorical search space. With fewer than
// n_startup usable (non-failed) trials it draws uniformly. Otherwise the
// feasible trials are ranked by nondominated sorting (last partial front
// trimmed by smallest hypervolume contribution) and the best ceil(gamma*n)
// form the good set; everything else, infeasible trials included, forms
// the bad set. Candidates are whole configurations sampled from the good
// mixture; the one maximizing l(x) / g(x) is returned.
ArchitectureConfig suggest_motpe(std::span<const Trial> history, int n_startup,
                                 const MotpeOptions& options, std::mt19937_64& rng);

// Indices (into history) of the good set used by suggest_motpe.
std::vector<std::size_t> select_good_trials(std::span<const Trial> history, double gamma);

// log density of params under a mixture of categorical kernels centered on
// `centers`, plus one uniform component. Exposed for tests.
double log_parzen_density(const ParamVector& params, std::span<const ParamVector> centers,
                          double prior_weight);

enum class SamplerKind { kMotpe, kRandom };

struct Objectives {
  double performance = 0.0;
  double complexity_gflops = 0.0;
};

// May throw; the trial is then recorded as failed.
using Evaluator = std::function<Objectives(const ArchitectureConfig&)>;

struct SearchOptions {
  int budget = 100;
  std::optional<double> constraint_gflops;
  std::uint64_t seed = 0;
  SamplerKind sampler = SamplerKind::kMotpe;
  MotpeOptions motpe;
  std::function<void(const Trial&)> on_trial;
};

struct Study {
  std::vector<Trial> trials;
  int budget = 0;
  std::optional<double> constraint_gflops;
  std::uint64_t seed = 0;
  std::optional<ParetoFront> front;
};

// Sequential propose -> evaluate -> record loop. Trial t is proposed from
// trials 0..t-1 and an RNG seeded by (seed, t) only.
Study run_search(const Evaluator& evaluator, const SearchOptions& options);

nlohmann::json trial_to_json(const Trial& trial);
Trial trial_from_json(const nlohmann::json& j);

}  // namespace patchnas
