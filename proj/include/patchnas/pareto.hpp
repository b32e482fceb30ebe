#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "patchnas/architecture.hpp"

namespace patchnas {

// One evaluated configuration. Performance is maximized, complexity
// (GFLOPS) minimized.
struct Trial {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  ArchitectureConfig config;
  double performance = std::numeric_limits<double>::quiet_NaN();
  double complexity_gflops = std::numeric_limits<double>::quiet_NaN();
  bool feasible = false;
  bool failed = false;
  double wall_ms = 0.0;
  std::string error;
};

struct ObjectivePoint {
  double performance = 0.0;
  double complexity = 0.0;
};

// a dominates b: no worse in both objectives, strictly better in one.
bool dominates(const ObjectivePoint& a, const ObjectivePoint& b);

// Nondominated feasible trials, sorted by complexity ascending (ties by
// performance descending, then trial index).
struct ParetoFront {
  std::vector<Trial> members;
};

// Throws std::invalid_argument when no trial is feasible.
ParetoFront pareto_front(std::span<const Trial> trials);

// Indices of the nondominated points, in input order.
std::vector<std::size_t> nondominated_indices(std::span<const ObjectivePoint> points);

// Front rank of every point (0 = nondominated).
std::vector<int> nondominated_ranks(std::span<const ObjectivePoint> points);

// Area dominated by the points relative to (ref_performance,
// ref_complexity), by sorting on complexity and sweeping. Throws
// std::invalid_argument if a point is not strictly inside the box.
double hypervolume_2d(std::span<const ObjectivePoint> points, double ref_performance,
                      double ref_complexity);
double hypervolume_2d(const ParetoFront& front, double ref_performance, double ref_complexity);

// Exclusive hypervolume of each point of a mutually nondominated set.
std::vector<double> hypervolume_contributions(std::span<const ObjectivePoint> points,
                                              double ref_performance, double ref_complexity);

// Hypervolume of the feasible front after each trial. Points outside the
// reference box are skipped since they add no area.
std::vector<double> running_hypervolume(std::span<const Trial> trials, double ref_performance,
                                        double ref_complexity);

inline ObjectivePoint objectives_of(const Trial& t) { return {t.performance, t.complexity_gflops}; }

}  // namespace patchnas
