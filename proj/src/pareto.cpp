#include "patchnas/pareto.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace patchnas {

bool dominates(const ObjectivePoint& a, const ObjectivePoint& b) {
  return a.performance >= b.performance && a.complexity <= b.complexity &&
         (a.performance > b.performance || a.complexity < b.complexity);
}

std::vector<std::size_t> nondominated_indices(std::span<const ObjectivePoint> points) {
  // Sort by complexity ascending, performance descending; a point is
  // dominated iff an earlier point (with different objectives) has
  // performance >= its own.
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].complexity != points[b].complexity) return points[a].complexity < points[b].complexity;
    return points[a].performance > points[b].performance;
  });
  std::vector<std::size_t> keep;
  bool have_best = false;
  ObjectivePoint best{};
  for (std::size_t i : order) {
    const ObjectivePoint& p = points[i];
    if (have_best && dominates(best, p)) continue;
    keep.push_back(i);
    if (!have_best || p.performance > best.performance) {
      best = p;
      have_best = true;
    }
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

std::vector<int> nondominated_ranks(std::span<const ObjectivePoint> points) {
  std::vector<int> rank(points.size(), -1);
  std::vector<std::size_t> remaining(points.size());
  std::iota(remaining.begin(), remaining.end(), 0);
  for (int r = 0; !remaining.empty(); ++r) {
    std::vector<ObjectivePoint> sub;
    sub.reserve(remaining.size());
    for (auto i : remaining) sub.push_back(points[i]);
    const auto front = nondominated_indices(sub);
    std::vector<bool> on_front(remaining.size(), false);
    for (auto j : front) on_front[j] = true;
    std::vector<std::size_t> next;
    for (std::size_t j = 0; j < remaining.size(); ++j) {
      if (on_front[j]) {
        rank[remaining[j]] = r;
      } else {
        next.push_back(remaining[j]);
      }
    }
    remaining = std::move(next);
  }
  return rank;
}

ParetoFront pareto_front(std::span<const Trial> trials) {
  std::vector<std::size_t> feasible;
  std::vector<ObjectivePoint> points;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (trials[i].feasible && !trials[i].failed) {
      feasible.push_back(i);
      points.push_back(objectives_of(trials[i]));
    }
  }
  if (feasible.empty()) throw std::invalid_argument("pareto_front: no feasible trials");
  ParetoFront front;
  for (auto j : nondominated_indices(points)) front.members.push_back(trials[feasible[j]]);
  std::sort(front.members.begin(), front.members.end(), [](const Trial& a, const Trial& b) {
    if (a.complexity_gflops != b.complexity_gflops) return a.complexity_gflops < b.complexity_gflops;
    if (a.performance != b.performance) return a.performance > b.performance;
    return a.index < b.index;
  });
  return front;
}

double hypervolume_2d(std::span<const ObjectivePoint> points, double ref_performance,
                      double ref_complexity) {
  std::vector<ObjectivePoint> sorted(points.begin(), points.end());
  for (const auto& p : sorted) {
    if (!(p.performance > ref_performance && p.complexity < ref_complexity)) {
      throw std::invalid_argument("hypervolume_2d: point outside the reference box");
    }
  }
  std::sort(sorted.begin(), sorted.end(), [](const ObjectivePoint& a, const ObjectivePoint& b) {
    if (a.complexity != b.complexity) return a.complexity < b.complexity;
    return a.performance > b.performance;
  });
  double area = 0.0;
  double covered = ref_performance;
  for (const auto& p : sorted) {
    if (p.performance > covered) {
      area += (ref_complexity - p.complexity) * (p.performance - covered);
      covered = p.performance;
    }
  }
  return area;
}

double hypervolume_2d(const ParetoFront& front, double ref_performance, double ref_complexity) {
  std::vector<ObjectivePoint> points;
  points.reserve(front.members.size());
  for (const auto& t : front.members) points.push_back(objectives_of(t));
  return hypervolume_2d(points, ref_performance, ref_complexity);
}

std::vector<double> hypervolume_contributions(std::span<const ObjectivePoint> points,
                                              double ref_performance, double ref_complexity) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].complexity != points[b].complexity) return points[a].complexity < points[b].complexity;
    return points[a].performance < points[b].performance;
  });
  std::vector<double> contrib(points.size(), 0.0);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const ObjectivePoint& p = points[order[k]];
    const double right = k + 1 < order.size() ? points[order[k + 1]].complexity : ref_complexity;
    const double below = k > 0 ? points[order[k - 1]].performance : ref_performance;
    contrib[order[k]] = std::max(0.0, right - p.complexity) * std::max(0.0, p.performance - below);
  }
  return contrib;
}

std::vector<double> running_hypervolume(std::span<const Trial> trials, double ref_performance,
                                        double ref_complexity) {
  std::vector<double> out;
  out.reserve(trials.size());
  std::vector<ObjectivePoint> inside;
  for (const auto& t : trials) {
    if (t.feasible && !t.failed && t.performance > ref_performance &&
        t.complexity_gflops < ref_complexity) {
      inside.push_back(objectives_of(t));
    }
    out.push_back(inside.empty() ? 0.0 : hypervolume_2d(inside, ref_performance, ref_complexity));
  }
  return out;
}

}  // namespace patchnas
