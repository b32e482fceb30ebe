#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "patchnas/flops.hpp"
#include "patchnas/pareto.hpp"
#include "patchnas/search.hpp"
#include "support/oracles.hpp"

using namespace patchnas;

namespace {

Trial make_trial(std::size_t index, double perf, double cplx, bool feasible = true) {
  Trial t;
  t.index = index;
  t.performance = perf;
  t.complexity_gflops = cplx;
  t.feasible = feasible;
  return t;
}

std::vector<Trial> random_trials(std::mt19937_64& rng, std::size_t n, bool quantize) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Trial> out;
  for (std::size_t i = 0; i < n; ++i) {
    double p = u(rng), c = u(rng);
    if (quantize) {
      p = std::round(p * 10) / 10;
      c = std::round(c * 10) / 10;
    }
    auto t = make_trial(i, p, c, u(rng) < 0.8);
    if (u(rng) < 0.05) {
      t.failed = true;
      t.feasible = false;
    }
    out.push_back(t);
  }
  return out;
}

}  // namespace

TEST(ParetoFront, HandExample) {
  const std::vector<Trial> trials{make_trial(0, 0.8, 0.3), make_trial(1, 0.6, 0.2), make_trial(2, 0.7, 0.4)};
  const auto front = pareto_front(trials);
  ASSERT_EQ(front.members.size(), 2u);
  EXPECT_EQ(front.members[0].index, 1u);
  EXPECT_EQ(front.members[1].index, 0u);
}

TEST(ParetoFront, SingleAndDuplicates) {
  EXPECT_EQ(pareto_front(std::vector<Trial>{make_trial(0, 0.5, 0.5)}).members.size(), 1u);
  const std::vector<Trial> dup{make_trial(0, 0.5, 0.5), make_trial(1, 0.5, 0.5)};
  EXPECT_EQ(pareto_front(dup).members.size(), 2u);
}

TEST(ParetoFront, NoFeasibleIsError) {
  const std::vector<Trial> trials{make_trial(0, 0.5, 0.5, false)};
  EXPECT_THROW(pareto_front(trials), std::invalid_argument);
}

TEST(ParetoFront, MatchesQuadraticFilter) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 60; ++i) {
    const auto trials = random_trials(rng, 1 + rng() % 300, i % 2 == 0);
    if (oracle::pareto_indices(trials).empty()) continue;
    const auto front = pareto_front(trials);
    std::vector<std::size_t> got;
    for (const auto& m : front.members) got.push_back(m.index);
    std::sort(got.begin(), got.end());
    ASSERT_EQ(got, oracle::pareto_indices(trials));
    for (std::size_t k = 1; k < front.members.size(); ++k) {
      ASSERT_LE(front.members[k - 1].complexity_gflops, front.members[k].complexity_gflops);
    }
  }
}

TEST(Hypervolume, GoldenTwoPoint) {
  const std::vector<ObjectivePoint> pts{{0.8, 0.3}, {0.6, 0.2}};
  EXPECT_NEAR(hypervolume_2d(pts, 0.0, 1.0), 0.62, 1e-12);
}

TEST(Hypervolume, SinglePointAndDominatedPoint) {
  const std::vector<ObjectivePoint> one{{0.7, 0.25}};
  EXPECT_NEAR(hypervolume_2d(one, 0.0, 1.0), 0.7 * 0.75, 1e-15);
  const std::vector<ObjectivePoint> more{{0.7, 0.25}, {0.5, 0.5}};
  EXPECT_EQ(hypervolume_2d(more, 0.0, 1.0), hypervolume_2d(one, 0.0, 1.0));
}

TEST(Hypervolume, OutsideBoxIsError) {
  const std::vector<ObjectivePoint> pts{{0.7, 1.2}};
  EXPECT_THROW(hypervolume_2d(pts, 0.0, 1.0), std::invalid_argument);
}

TEST(Hypervolume, AgreesWithMonteCarlo) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 20; ++i) {
    std::vector<ObjectivePoint> pts;
    std::uniform_real_distribution<double> u(0.01, 0.99);
    for (int k = 0; k < 1 + static_cast<int>(rng() % 12); ++k) pts.push_back({u(rng), u(rng)});
    const double exact = hypervolume_2d(pts, 0.0, 1.0);
    const auto [est, se] = oracle::monte_carlo_hypervolume(pts, 0.0, 1.0, 200000, rng);
    EXPECT_LE(std::abs(exact - est), 3.0 * se + 1e-12);
  }
}

TEST(Hypervolume, ContributionsSumToExclusiveAreas) {
  const std::vector<ObjectivePoint> pts{{0.6, 0.2}, {0.8, 0.3}};
  const auto c = hypervolume_contributions(pts, 0.0, 1.0);
  EXPECT_NEAR(c[0], 0.1 * 0.6, 1e-12);
  EXPECT_NEAR(c[1], 0.7 * 0.2, 1e-12);
}

TEST(Hypervolume, RunningFrontNonDecreasing) {
  std::mt19937_64 rng(3);
  const auto trials = random_trials(rng, 200, false);
  const auto hv = running_hypervolume(trials, 0.0, 1.0);
  for (std::size_t i = 1; i < hv.size(); ++i) EXPECT_GE(hv[i], hv[i - 1]);
}

TEST(Motpe, StartupTrials) {
  MotpeOptions o;
  EXPECT_EQ(startup_trials(o, 100), 10);
  EXPECT_EQ(startup_trials(o, 2000), 100);
  EXPECT_EQ(startup_trials(o, 201), 11);
}

TEST(Motpe, EmptyHistoryIsRandomConfig) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    std::mt19937_64 a(s), b(s);
    EXPECT_EQ(suggest_motpe({}, 10, MotpeOptions{}, a), random_config(b));
  }
}

TEST(Motpe, DensityMatchesClosedForm) {
  // One center, evaluated at the center itself: the mixture is
  // (w * U + K) / (w + 1) with U the uniform mass and K the product of
  // per-dimension kernel hits (1 + w/n) / (1 + w).
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const ParamVector c = encode_params(canonical(random_config(rng)));
    const double w = trial % 2 ? 1.0 : 0.5;
    double u = 1.0, k = 1.0;
    for (int d = 0; d < kNumParams; ++d) {
      const bool is_patch = d > 0 && d % 4 == 0;
      if (is_patch && c[d - 1] == 0) continue;
      const double n = param_cardinalities()[d];
      u /= n;
      k *= (1.0 + w / n) / (1.0 + w);
    }
    const std::vector<ParamVector> centers{c};
    EXPECT_NEAR(log_parzen_density(c, centers, w), std::log((w * u + k) / (w + 1.0)), 1e-12);
    EXPECT_NEAR(log_parzen_density(c, {}, w), std::log(u), 1e-12);
  }
}

TEST(Motpe, DensitySumsToOneOverOneDimension) {
  // Varying a single always-active dimension while holding the rest fixed
  // must spread the mass as sum_v K(v) = 1 per kernel.
  std::mt19937_64 rng(9);
  std::vector<ParamVector> centers;
  for (int i = 0; i < 4; ++i) centers.push_back(encode_params(canonical(random_config(rng))));
  ParamVector x = centers[1];
  const int dim = kernel_param(2);
  double total = 0.0;
  for (int v = 0; v < param_cardinalities()[dim]; ++v) {
    x[dim] = v;
    total += std::exp(log_parzen_density(x, centers, 1.0));
  }
  // Same sum with the dimension's cardinality folded out by hand: every
  // component's factor for `dim` sums to one, so the total equals the
  // density of x under components restricted to the other dimensions.
  double restricted = 0.0;
  {
    double u = 1.0;
    for (int d = 0; d < kNumParams; ++d) {
      if (d == dim || !param_active(x, d)) continue;
      u /= param_cardinalities()[d];
    }
    restricted += 1.0 * u;
    for (const auto& c : centers) {
      double k = 1.0;
      for (int d = 0; d < kNumParams; ++d) {
        if (d == dim || !param_active(x, d)) continue;
        const double n = param_cardinalities()[d];
        const bool is_patch = d > 0 && d % 4 == 0;
        if (is_patch && c[d - 1] == 0) {
          k /= n;
          continue;
        }
        k *= ((x[d] == c[d] ? 1.0 : 0.0) + 1.0 / n) / 2.0;
      }
      restricted += k;
    }
    restricted /= 1.0 + static_cast<double>(centers.size());
  }
  EXPECT_NEAR(total, restricted, 1e-12 * restricted);
}

TEST(Motpe, GoodSetUsesNondominatedRanks) {
  std::vector<Trial> history;
  std::mt19937_64 rng(5);
  for (std::size_t i = 0; i < 30; ++i) {
    auto t = make_trial(i, 0.1, 1.0 + i);
    t.config = random_config(rng);
    history.push_back(t);
  }
  history[7].performance = 0.9;
  history[7].complexity_gflops = 0.5;  // dominates everyone
  history[12].performance = 0.95;
  history[12].complexity_gflops = 0.7;  // nondominated too
  history[12].feasible = false;         // but infeasible
  const auto good = select_good_trials(history, 0.1);  // ceil(3)
  ASSERT_EQ(good.size(), 3u);
  EXPECT_EQ(good[0], 0u);  // rank-1 member after 7: trial 0 (complexity 1.0)
  EXPECT_TRUE(std::find(good.begin(), good.end(), 7u) != good.end());
  EXPECT_TRUE(std::find(good.begin(), good.end(), 12u) == good.end());
}

TEST(Motpe, FavoursKernelSeenInGoodTrials) {
  // Good trials all use kernel 7 in stage 0; bad trials never do.
  std::vector<Trial> history;
  std::mt19937_64 rng(6);
  for (std::size_t i = 0; i < 40; ++i) {
    auto c = random_config(rng);
    const bool good = i % 10 == 0;
    c.stages[0].kernel = good ? 7 : (i % 2 ? 3 : 5);
    auto t = make_trial(i, good ? 0.9 : 0.2, good ? 0.1 : 1.0);
    t.config = c;
    history.push_back(t);
  }
  int hits = 0;
  for (int s = 0; s < 1000; ++s) {
    std::mt19937_64 r(1000 + s);
    hits += suggest_motpe(history, 10, MotpeOptions{}, r).stages[0].kernel == 7;
  }
  EXPECT_GT(hits, 1000 / 3 + 100);
}

TEST(Motpe, SameHistoryAndSeedSameProposal) {
  std::vector<Trial> history;
  std::mt19937_64 rng(7);
  for (std::size_t i = 0; i < 25; ++i) {
    auto t = make_trial(i, std::uniform_real_distribution<double>(0, 1)(rng), 1.0 + i % 7);
    t.config = random_config(rng);
    history.push_back(t);
  }
  std::mt19937_64 a(3), b(3);
  EXPECT_EQ(suggest_motpe(history, 10, MotpeOptions{}, a), suggest_motpe(history, 10, MotpeOptions{}, b));
}

TEST(RunSearch, BudgetDeterminismAndConstraint) {
  const oracle::ToyProblem toy(1);
  const Evaluator eval = [&](const ArchitectureConfig& c) {
    return Objectives{toy.performance(c), toy.complexity(c)};
  };
  SearchOptions opts;
  opts.budget = 50;
  opts.seed = 0;
  const auto a = run_search(eval, opts);
  const auto b = run_search(eval, opts);
  ASSERT_EQ(a.trials.size(), 50u);
  ASSERT_TRUE(a.front.has_value());
  EXPECT_FALSE(a.front->members.empty());
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_EQ(a.trials[i].index, i);
    EXPECT_EQ(a.trials[i].config, b.trials[i].config);
    EXPECT_EQ(a.trials[i].performance, b.trials[i].performance);
  }

  opts.constraint_gflops = kMobileNetV3LargePatchCoreGflops;
  const auto c = run_search(eval, opts);
  ASSERT_TRUE(c.front.has_value());
  for (const auto& m : c.front->members) EXPECT_LE(m.complexity_gflops, 0.31);
  for (const auto& t : c.trials) EXPECT_EQ(t.feasible, t.complexity_gflops <= 0.31);
}

TEST(RunSearch, PrefixDependsOnlyOnEarlierTrials) {
  const oracle::ToyProblem toy(2);
  const Evaluator eval = [&](const ArchitectureConfig& c) {
    return Objectives{toy.performance(c), toy.complexity(c)};
  };
  SearchOptions opts;
  opts.budget = 30;
  const auto shorter = run_search(eval, opts);
  opts.budget = 45;
  const auto longer = run_search(eval, opts);
  for (std::size_t i = 0; i < 30; ++i) EXPECT_EQ(shorter.trials[i].config, longer.trials[i].config);
}

TEST(RunSearch, FailuresAreRecordedAndExcluded) {
  int calls = 0;
  const Evaluator eval = [&](const ArchitectureConfig& c) -> Objectives {
    if (++calls % 3 == 0) throw std::runtime_error("boom");
    if (calls % 5 == 0) return {std::nan(""), 1.0};
    return {0.5, config_gflops(c)};
  };
  SearchOptions opts;
  opts.budget = 30;
  const auto s = run_search(eval, opts);
  ASSERT_EQ(s.trials.size(), 30u);
  int failed = 0;
  for (const auto& t : s.trials) {
    if (t.failed) {
      ++failed;
      EXPECT_FALSE(t.feasible);
      EXPECT_FALSE(t.error.empty());
    }
  }
  EXPECT_EQ(failed, 10 + 4);  // multiples of 3, plus 5, 10, 20, 25
  for (const auto& m : s.front->members) EXPECT_FALSE(m.failed);
}

TEST(TrialJson, RoundTrip) {
  std::mt19937_64 rng(8);
  Trial t = make_trial(3, 0.25, 0.5);
  t.seed = 9;
  t.config = random_config(rng);
  t.wall_ms = 12.5;
  const Trial back = trial_from_json(trial_to_json(t));
  EXPECT_EQ(back.config, t.config);
  EXPECT_EQ(back.performance, t.performance);
  EXPECT_EQ(back.seed, 9u);
  Trial f = t;
  f.failed = true;
  f.feasible = false;
  f.performance = std::nan("");
  f.error = "x";
  const Trial fb = trial_from_json(trial_to_json(f));
  EXPECT_TRUE(fb.failed);
  EXPECT_TRUE(std::isnan(fb.performance));
}
