#include "patchnas/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>

#include "patchnas/error.hpp"
#include "patchnas/seeding.hpp"

namespace patchnas {

namespace {

double log_sum_exp(std::span<const double> xs) {
  const double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

bool is_patch_dim(int d) { return d > 0 && (d - 1) % 4 == 3; }
int stage_of(int d) { return (d - 1) / 4; }

bool has_extraction(const ParamVector& p) {
  for (int s = 0; s < kNumStages; ++s) {
    if (p[extract_param(s)] != 0) return true;
  }
  return false;
}

// Samples one configuration from the good-set mixture.
ParamVector sample_from_mixture(std::span<const ParamVector> centers, double prior_weight,
                                std::mt19937_64& rng) {
  const auto& card = param_cardinalities();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double total = prior_weight + static_cast<double>(centers.size());
  const double keep_center = 1.0 / (1.0 + prior_weight);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double u = unit(rng) * total;
    const ParamVector* center = nullptr;
    if (u >= prior_weight) {
      const auto idx = std::min(centers.size() - 1, static_cast<std::size_t>(u - prior_weight));
      center = &centers[idx];
    }
    ParamVector out{};
    for (int d = 0; d < kNumParams; ++d) {
      std::uniform_int_distribution<int> any(0, card[d] - 1);
      bool use_kernel = center != nullptr;
      if (use_kernel && is_patch_dim(d) && (*center)[extract_param(stage_of(d))] == 0) {
        use_kernel = false;
      }
      if (use_kernel && unit(rng) < keep_center) {
        out[d] = (*center)[d];
      } else {
        out[d] = any(rng);
      }
    }
    if (has_extraction(out)) return out;
  }
  return encode_params(decode_params(ParamVector{}));  // unreachable in practice
}

}  // namespace

int startup_trials(const MotpeOptions& options, int budget) {
  const int frac = static_cast<int>(std::ceil(options.startup_fraction * budget));
  return std::max(options.min_startup_trials, frac);
}

double log_parzen_density(const ParamVector& params, std::span<const ParamVector> centers,
                          double prior_weight) {
  const auto& card = param_cardinalities();
  std::vector<double> terms;
  terms.reserve(centers.size() + 1);

  double log_uniform = 0.0;
  for (int d = 0; d < kNumParams; ++d) {
    if (param_active(params, d)) log_uniform -= std::log(static_cast<double>(card[d]));
  }
  terms.push_back(std::log(prior_weight) + log_uniform);

  for (const auto& c : centers) {
    double lk = 0.0;
    for (int d = 0; d < kNumParams; ++d) {
      if (!param_active(params, d)) continue;
      const double n = card[d];
      if (is_patch_dim(d) && c[extract_param(stage_of(d))] == 0) {
        lk -= std::log(n);
        continue;
      }
      const double hit = params[d] == c[d] ? 1.0 : 0.0;
      lk += std::log((hit + prior_weight / n) / (1.0 + prior_weight));
    }
    terms.push_back(lk);
  }
  return log_sum_exp(terms) - std::log(prior_weight + static_cast<double>(centers.size()));
}

std::vector<std::size_t> select_good_trials(std::span<const Trial> history, double gamma) {
  std::size_t usable = 0;
  std::vector<std::size_t> feasible;
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (history[i].failed) continue;
    ++usable;
    if (history[i].feasible) feasible.push_back(i);
  }
  const auto n_good = std::min(feasible.size(), static_cast<std::size_t>(
                                                    std::ceil(gamma * static_cast<double>(usable))));
  if (n_good == 0) return {};

  std::vector<ObjectivePoint> points;
  points.reserve(feasible.size());
  double min_p = std::numeric_limits<double>::infinity();
  double max_p = -min_p;
  double min_c = min_p;
  double max_c = -min_p;
  for (auto i : feasible) {
    const auto p = objectives_of(history[i]);
    points.push_back(p);
    min_p = std::min(min_p, p.performance);
    max_p = std::max(max_p, p.performance);
    min_c = std::min(min_c, p.complexity);
    max_c = std::max(max_c, p.complexity);
  }
  const double ref_p = min_p - std::max(1e-9, 0.1 * (max_p - min_p));
  const double ref_c = max_c + std::max(1e-9, 0.1 * (max_c - min_c));

  const auto ranks = nondominated_ranks(points);
  std::map<int, std::vector<std::size_t>> by_rank;  // rank -> positions in `feasible`
  for (std::size_t j = 0; j < ranks.size(); ++j) by_rank[ranks[j]].push_back(j);

  std::vector<std::size_t> good;
  for (auto& [rank, members] : by_rank) {
    const std::size_t room = n_good - good.size();
    if (room == 0) break;
    while (members.size() > room) {
      std::vector<ObjectivePoint> sub;
      for (auto j : members) sub.push_back(points[j]);
      const auto contrib = hypervolume_contributions(sub, ref_p, ref_c);
      std::size_t drop = 0;
      for (std::size_t k = 1; k < contrib.size(); ++k) {
        if (contrib[k] <= contrib[drop]) drop = k;
      }
      members.erase(members.begin() + static_cast<std::ptrdiff_t>(drop));
    }
    for (auto j : members) good.push_back(feasible[j]);
  }
  std::sort(good.begin(), good.end());
  return good;
}

ArchitectureConfig suggest_motpe(std::span<const Trial> history, int n_startup,
                                 const MotpeOptions& options, std::mt19937_64& rng) {
  std::size_t usable = 0;
  for (const auto& t : history) usable += t.failed ? 0 : 1;
  if (usable < static_cast<std::size_t>(n_startup)) return random_config(rng);

  const auto good_idx = select_good_trials(history, options.gamma);
  if (good_idx.empty()) return random_config(rng);

  std::vector<ParamVector> good;
  std::vector<ParamVector> bad;
  std::size_t g = 0;
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (history[i].failed) continue;
    const ParamVector p = encode_params(canonical(history[i].config));
    if (g < good_idx.size() && good_idx[g] == i) {
      good.push_back(p);
      ++g;
    } else {
      bad.push_back(p);
    }
  }

  ParamVector best{};
  double best_score = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < options.n_candidates; ++c) {
    const ParamVector cand = sample_from_mixture(good, options.prior_weight, rng);
    const double score = log_parzen_density(cand, good, options.prior_weight) -
                         log_parzen_density(cand, bad, options.prior_weight);
    if (score > best_score) {
      best_score = score;
      best = cand;
    }
  }
  return decode_params(best);
}

Study run_search(const Evaluator& evaluator, const SearchOptions& options) {
  if (options.budget < 1) throw ConfigError("search budget must be >= 1");
  Study study;
  study.budget = options.budget;
  study.constraint_gflops = options.constraint_gflops;
  study.seed = options.seed;
  study.trials.reserve(options.budget);
  const int n_startup = startup_trials(options.motpe, options.budget);

  for (int t = 0; t < options.budget; ++t) {
    std::mt19937_64 rng(mix_seed(options.seed, static_cast<std::uint64_t>(t)));
    Trial trial;
    trial.index = static_cast<std::size_t>(t);
    trial.seed = options.seed;
    trial.config = options.sampler == SamplerKind::kMotpe
                       ? suggest_motpe(study.trials, n_startup, options.motpe, rng)
                       : random_config(rng);

    const auto start = std::chrono::steady_clock::now();
    try {
      const Objectives obj = evaluator(trial.config);
      if (!std::isfinite(obj.performance) || !std::isfinite(obj.complexity_gflops)) {
        throw std::runtime_error("evaluator returned non-finite objectives");
      }
      trial.performance = obj.performance;
      trial.complexity_gflops = obj.complexity_gflops;
      trial.feasible = !options.constraint_gflops || obj.complexity_gflops <= *options.constraint_gflops;
    } catch (const std::exception& e) {
      trial.failed = true;
      trial.feasible = false;
      trial.error = e.what();
      trial.performance = std::numeric_limits<double>::quiet_NaN();
      trial.complexity_gflops = std::numeric_limits<double>::quiet_NaN();
    }
    trial.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    study.trials.push_back(std::move(trial));
    if (options.on_trial) options.on_trial(study.trials.back());
  }

  const bool any_feasible = std::any_of(study.trials.begin(), study.trials.end(),
                                        [](const Trial& t) { return t.feasible && !t.failed; });
  if (any_feasible) study.front = pareto_front(study.trials);
  return study;
}

nlohmann::json trial_to_json(const Trial& trial) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json j = {
      {"index", trial.index},
      {"seed", trial.seed},
      {"config", config_to_json(trial.config)},
      {"performance", num(trial.performance)},
      {"complexity_gflops", num(trial.complexity_gflops)},
      {"feasible", trial.feasible},
      {"failed", trial.failed},
      {"wall_ms", trial.wall_ms},
  };
  if (!trial.error.empty()) j["error"] = trial.error;
  return j;
}

Trial trial_from_json(const nlohmann::json& j) {
  Trial t;
  try {
    t.index = j.at("index").get<std::size_t>();
    t.seed = j.at("seed").get<std::uint64_t>();
    t.config = config_from_json(j.at("config"));
    const auto& perf = j.at("performance");
    const auto& cplx = j.at("complexity_gflops");
    t.performance = perf.is_null() ? std::numeric_limits<double>::quiet_NaN() : perf.get<double>();
    t.complexity_gflops = cplx.is_null() ? std::numeric_limits<double>::quiet_NaN() : cplx.get<double>();
    t.feasible = j.at("feasible").get<bool>();
    t.failed = j.value("failed", false);
    t.wall_ms = j.value("wall_ms", 0.0);
    t.error = j.value("error", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed trial record: ") + e.what());
  }
  return t;
}

}  // namespace patchnas
