// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "patchnas/commands.hpp"
#include "patchnas/datasets.hpp"
#include "patchnas/flops.hpp"
#include "patchnas/metrics.hpp"
#include "patchnas/pareto.hpp"
#include "patchnas/patch_engine.hpp"
#include "patchnas/search.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

using namespace patchnas;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

EvalItem row_item(std::vector<double> scores, const std::vector<std::uint8_t>& gt,
                  std::optional<std::string> type = "a") {
  const int w = static_cast<int>(scores.size());
  EvalItem it{ScoreMap(1, w), label_regions(gt, 1, w, type)};
  it.scores.scores = std::move(scores);
  return it;
}

// ---------------------------------------------------------------- metrics

void metric_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto eval = oracle::random_eval(rng, 32, 8, i % 3 == 0);
    const double diffs[] = {
        std::abs(average_precision(eval) - oracle::ap(eval)),
        std::abs(rwap(eval) - oracle::rwap(eval)),
        std::abs(auroc(eval, 1.0) - oracle::auroc(eval, 1.0)),
        std::abs(auroc(eval, 0.3) - oracle::auroc(eval, 0.3)),
        std::abs(aupro(eval, 1.0) - oracle::aupro(eval, 1.0)),
    };
    for (double d : diffs) worst = std::max(worst, std::isnan(d) ? 1.0 : d);
  }
  const double secs = seconds_since(t0);
  report("metric_oracle", worst <= 1e-9 && secs < 30.0,
         fmt("200 evals, max |diff| %.3g, %.2f s", worst, secs));
}

// Images whose regions all have the same area and whose types all have
// the same number of regions.
EvalSet uniform_region_eval(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n_types(1, 3), imgs_per_type(1, 3), regions_per_img(1, 2),
      side(1, 5), n_normal(0, 2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int types = n_types(rng), per_type = imgs_per_type(rng), r = regions_per_img(rng),
            a = side(rng);
  const bool quantize = rng() % 2;
  const int h = 16, w = 16;
  auto fill_scores = [&](EvalItem& it) {
    for (std::size_t p = 0; p < it.scores.scores.size(); ++p) {
      double s = u(rng) + (it.mask.is_anomalous(p) ? 0.3 * u(rng) : 0.0);
      if (quantize) s = std::floor(s * 6) / 6;
      it.scores.scores[p] = s;
    }
  };
  EvalSet eval;
  for (int t = 0; t < types; ++t) {
    for (int i = 0; i < per_type; ++i) {
      std::vector<std::uint8_t> gt(h * w, 0);
      const int origins[2][2] = {{1, 1}, {9, 9}};
      for (int k = 0; k < r; ++k) {
        for (int y = 0; y < a; ++y)
          for (int x = 0; x < a; ++x) gt[(origins[k][0] + y) * w + origins[k][1] + x] = 1;
      }
      EvalItem it{ScoreMap(h, w), label_regions(gt, h, w, "t" + std::to_string(t))};
      fill_scores(it);
      eval.push_back(std::move(it));
    }
  }
  for (int i = n_normal(rng); i > 0; --i) {
    std::vector<std::uint8_t> gt(h * w, 0);
    EvalItem it{ScoreMap(h, w), label_regions(gt, h, w)};
    fill_scores(it);
    eval.push_back(std::move(it));
  }
  return eval;
}

void rwap_reduction() {
  std::mt19937_64 rng(7);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto eval = uniform_region_eval(rng);
    worst = std::max(worst, std::abs(rwap(eval) - average_precision(eval)));
  }
  report("rwap_reduction", worst <= 1e-12, fmt("100 uniform-region evals, max |rwAP - AP| %.3g", worst));
}

void golden_values() {
  const EvalSet four{row_item({0.9, 0.8, 0.4, 0.2}, {1, 0, 1, 0})};
  const EvalSet six{row_item({0.9, 0.1}, {1, 0}), row_item({0.8, 0.3, 0.6, 0.5}, {1, 1, 1, 0})};
  struct Case {
    const char* name;
    double expected, oracle_value, library_value;
  };
  const Case cases[] = {
      {"AP(4px)", 5.0 / 6.0, oracle::ap(four), average_precision(four)},
      {"AUROC(4px)", 0.75, oracle::auroc(four, 1.0), auroc(four, 1.0)},
      {"AP(6px)", 0.95, oracle::ap(six), average_precision(six)},
      {"rwAP(6px)", 29.0 / 30.0, oracle::rwap(six), rwap(six)},
  };
  bool ok = true;
  std::string detail;
  for (const auto& c : cases) {
    const bool good = std::abs(c.oracle_value - c.expected) <= 1e-12 &&
                      std::abs(c.library_value - c.expected) <= 1e-12;
    ok = ok && good;
    detail += std::string(c.name) + "=" + fmt("%.6f", c.library_value) + (good ? "" : "(!)") + " ";
  }
  report("golden_values", ok, detail + "(oracle and library)");
}

// ------------------------------------------------------------ patch engine

void nn_exactness() {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> n_bank(1, 500), dim(1, 64), side(1, 12);
  std::normal_distribution<float> nd(0.0f, 1.0f);
  int mismatched = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int d = dim(rng), n = n_bank(rng);
    std::vector<float> rows(static_cast<std::size_t>(n) * d);
    for (auto& v : rows) v = nd(rng);
    PatchGrid q{d, side(rng), side(rng), {}};
    q.values.resize(q.cells() * d);
    for (auto& v : q.values) v = nd(rng);
    // Some queries coincide with bank rows.
    for (std::size_t c = 0; c < q.cells(); c += 3) {
      const std::size_t r = rng() % n;
      std::copy_n(rows.begin() + r * d, d, q.values.begin() + c * d);
    }
    if (nn_distances(q, make_bank(d, rows)).scores != oracle::naive_nn(q, rows, d).scores) ++mismatched;
  }

  double worst_self = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int c0 = 1 + static_cast<int>(rng() % 16), c1 = 1 + static_cast<int>(rng() % 24);
    const int h0 = 4 + static_cast<int>(rng() % 12);
    FeatureTensor f0(c0, h0, h0), f1(c1, (h0 + 1) / 2, (h0 + 1) / 2);
    for (auto& v : f0.values) v = nd(rng);
    for (auto& v : f1.values) v = nd(rng);
    const std::vector<FeatureTensor> feats{f0, f1};
    const std::vector<int> patches{1 + 2 * static_cast<int>(rng() % 3), 1 + 2 * static_cast<int>(rng() % 3)};
    const auto g = extract_patches(feats, patches);
    const auto bank = build_bank(std::span(&g, 1));
    const auto map = segment(feats, patches, bank, 4 * h0, 4 * h0);
    for (double v : map.scores) worst_self = std::max(worst_self, v);
  }
  report("nn_exactness", mismatched == 0 && worst_self <= 1e-9,
         fmt("%.0f/100 instances differ from naive loop, max self-score %.3g", mismatched, worst_self));
}

// ---------------------------------------------------------------- encoder

void flops_oracle() {
  std::mt19937_64 rng(41);
  int mismatched = 0;
  for (int i = 0; i < 100; ++i) {
    const auto c = random_config(rng);
    if (estimate_flops(validate(c), c).total_flops != oracle::flops(c, kDefaultInputResolution)) ++mismatched;
  }
  int pairs = 0, violations = 0;
  while (pairs < 1000) {
    const auto c = random_config(rng);
    const auto plan = validate(c);
    const int s = static_cast<int>(rng() % (plan.last_computed_stage + 1));
    auto up = c;
    switch (rng() % 3) {
      case 0:
        if (up.stages[s].kernel == 7) continue;
        up.stages[s].kernel += 2;
        break;
      case 1:
        if (up.stages[s].expansion == 6) continue;
        up.stages[s].expansion = up.stages[s].expansion == 3 ? 4 : 6;
        break;
      default:
        if (up.width == WidthChoice::kWide) continue;
        up.width = WidthChoice::kWide;
    }
    ++pairs;
    if (!(config_gflops(up) > config_gflops(c))) ++violations;
  }
  report("flops_oracle", mismatched == 0 && violations == 0,
         fmt("%.0f/100 oracle mismatches, %.0f/1000 monotonicity violations", mismatched, violations));
}

// ----------------------------------------------------------------- pareto

void pareto_hypervolume() {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int mismatched = 0;
  for (int set = 0; set < 100; ++set) {
    std::vector<Trial> trials;
    const int n = 1 + static_cast<int>(rng() % 300);
    for (int i = 0; i < n; ++i) {
      Trial t;
      t.index = i;
      t.performance = u(rng);
      t.complexity_gflops = u(rng);
      if (set % 2) {
        t.performance = std::round(t.performance * 8) / 8;
        t.complexity_gflops = std::round(t.complexity_gflops * 8) / 8;
      }
      t.feasible = u(rng) < 0.85;
      if (u(rng) < 0.05) t.failed = true, t.feasible = false;
      trials.push_back(t);
    }
    const auto want = oracle::pareto_indices(trials);
    if (want.empty()) {
      bool threw = false;
      try {
        pareto_front(trials);
      } catch (const std::invalid_argument&) {
        threw = true;
      }
      mismatched += !threw;
      continue;
    }
    std::vector<std::size_t> got;
    for (const auto& m : pareto_front(trials).members) got.push_back(m.index);
    std::sort(got.begin(), got.end());
    mismatched += got != want;
  }

  const std::vector<ObjectivePoint> golden{{0.8, 0.3}, {0.6, 0.2}};
  const double hv = hypervolume_2d(golden, 0.0, 1.0);

  int outside = 0;
  double worst_sigma = 0.0;
  std::uniform_real_distribution<double> inner(0.02, 0.98);
  for (int f = 0; f < 50; ++f) {
    std::vector<ObjectivePoint> pts;
    for (int k = 0; k < 1 + static_cast<int>(rng() % 15); ++k) pts.push_back({inner(rng), inner(rng)});
    std::vector<ObjectivePoint> front;
    for (auto i : nondominated_indices(pts)) front.push_back(pts[i]);
    const double exact = hypervolume_2d(front, 0.0, 1.0);
    const auto [est, se] = oracle::monte_carlo_hypervolume(front, 0.0, 1.0, 400000, rng);
    const double sigma = std::abs(exact - est) / std::max(se, 1e-300);
    worst_sigma = std::max(worst_sigma, sigma);
    outside += std::abs(exact - est) > 3.0 * se;
  }
  report("pareto_hypervolume", mismatched == 0 && std::abs(hv - 0.62) <= 1e-12 && outside == 0,
         fmt("%.0f/100 front mismatches, golden HV %.12f, %.0f/50 fronts beyond 3 sigma (worst %.2f)",
             mismatched, hv, outside, worst_sigma));
}

// --------------------------------------------------------------- optimizer

double final_hypervolume(const Study& s, const oracle::ToyProblem& toy) {
  const auto hv = running_hypervolume(s.trials, toy.ref_performance, toy.ref_complexity);
  return hv.empty() ? 0.0 : hv.back();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// One-sided P(X >= wins) for X ~ Binomial(n, 1/2).
double sign_test_p(int wins, int n) {
  double p = 0.0;
  for (int k = wins; k <= n; ++k) {
    double c = 1.0;
    for (int j = 1; j <= k; ++j) c = c * (n - k + j) / j;
    p += c;
  }
  return p / std::ldexp(1.0, n);
}

void optimizer_efficacy() {
  const auto t0 = Clock::now();
  const int kSeeds = 11;
  std::vector<double> motpe_hv, random_hv;
  int wins = 0;
  for (int s = 0; s < kSeeds; ++s) {
    const oracle::ToyProblem toy(1000 + s);
    const Evaluator eval = [&](const ArchitectureConfig& c) {
      return Objectives{toy.performance(c), toy.complexity(c)};
    };
    SearchOptions opts;
    opts.budget = 200;
    opts.seed = s;
    opts.sampler = SamplerKind::kMotpe;
    const double m = final_hypervolume(run_search(eval, opts), toy);
    opts.sampler = SamplerKind::kRandom;
    const double r = final_hypervolume(run_search(eval, opts), toy);
    motpe_hv.push_back(m);
    random_hv.push_back(r);
    wins += m > r;
  }
  const double p = sign_test_p(wins, kSeeds);
  const double secs = seconds_since(t0);
  const double mm = median(motpe_hv), rm = median(random_hv);
  report("optimizer_efficacy", p < 0.05 && mm >= rm && secs < 300.0,
         fmt("MOTPE wins %.0f/11, sign test p = %.4f, median HV %.4f vs %.4f", wins, p, mm, rm) +
             fmt(", %.1f s", secs));
}

// --------------------------------------------------------------- pipeline

std::vector<nlohmann::json> untimed_log(const fs::path& p) {
  std::ifstream in(p);
  std::vector<nlohmann::json> out;
  for (std::string l; std::getline(in, l);) {
    auto j = nlohmann::json::parse(l);
    j.erase("wall_ms");
    out.push_back(std::move(j));
  }
  return out;
}

void end_to_end(const fs::path& manifest, const fs::path& work) {
  RunConfig rc;
  rc.manifest = manifest;
  rc.k = 1;
  rc.seeds = {0, 1, 2};
  rc.budget = 100;
  rc.input_size = 64;
  rc.backend = BackendKind::kSynthetic;
  rc.out = work / "runs";

  const auto t0 = Clock::now();
  std::vector<SeedRun> runs;
  std::string error;
  try {
    runs = cmd_search(rc);
  } catch (const std::exception& e) {
    error = e.what();
  }
  const double secs = seconds_since(t0);
  if (!error.empty()) {
    report("end_to_end_search", false, "search threw: " + error);
    return;
  }

  bool complete = true, monotone = true;
  int failed_trials = 0;
  std::vector<double> complexities;
  for (const auto& r : runs) {
    std::ifstream in(r.dir / "trials.jsonl");
    int lines = 0;
    for (std::string l; std::getline(in, l);) ++lines;
    complete = complete && lines == 100 && fs::exists(r.dir / "front.json");
    double max_c = 0.0;
    for (const auto& t : r.study.trials) {
      failed_trials += t.failed;
      if (!t.failed) {
        complexities.push_back(t.complexity_gflops);
        max_c = std::max(max_c, t.complexity_gflops);
      }
    }
    const auto hv = running_hypervolume(r.study.trials, 0.0, 1.01 * max_c);
    for (std::size_t i = 1; i < hv.size(); ++i) monotone = monotone && hv[i] >= hv[i - 1];
  }

  // Constrained run at the median sampled complexity.
  const double constraint = median(complexities);
  RunConfig crc = rc;
  crc.seeds = {0};
  crc.constraint_gflops = constraint;
  crc.out = work / "constrained";
  bool constrained_ok = false;
  std::size_t front_size = 0;
  try {
    const auto c = cmd_search(crc);
    const auto front = nlohmann::json::parse(std::ifstream(c[0].dir / "front.json"));
    front_size = front.size();
    constrained_ok = !front.empty();
    for (const auto& m : front) constrained_ok = constrained_ok && m["complexity_gflops"].get<double>() <= constraint;
  } catch (const std::exception& e) {
    error = e.what();
  }

  // Same seed again.
  RunConfig again = rc;
  again.seeds = {0};
  again.out = work / "rerun";
  bool identical = false;
  try {
    const auto a = cmd_search(again);
    identical = untimed_log(a[0].dir / "trials.jsonl") == untimed_log(runs[0].dir / "trials.jsonl");
  } catch (const std::exception& e) {
    error = e.what();
  }

  const bool ok = complete && failed_trials == 0 && secs < 600.0 && monotone && constrained_ok &&
                  identical && error.empty();
  report("end_to_end_search", ok,
         fmt("3 seeds x 100 trials in %.1f s, %.0f failed, running HV ", secs, failed_trials) +
             (monotone ? "non-decreasing" : "DECREASED") +
             fmt(", constraint %.5f GFLOPS -> %.0f front members", constraint, static_cast<double>(front_size)) +
             (constrained_ok ? " all within" : " VIOLATED") + (identical ? ", seed-0 rerun identical" : ", seed-0 rerun DIFFERS") +
             (error.empty() ? "" : ", error: " + error));
}

void split_protocol(const fs::path& manifest_path) {
  const auto m = load_manifest(manifest_path);
  std::map<int, SplitSpec> splits;
  for (int k : {1, 2, 4}) splits[k] = make_splits(m, k);

  bool test_identical = true, nested = true, disjoint = true;
  const auto test1 = split_paths_json(m, splits[1].test).dump();
  // Validation anomalies per type, in split order.
  auto anomalies_by_type = [&](const SplitSpec& s) {
    std::map<std::string, std::vector<std::string>> out;
    for (auto i : s.validation) {
      if (m.items[i].anomalous()) out[*m.items[i].anomaly_type].push_back(m.items[i].image);
    }
    return out;
  };
  for (int k : {1, 2, 4}) {
    const auto& s = splits[k];
    test_identical = test_identical && split_paths_json(m, s.test).dump() == test1;
    std::vector<std::size_t> all;
    for (const auto* part : {&s.train, &s.validation, &s.test}) all.insert(all.end(), part->begin(), part->end());
    std::sort(all.begin(), all.end());
    disjoint = disjoint && std::adjacent_find(all.begin(), all.end()) == all.end();
    for (const auto& [type, items] : anomalies_by_type(s)) nested = nested && items.size() == static_cast<std::size_t>(k);
  }
  for (auto [small, large] : {std::pair{1, 2}, std::pair{2, 4}}) {
    const auto a = anomalies_by_type(splits[small]);
    const auto b = anomalies_by_type(splits[large]);
    for (const auto& [type, items] : a) {
      const auto it = b.find(type);
      nested = nested && it != b.end() && std::equal(items.begin(), items.end(), it->second.begin());
    }
  }
  report("split_protocol", test_identical && nested && disjoint,
         std::string("test split ") + (test_identical ? "byte-identical" : "DIFFERS") +
             " across k in {1,2,4}; validation anomalies " + (nested ? "nested prefixes" : "NOT nested") +
             "; splits " + (disjoint ? "disjoint" : "OVERLAP"));
}

// The published benchmark numbers need the pretrained supernet and the
// real dataset; what is checked here is the protocol the CLI runs.
void protocol_only(const fs::path& manifest_path) {
  const auto m = load_manifest(manifest_path);
  bool ok = true;
  for (int k : {1, 2, 4}) {
    int anomalies = 0;
    for (auto i : make_splits(m, k).validation) anomalies += m.items[i].anomalous();
    ok = ok && anomalies == 3 * k;
  }
  const oracle::ToyProblem toy(5);
  const Evaluator eval = [&](const ArchitectureConfig& c) {
    return Objectives{toy.performance(c), toy.complexity(c)};
  };
  SearchOptions opts;
  opts.budget = 60;
  opts.constraint_gflops = kMobileNetV3LargePatchCoreGflops;
  const auto a = run_search(eval, opts);
  ok = ok && a.front.has_value();
  if (a.front) {
    for (const auto& t : a.front->members) ok = ok && t.complexity_gflops <= 0.31;
  }
  opts.seed = 1;
  const auto b = run_search(eval, opts);
  ok = ok && !(a.trials[20].config == b.trials[20].config && a.trials[40].config == b.trials[40].config);
  std::printf("INFO published benchmark numbers are not reproduced here; they need the pretrained "
              "supernet and the real dataset\n");
  report("protocol_only", ok,
         "k-shot validation objective, 0.31 GFLOPS constraint mode and seed repetition verified; "
         "benchmark numbers not claimed");
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  testing_support::TempDir work("acceptance");
  SyntheticSpec spec;
  spec.seed = 2024;
  spec.image_size = 64;
  const auto manifest = generate_synthetic(spec, work.path() / "data").front().root / "manifest.json";

  auto guarded = [](const char* name, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(name, false, std::string("threw: ") + e.what());
    }
  };
  guarded("metric_oracle", metric_oracle);
  guarded("rwap_reduction", rwap_reduction);
  guarded("golden_values", golden_values);
  guarded("nn_exactness", nn_exactness);
  guarded("flops_oracle", flops_oracle);
  guarded("pareto_hypervolume", pareto_hypervolume);
  guarded("optimizer_efficacy", optimizer_efficacy);
  guarded("end_to_end_search", [&] { end_to_end(manifest, work.path()); });
  guarded("split_protocol", [&] { split_protocol(manifest); });
  guarded("protocol_only", [&] { protocol_only(manifest); });

  std::printf("%s: %d failing, %.1f s total\n", g_failures ? "FAILED" : "ALL PASSED", g_failures,
              seconds_since(t0));
  return g_failures ? 1 : 0;
}
