// Acceptance harness: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "vtree/commands.hpp"
#include "vtree/eval.hpp"
#include "vtree/rng.hpp"

using namespace vtree;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

template <class... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Eigen::MatrixXd gaussian_rows(Rng& rng, int n, int dim, double shift, double scale) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(n, dim);
  for (int i = 0; i < n; ++i)
    for (int d = 0; d < dim; ++d) m(i, d) = shift + scale * g(rng);
  return m;
}

std::vector<CategoryStats> random_stats(Rng& rng, int n, int dim) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.05, 3.0);
  std::vector<CategoryStats> out(static_cast<std::size_t>(n));
  for (auto& s : out) {
    s.mean = Vec(dim);
    for (int d = 0; d < dim; ++d) s.mean[d] = 2.0 * g(rng);
    s.variance_sq = u(rng);
    s.count = 20;
  }
  return out;
}

FeatureDataset planted(int n_categories, int per_class, int dim, int branching, double noise, double decay,
                       std::uint64_t seed) {
  SynthConfig c;
  c.n_categories = n_categories;
  c.samples_per_category = per_class;
  c.dim = dim;
  c.hierarchy_branching = branching;
  c.noise_scale = noise;
  c.level_decay = decay;
  c.seed = seed;
  return generate_synthetic(c);
}

void criterion_1() {
  Rng rng(101);
  const int dims[] = {2, 16, 128};
  std::uniform_int_distribution<int> size(5, 200);
  std::uniform_real_distribution<double> shift(-2.0, 2.0), scale(0.1, 3.0);
  auto t0 = Clock::now();
  double worst = 0;
  int pairs = 0;
  for (int dim : dims)
    for (int p = 0; p < 70; ++p, ++pairs) {
      auto a = gaussian_rows(rng, size(rng), dim, shift(rng), scale(rng));
      auto b = gaussian_rows(rng, size(rng), dim, shift(rng), scale(rng));
      double naive = distance_naive(a, b);
      double fast = distance_fast(stats_of_rows(a), stats_of_rows(b));
      worst = std::max(worst, std::abs(fast - naive) / naive);
    }
  double secs = seconds_since(t0);
  report(1, worst <= 1e-9 && secs <= 5.0, fmt("%d pairs, max rel err %.2e, %.2fs", pairs, worst, secs));
}

void criterion_2() {
  Rng rng(102);
  std::vector<double> ratio;
  volatile double sink = 0;
  for (int trial = 0; trial < 20; ++trial) {
    auto a = gaussian_rows(rng, 1000, 64, 0.0, 1.0);
    auto b = gaussian_rows(rng, 1000, 64, 0.5, 1.2);
    auto sa = stats_of_rows(a), sb = stats_of_rows(b);
    auto t0 = Clock::now();
    sink = sink + distance_naive(a, b);
    double naive = seconds_since(t0);
    const int reps = 1000;
    auto t1 = Clock::now();
    for (int r = 0; r < reps; ++r) sink = sink + distance_fast(sa, sb);
    double fast = seconds_since(t1) / reps;
    ratio.push_back(naive / fast);
  }
  std::sort(ratio.begin(), ratio.end());
  double median = 0.5 * (ratio[9] + ratio[10]);
  report(2, median >= 20.0, fmt("median speedup %.0fx over 20 trials", median));
}

void criterion_3() {
  Rng rng(103);
  bool ok = true;
  std::string why;
  for (int set = 0; set < 50 && ok; ++set) {
    int n = 3 + static_cast<int>(rng() % 40);
    auto stats = random_stats(rng, n, 1 + static_cast<int>(rng() % 16));
    auto a = build_affinity(stats).values;
    for (int i = 0; i < n && ok; ++i) {
      if (a(i, i) != 1.0) ok = false, why = "diagonal";
      for (int j = 0; j < n && ok; ++j) {
        if (a(i, j) != a(j, i)) ok = false, why = "asymmetric";
        if (i != j && !(a(i, j) > 0.0 && a(i, j) <= 1.0)) ok = false, why = "off-diagonal range";
      }
    }
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<CategoryStats> shuffled;
    for (int p : perm) shuffled.push_back(stats[static_cast<std::size_t>(p)]);
    auto b = build_affinity(shuffled).values;
    for (int i = 0; i < n && ok; ++i)
      for (int j = 0; j < n && ok; ++j)
        if (std::abs(b(i, j) - a(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)])) > 1e-12)
          ok = false, why = "not permutation-equivariant";
  }
  report(3, ok, ok ? "50 random stat sets" : why);
}

void criterion_4() {
  Rng rng(104);
  const int Ks[] = {2, 4, 6, 10, 32};
  std::uniform_int_distribution<int> count(3, 200);
  auto t0 = Clock::now();
  std::size_t violations = 0, leaf_mismatch = 0;
  for (int trial = 0; trial < 100; ++trial) {
    int K = Ks[trial % 5];
    int L = 2 + static_cast<int>(rng() % 3);
    int n = count(rng);
    auto stats = random_stats(rng, n, 8);
    auto tree = build_tree(build_affinity(stats), K, L, rng(), stats);
    violations += validate_tree(tree).size();
    leaf_mismatch += tree.leaf_count() != static_cast<std::size_t>(n);
  }
  double secs = seconds_since(t0);
  report(4, violations == 0 && leaf_mismatch == 0 && secs <= 60.0,
         fmt("100 builds, %zu violations, %zu leaf-count mismatches, %.1fs", violations, leaf_mismatch, secs));
}

/// Criteria 5 to 8 share a suite of 30 small trained models and 100 queries each.
void criteria_5_to_8() {
  struct Shape {
    int n, K, L;
  };
  const Shape shapes[] = {{8, 2, 3}, {12, 3, 3}, {16, 4, 2}, {20, 3, 3}, {27, 3, 3},
                          {30, 4, 3}, {40, 7, 2}, {48, 4, 3}, {64, 8, 2}, {64, 4, 3}};
  std::size_t exact_fail = 0, greedy_fail = 0, mono_fail = 0, budget_fail = 0, flat_fail = 0, queries = 0;
  double worst_rel = 0;
  for (int m = 0; m < 30; ++m) {
    const auto& s = shapes[m % 10];
    const std::uint64_t seed = 500 + static_cast<std::uint64_t>(m);
    auto ds = planted(s.n, 20, 12, 3, 1.0, 0.8, seed);
    PipelineConfig pc;
    pc.branching = s.K;
    pc.depth = s.L;
    pc.seed = seed;
    pc.train.epochs = 10;
    auto model = train_model(ds, pc);
    const auto& tree = model.trees.front();
    const int paths = static_cast<int>(tree.tree.leaf_count());
    std::size_t budget_k = static_cast<std::size_t>(s.K);

    TrainConfig flat_cfg;
    flat_cfg.epochs = 5;
    auto flat = train_flat_baseline(ds, flat_cfg);

    Rng rng(derive_seed(seed, "queries"));
    std::normal_distribution<double> g(0.0, 0.5);
    std::uniform_int_distribution<std::size_t> pick(0, ds.size() - 1);
    for (int q = 0; q < 100; ++q, ++queries) {
      Vec x = ds.row(pick(rng));
      for (Eigen::Index d = 0; d < x.size(); ++d) x[d] += g(rng);

      auto ex = predict_exhaustive(tree, x);
      auto wide = predict_nbest(tree, x, paths);
      double rel = std::abs(wide.ranked.front().probability - ex.ranked.front().probability) /
                   ex.ranked.front().probability;
      worst_rel = std::max(worst_rel, rel);
      if (wide.top() != ex.top() || wide.ranked.front().leaf != ex.ranked.front().leaf || rel > 1e-12) ++exact_fail;

      if (predict_nbest(tree, x, 1).top() != predict_greedy(tree, x).top()) ++greedy_fail;

      double prev = -1;
      for (int Q : {1, 2, 3, 5, 10}) {
        auto p = predict_nbest(tree, x, Q);
        if (p.ranked.front().probability < prev) ++mono_fail;
        prev = p.ranked.front().probability;
        if (p.classifier_evals > budget_k + static_cast<std::size_t>(s.L - 1) * static_cast<std::size_t>(Q) * budget_k)
          ++budget_fail;
      }
      if (predict_flat(flat, x).classifier_evals != static_cast<std::size_t>(s.n)) ++flat_fail;
    }
  }
  report(5, exact_fail == 0,
         fmt("30 models, %zu queries, %zu mismatches, max rel diff %.1e", queries, exact_fail, worst_rel));
  report(6, greedy_fail == 0, fmt("%zu queries, %zu disagreements", queries, greedy_fail));
  report(7, mono_fail == 0, fmt("%zu queries, %zu decreases", queries, mono_fail));
  report(8, budget_fail == 0 && flat_fail == 0,
         fmt("%zu beam queries over budget, %zu flat counts != N", budget_fail, flat_fail));
}

BenchOptions regime(SweepPoint point, std::uint64_t seed, bool flat) {
  BenchOptions opt;
  opt.sweep = {point};
  opt.seed = seed;
  opt.train_per_class = 100;
  opt.test_per_class = 20;
  opt.repetitions = 1;
  opt.include_flat = flat;
  opt.exhaustive_leaf_limit = 0;
  return opt;
}

FeatureDataset regime_data(std::uint64_t seed) { return planted(64, 120, 32, 8, 1.2, 1.0, seed); }

void criterion_9() {
  auto t0 = Clock::now();
  int at_least = 0, strictly = 0;
  std::ostringstream diffs;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto r = run_benchmark(regime_data(seed), regime({8, 2, 5, 1}, seed, false)).rows.front();
    double d = 100.0 * (r.beam.top1 - r.greedy.top1);
    at_least += d >= 0;
    strictly += d > 0;
    diffs << (seed > 1 ? " " : "") << fmt("%+.1f", d);
  }
  double secs = seconds_since(t0);
  report(9, at_least >= 9 && strictly >= 5 && secs <= 300.0,
         fmt("beam>=greedy %d/10, beam>greedy %d/10, %.0fs; beam-greedy pts: %s", at_least, strictly, secs,
             diffs.str().c_str()));
}

void criterion_10() {
  double gap = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto r = run_benchmark(regime_data(seed), regime({8, 2, 5, 1}, seed, true)).rows.front();
    gap += 100.0 * (r.beam.top1 - r.flat->top1) / 3.0;
  }
  report(10, std::abs(gap) <= 3.0, fmt("mean beam - flat = %+.2f points", gap));
}

void criterion_11() {
  double gain = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto r = run_benchmark(regime_data(seed), regime({8, 2, 5, 5}, seed, false)).rows.front();
    gain += 100.0 * (r.ensemble->top1 - r.beam.top1) / 3.0;
  }
  report(11, gain >= -0.5, fmt("mean ensemble - single tree = %+.2f points", gain));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int cli(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "vtree");
  std::vector<const char*> argv;
  for (auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  int code = run_cli(static_cast<int>(argv.size()), argv.data(), o, e);
  if (out) *out = o.str();
  return code;
}

void criterion_12() {
  auto dir = fs::temp_directory_path() / "vtree_acceptance";
  fs::create_directories(dir);
  auto data = (dir / "data.bin").string(), m1 = (dir / "a.model").string(), m2 = (dir / "b.model").string();
  bool ok = cli({"synth", "--categories", "24", "--per-class", "40", "--dim", "16", "--seed", "12", "--out", data}) == 0;
  const std::vector<std::string> train{"train", "--data", data, "-K", "4", "-L", "2", "--trees", "3", "--seed", "8",
                                       "--threads", "4", "--model"};
  auto t1 = train, t2 = train;
  t1.push_back(m1);
  t2.push_back(m2);
  ok = ok && cli(t1) == 0 && cli(t2) == 0;
  bool same_model = ok && slurp(m1) == slurp(m2) && !slurp(m1).empty();
  bool same_pred = true;
  for (const char* mode : {"greedy", "beam", "exhaustive", "ensemble"}) {
    std::string one, four;
    ok = ok && cli({"predict", "--data", data, "--model", m1, "--mode", mode, "--threads", "1"}, &one) == 0 &&
         cli({"predict", "--data", data, "--model", m1, "--mode", mode, "--threads", "4"}, &four) == 0;
    same_pred = same_pred && one == four && !one.empty();
  }
  report(12, ok && same_model && same_pred,
         fmt("model bytes %s, predictions %s across thread counts", same_model ? "identical" : "differ",
             same_pred ? "identical" : "differ"));
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> steps{criterion_1, criterion_2, criterion_3, criterion_4,
                                                 criteria_5_to_8, criterion_9, criterion_10, criterion_11,
                                                 criterion_12};
  for (const auto& step : steps) {
    try {
      step();
    } catch (const std::exception& e) {
      std::printf("FAIL  step threw: %s\n", e.what());
      ++failures;
    }
  }
  std::printf("%d failure(s)\n", failures);
  return failures == 0 ? 0 : 1;
}
