#include "vtree/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "vtree/rng.hpp"

namespace vtree {

double topk_accuracy(std::span<const std::vector<int>> predictions, std::span<const int> truths, int k) {
  if (predictions.size() != truths.size()) throw std::invalid_argument("predictions and truths differ in length");
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (truths.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t q = 0; q < truths.size(); ++q) {
    const auto& ranked = predictions[q];
    auto end = ranked.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(k)));
    if (std::find(ranked.begin(), end, truths[q]) != end) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(truths.size());
}

FlatModel train_flat_baseline(const FeatureDataset& dataset, const TrainConfig& config) {
  config.validate();
  if (dataset.n_categories() < 2) throw std::invalid_argument("flat baseline needs at least two categories");
  // A one-level tree over singleton leaves yields exactly the one-vs-rest
  // sample layout of the root layer.
  VisualTree star;
  star.branching = static_cast<int>(dataset.n_categories());
  star.max_depth = 1;
  star.n_categories = static_cast<int>(dataset.n_categories());
  TreeNode root;
  for (int c = 0; c < star.n_categories; ++c) root.categories.push_back(c);
  star.nodes.push_back(root);
  for (int c = 0; c < star.n_categories; ++c) {
    TreeNode leaf;
    leaf.id = c + 1;
    leaf.depth = 2;
    leaf.categories = {c};
    leaf.parent = 0;
    star.nodes[0].children.push_back(leaf.id);
    star.nodes.push_back(leaf);
  }
  auto tm = train_tree_model(star, dataset, config);
  FlatModel flat;
  flat.classifiers = std::move(tm.edges.front());
  return flat;
}

Prediction predict_flat(const FlatModel& model, const Vec& x) {
  Prediction pred;
  pred.ranked.reserve(model.classifiers.size());
  for (std::size_t c = 0; c < model.classifiers.size(); ++c) {
    if (model.classifiers[c].weights.size() != x.size()) throw std::invalid_argument("query dimension mismatch");
    double s = model.classifiers[c].score(x);
    RankedLabel r;
    r.category = static_cast<int>(c);
    r.log_prob = log_edge_probability(s);
    r.probability = edge_probability(s);
    pred.ranked.push_back(r);
  }
  pred.classifier_evals = model.classifiers.size();
  std::stable_sort(pred.ranked.begin(), pred.ranked.end(),
                   [](const auto& a, const auto& b) { return a.log_prob > b.log_prob; });
  return pred;
}

namespace {

using Clock = std::chrono::steady_clock;

/// Accumulates one mode's predictions over a query set.
class ModeAccumulator {
 public:
  template <class F>
  Prediction run(F&& predict) {
    auto start = Clock::now();
    Prediction p = predict();
    times_.push_back(std::chrono::duration<double>(Clock::now() - start).count());
    evals_ += static_cast<double>(p.classifier_evals);
    mults_ += static_cast<double>(p.multiplications);
    ranked_.push_back(p.categories());
    return p;
  }

  ModeStats finish(std::span<const int> truths) {
    ModeStats s;
    if (truths.empty()) return s;
    s.top1 = topk_accuracy(ranked_, truths, 1);
    s.top5 = topk_accuracy(ranked_, truths, 5);
    s.mean_evals = evals_ / static_cast<double>(truths.size());
    s.mean_multiplications = mults_ / static_cast<double>(truths.size());
    auto mid = times_.begin() + static_cast<std::ptrdiff_t>(times_.size() / 2);
    std::nth_element(times_.begin(), mid, times_.end());
    s.median_query_seconds = *mid;
    return s;
  }

 private:
  std::vector<std::vector<int>> ranked_;
  std::vector<double> times_;
  double evals_ = 0;
  double mults_ = 0;
};

void add_into(ModeStats& acc, const ModeStats& s, double w) {
  acc.top1 += w * s.top1;
  acc.top5 += w * s.top5;
  acc.mean_evals += w * s.mean_evals;
  acc.mean_multiplications += w * s.mean_multiplications;
  acc.median_query_seconds += w * s.median_query_seconds;
}

std::vector<int> dense_truths(const Model& model, const FeatureDataset& queries) {
  std::map<std::uint32_t, int> dense;
  for (std::size_t c = 0; c < model.category_ids.size(); ++c) dense[model.category_ids[c]] = static_cast<int>(c);
  std::vector<int> truths;
  truths.reserve(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    auto it = dense.find(queries.original_id(queries.label(q)));
    if (it == dense.end())
      throw std::invalid_argument("query label " + std::to_string(queries.original_id(queries.label(q))) +
                                  " is not a category of the model");
    truths.push_back(it->second);
  }
  return truths;
}

nlohmann::json mode_json(const ModeStats& s, bool timing) {
  nlohmann::json j = {{"top1", s.top1},
                      {"top5", s.top5},
                      {"mean_classifier_evals", s.mean_evals},
                      {"mean_multiplications", s.mean_multiplications}};
  if (timing) j["median_query_seconds"] = s.median_query_seconds;
  return j;
}

}  // namespace

ModelEvaluation evaluate_model(const Model& model, const FeatureDataset& queries, int Q,
                               std::size_t exhaustive_leaf_limit) {
  if (model.trees.empty()) throw std::invalid_argument("model holds no trees");
  if (queries.dim() != model.dim) throw std::invalid_argument("query dimension does not match the model");
  auto truths = dense_truths(model, queries);
  ModelEvaluation out;
  out.queries = queries.size();
  out.has_exhaustive = model.trees.front().tree.leaf_count() <= exhaustive_leaf_limit;
  out.has_ensemble = model.trees.size() > 1;
  const double w = 1.0 / static_cast<double>(model.trees.size());
  for (const auto& tree : model.trees) {
    ModeAccumulator greedy, beam, exhaustive;
    for (std::size_t q = 0; q < queries.size(); ++q) {
      Vec x = prepare_query(model, queries.row(q));
      greedy.run([&] { return predict_greedy(tree, x); });
      beam.run([&] { return predict_nbest(tree, x, Q); });
      if (out.has_exhaustive) exhaustive.run([&] { return predict_exhaustive(tree, x); });
    }
    add_into(out.greedy, greedy.finish(truths), w);
    add_into(out.beam, beam.finish(truths), w);
    if (out.has_exhaustive) add_into(out.exhaustive, exhaustive.finish(truths), w);
  }
  if (out.has_ensemble) {
    ModeAccumulator ens;
    for (std::size_t q = 0; q < queries.size(); ++q) {
      Vec x = prepare_query(model, queries.row(q));
      ens.run([&] { return predict_ensemble(model.trees, x, Q); });
    }
    out.ensemble = ens.finish(truths);
  }
  return out;
}

EvalReport run_benchmark(const FeatureDataset& dataset, const BenchOptions& options) {
  if (options.sweep.empty()) throw std::invalid_argument("benchmark sweep is empty");
  if (options.repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
  EvalReport report;
  const double w = 1.0 / options.repetitions;

  std::vector<Split> splits;
  for (int rep = 0; rep < options.repetitions; ++rep)
    splits.push_back(split_per_class(dataset, options.train_per_class, options.test_per_class,
                                     derive_seed(options.seed, "bench-split", static_cast<std::uint64_t>(rep))));

  for (std::size_t ci = 0; ci < options.sweep.size(); ++ci) {
    const auto& point = options.sweep[ci];
    EvalRow row;
    row.config = point;
    if (point.n_trees > 1) row.ensemble = ModeStats{};
    if (options.include_flat) row.flat = ModeStats{};
    bool exhaustive_ok = true;
    for (int rep = 0; rep < options.repetitions; ++rep) {
      const auto& split = splits[static_cast<std::size_t>(rep)];
      FeatureDataset train = dataset.subset(split.train);
      FeatureDataset test = dataset.subset(split.test);

      PipelineConfig pc;
      pc.branching = point.branching;
      pc.depth = point.depth;
      pc.tuning_k = options.tuning_k;
      pc.n_trees = point.n_trees;
      pc.l2_normalize = options.l2_normalize;
      pc.seed = derive_seed(options.seed, "bench-model", ci, static_cast<std::uint64_t>(rep));
      pc.train = options.train;
      auto start = Clock::now();
      Model model = train_model(train, pc);
      row.train_seconds += w * std::chrono::duration<double>(Clock::now() - start).count();

      double classifiers = 0, height = 0;
      for (const auto& t : model.trees) {
        classifiers += static_cast<double>(t.classifier_count());
        height += t.tree.height();
      }
      row.mean_classifiers += w * classifiers / static_cast<double>(model.trees.size());
      row.mean_height += w * height / static_cast<double>(model.trees.size());

      auto eval = evaluate_model(model, test, point.beam, options.exhaustive_leaf_limit);
      add_into(row.greedy, eval.greedy, w);
      add_into(row.beam, eval.beam, w);
      if (eval.has_exhaustive) {
        if (!row.exhaustive) row.exhaustive = ModeStats{};
        add_into(*row.exhaustive, eval.exhaustive, w);
      } else {
        exhaustive_ok = false;
      }
      if (row.ensemble) add_into(*row.ensemble, eval.ensemble, w);

      // Per-query invariants of the beam against its budget and greedy.
      const std::size_t budget_k = static_cast<std::size_t>(point.branching);
      for (const auto& t : model.trees) {
        const std::size_t budget =
            budget_k + static_cast<std::size_t>(point.depth - 1) * static_cast<std::size_t>(point.beam) * budget_k;
        for (std::size_t q = 0; q < test.size(); ++q) {
          Vec x = prepare_query(model, test.row(q));
          auto b = predict_nbest(t, x, point.beam);
          auto g = predict_greedy(t, x);
          if (b.classifier_evals > budget) ++row.budget_violations;
          if (b.ranked.front().log_prob < g.ranked.front().log_prob) ++row.beam_below_greedy;
        }
      }
      row.queries += test.size();

      if (row.flat) {
        FeatureDataset flat_train = options.l2_normalize ? train.l2_normalized() : train;
        TrainConfig fc = options.train;
        fc.seed = derive_seed(pc.seed, "flat");
        FlatModel flat = train_flat_baseline(flat_train, fc);
        ModeAccumulator acc;
        auto truths = dense_truths(model, test);
        for (std::size_t q = 0; q < test.size(); ++q) {
          Vec x = prepare_query(model, test.row(q));
          acc.run([&] { return predict_flat(flat, x); });
        }
        add_into(*row.flat, acc.finish(truths), w);
      }
    }
    if (!exhaustive_ok) row.exhaustive.reset();
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string EvalReport::to_jsonl(bool include_timing) const {
  std::ostringstream out;
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["K"] = r.config.branching;
    j["L"] = r.config.depth;
    j["Q"] = r.config.beam;
    j["trees"] = r.config.n_trees;
    j["queries"] = r.queries;
    j["mean_classifiers"] = r.mean_classifiers;
    j["mean_height"] = r.mean_height;
    j["greedy"] = mode_json(r.greedy, include_timing);
    j["beam"] = mode_json(r.beam, include_timing);
    if (r.exhaustive) j["exhaustive"] = mode_json(*r.exhaustive, include_timing);
    if (r.ensemble) j["ensemble"] = mode_json(*r.ensemble, include_timing);
    if (r.flat) j["flat"] = mode_json(*r.flat, include_timing);
    j["budget_violations"] = r.budget_violations;
    j["beam_below_greedy"] = r.beam_below_greedy;
    if (include_timing) j["train_seconds"] = r.train_seconds;
    out << j.dump() << '\n';
  }
  return out.str();
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << std::left << std::setw(12) << "config" << std::setw(9) << "mode" << std::right << std::setw(9) << "top1"
      << std::setw(9) << "top5" << std::setw(12) << "evals/q" << std::setw(14) << "median_us/q" << '\n';
  auto line = [&](const std::string& cfg, const char* mode, const ModeStats& s) {
    out << std::left << std::setw(12) << cfg << std::setw(9) << mode << std::right << std::setw(9) << s.top1
        << std::setw(9) << s.top5 << std::setw(12) << std::setprecision(1) << s.mean_evals << std::setw(14)
        << s.median_query_seconds * 1e6 << std::setprecision(4) << '\n';
  };
  for (const auto& r : rows) {
    std::string cfg = "T" + std::to_string(r.config.branching) + "," + std::to_string(r.config.depth) + " Q" +
                      std::to_string(r.config.beam) + (r.config.n_trees > 1 ? " x" + std::to_string(r.config.n_trees) : "");
    line(cfg, "greedy", r.greedy);
    line(cfg, "beam", r.beam);
    if (r.exhaustive) line(cfg, "exhaust", *r.exhaustive);
    if (r.ensemble) line(cfg, "ensemble", *r.ensemble);
    if (r.flat) line(cfg, "flat", *r.flat);
  }
  return out.str();
}

}  // namespace vtree
