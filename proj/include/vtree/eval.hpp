#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vtree/infer.hpp"
#include "vtree/pipeline.hpp"

namespace vtree {

/// Fraction of queries whose truth is among the first k ranked entries.
double topk_accuracy(std::span<const std::vector<int>> predictions, std::span<const int> truths, int k);

/// One-vs-rest linear classifiers over all N categories.
struct FlatModel {
  std::vector<EdgeClassifier> classifiers;  // classifiers[c] scores category c
};

/// Category c's classifier takes c's samples as positives and every other
/// category's as negatives (each category capped at root_subsample).
FlatModel train_flat_baseline(const FeatureDataset& dataset, const TrainConfig& config);

/// Ranks all categories by score; exactly N classifier evaluations.
Prediction predict_flat(const FlatModel& model, const Vec& x);

struct SweepPoint {
  int branching = 8;
  int depth = 2;
  int beam = kDefaultBeam;
  int n_trees = 1;
};

struct BenchOptions {
  std::vector<SweepPoint> sweep;
  std::uint64_t seed = 0;
  int train_per_class = 0;  // 0 = all but the test rows
  int test_per_class = 0;   // 0 = all remaining rows
  int repetitions = 3;
  int tuning_k = 7;
  bool l2_normalize = false;
  bool include_flat = true;
  std::size_t exhaustive_leaf_limit = 4096;
  TrainConfig train;
};

/// Accuracy and cost of one prediction mode, averaged over repetitions.
struct ModeStats {
  double top1 = 0.0;
  double top5 = 0.0;
  double mean_evals = 0.0;
  double mean_multiplications = 0.0;
  double median_query_seconds = 0.0;
};

struct EvalRow {
  SweepPoint config;
  ModeStats greedy;
  ModeStats beam;
  std::optional<ModeStats> exhaustive;  // skipped above the leaf limit
  std::optional<ModeStats> ensemble;    // only when n_trees > 1
  std::optional<ModeStats> flat;
  double mean_classifiers = 0.0;  // per tree
  double mean_height = 0.0;
  std::size_t budget_violations = 0;       // beam queries above K + (L-1)QK
  std::size_t beam_below_greedy = 0;       // queries where beam's best path is less probable than greedy's
  std::size_t queries = 0;
  double train_seconds = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  /// One JSON object per row. Timing fields are omitted when
  /// `include_timing` is false, leaving a deterministic byte stream.
  std::string to_jsonl(bool include_timing = true) const;
  std::string to_table() const;
};

/// Builds, trains and evaluates every sweep configuration on seeded
/// per-class train/test splits.
EvalReport run_benchmark(const FeatureDataset& dataset, const BenchOptions& options);

/// Evaluates one trained model on a labeled query set (used by `eval`).
struct ModelEvaluation {
  ModeStats greedy, beam, exhaustive, ensemble;
  bool has_exhaustive = false;
  bool has_ensemble = false;
  std::size_t queries = 0;
};
ModelEvaluation evaluate_model(const Model& model, const FeatureDataset& queries, int Q,
                               std::size_t exhaustive_leaf_limit = 4096);

}  // namespace vtree
