#include "vtree/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vtree/errors.hpp"
#include "vtree/metric.hpp"
#include "vtree/rng.hpp"

namespace vtree {

std::vector<std::vector<std::size_t>> stratified_folds(const FeatureDataset& dataset, int n_folds, std::uint64_t seed) {
  if (n_folds < 1) throw std::invalid_argument("fold count must be >= 1");
  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(n_folds));
  for (std::size_t c = 0; c < dataset.n_categories(); ++c) {
    auto rows = dataset.rows_of(static_cast<int>(c));
    std::vector<std::size_t> order(rows.begin(), rows.end());
    Rng rng(derive_seed(seed, "folds", c));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < order.size(); ++i) folds[i % folds.size()].push_back(order[i]);
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

VisualTree build_tree_for(const FeatureDataset& dataset, int K, int L, int tuning_k, std::uint64_t seed) {
  auto stats = compute_stats(dataset);
  AffinityMatrix affinity;
  if (stats.size() < 2) {
    affinity.values = affinity.bandwidths = Eigen::MatrixXd::Ones(1, 1);
    affinity.distances = Eigen::MatrixXd::Constant(1, 1, std::sqrt(2.0 * stats.front().variance_sq));
  } else {
    affinity = build_affinity(stats, tuning_k);
  }
  return build_tree(affinity, K, L, seed, stats);
}

Model train_model(const FeatureDataset& input, const PipelineConfig& config) {
  if (config.n_trees < 1) throw std::invalid_argument("tree count must be >= 1");
  const FeatureDataset dataset = config.l2_normalize ? input.l2_normalized() : input;

  Model model;
  model.dim = static_cast<std::uint32_t>(dataset.dim());
  model.category_ids.assign(dataset.original_ids().begin(), dataset.original_ids().end());
  model.config = config.train;
  model.config.seed = config.seed;
  model.tuning_k = config.tuning_k;
  model.l2_normalize = config.l2_normalize;

  std::vector<std::vector<std::size_t>> folds;
  if (config.n_trees == 1) {
    folds.emplace_back(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) folds.front()[i] = i;
  } else {
    folds = stratified_folds(dataset, config.n_trees, config.seed);
  }

  for (std::size_t t = 0; t < folds.size(); ++t) {
    FeatureDataset fold;
    try {
      fold = config.n_trees == 1 ? dataset : dataset.subset(folds[t]);
    } catch (const std::invalid_argument& e) {
      throw TrainingError("fold " + std::to_string(t) + ": " + e.what());
    }
    auto tree = build_tree_for(fold, config.branching, config.depth, config.tuning_k,
                               derive_seed(config.seed, "tree", t));
    TrainConfig tc = config.train;
    tc.seed = derive_seed(config.seed, "train", t);
    auto tm = train_tree_model(tree, fold, tc);
    tm.fold_rows.assign(folds[t].begin(), folds[t].end());
    model.trees.push_back(std::move(tm));
  }
  return model;
}

}  // namespace vtree
