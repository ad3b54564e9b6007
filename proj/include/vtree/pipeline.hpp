#pragma once

#include <cstdint>
#include <vector>

#include "vtree/dataset.hpp"
#include "vtree/model.hpp"

namespace vtree {

/// End-to-end training settings: statistics -> affinity -> tree -> edge
/// classifiers, once per tree.
struct PipelineConfig {
  int branching = 32;  // K
  int depth = 2;       // L
  int tuning_k = 7;
  int n_trees = 1;
  bool l2_normalize = false;
  std::uint64_t seed = 0;
  TrainConfig train;
};

/// Stratified folds: each category's rows are shuffled and dealt round-robin,
/// so every fold holds every category when N_i >= n_folds.
std::vector<std::vector<std::size_t>> stratified_folds(const FeatureDataset& dataset, int n_folds, std::uint64_t seed);

/// Builds and trains one tree per fold (a single tree on all rows when
/// n_trees == 1). Fold rows are recorded per tree.
Model train_model(const FeatureDataset& dataset, const PipelineConfig& config);

/// Tree structure only, for one dataset (stats, affinity, construction).
VisualTree build_tree_for(const FeatureDataset& dataset, int K, int L, int tuning_k, std::uint64_t seed);

}  // namespace vtree
