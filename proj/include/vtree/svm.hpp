#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "vtree/dataset.hpp"
#include "vtree/tree.hpp"

namespace vtree {

struct TrainConfig {
  double lambda = 1e-4;
  int epochs = 30;
  int root_subsample = 600;  // per-category cap on samples at the root layer; 0 = no cap
  std::uint64_t seed = 0;
  double tolerance = 1e-3;
  bool use_bias = true;         // augmented constant feature
  bool balance_classes = false;  // weight samples inversely to their side's size
  int threads = 1;

  void validate() const;
};

/// Linear scorer S(x) = w.x + b, stored in single precision.
struct EdgeClassifier {
  Eigen::VectorXf weights;
  float bias = 0.0f;
  int node = 0;         // parent node id
  int child_index = 0;  // position among the parent's children

  double score(const Vec& x) const { return weights.cast<double>().dot(x) + static_cast<double>(bias); }
};

/// Double-precision solution of one hinge-loss problem.
struct LinearSolution {
  Vec weights;
  double bias = 0.0;
  double objective = 0.0;
  int epochs_run = 0;
};

/// (lambda/2)(|w|^2 + b^2) + (1/sum c) sum_i c_i max(0, 1 - y_i (w.x_i + b)).
/// The bias acts as the weight of a constant feature, so it is regularized
/// with w. Sample weights `c` may be empty (all ones).
double svm_objective(const Eigen::MatrixXd& X, std::span<const double> y, std::span<const double> c,
                     const Vec& w, double b, double lambda);

/// Stochastic subgradient descent with step 1/(lambda t), projection onto
/// the ball of radius 1/sqrt(lambda), and averaging of the iterates over the
/// second half of the run. y entries must be +1 or -1.
LinearSolution train_linear_svm(const Eigen::MatrixXd& X, std::span<const double> y, const TrainConfig& config,
                                std::uint64_t seed);

/// Convenience form: positives get +1, negatives -1.
LinearSolution train_linear_svm(const Eigen::MatrixXd& positives, const Eigen::MatrixXd& negatives,
                                const TrainConfig& config);

/// Classifiers of one tree; `edges[v][i]` scores the edge from node v to its
/// i-th child (empty for leaves).
struct TreeModel {
  VisualTree tree;
  std::vector<std::vector<EdgeClassifier>> edges;
  std::vector<std::uint32_t> fold_rows;  // training rows used, as indices into the caller's dataset

  std::size_t classifier_count() const;
};

/// Training samples for one parent node: rows of C(v) (capped per category at
/// the root) and the child index each row belongs to.
struct NodeSamples {
  std::vector<std::size_t> rows;
  std::vector<int> child_of_row;
};
NodeSamples node_samples(const VisualTree& tree, int node, const FeatureDataset& dataset, const TrainConfig& config);

/// One classifier per parent->child edge: positives are the samples of the
/// child's categories, negatives those of its siblings. Throws TrainingError
/// naming the node when a child has no samples.
TreeModel train_tree_model(const VisualTree& tree, const FeatureDataset& dataset, const TrainConfig& config);

}  // namespace vtree
