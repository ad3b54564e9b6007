#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "vtree/model.hpp"

namespace vtree {

/// p(e|v) = 1 / (1 + exp(-score)).
double edge_probability(double score);
/// log p(e|v), accurate for scores of large magnitude.
double log_edge_probability(double score);

struct RankedLabel {
  int category = 0;  // dense id
  int leaf = -1;     // leaf node id (-1 for ensemble entries)
  double log_prob = 0.0;
  double probability = 0.0;
};

struct Prediction {
  std::vector<RankedLabel> ranked;  // best first
  std::size_t classifier_evals = 0;
  std::size_t multiplications = 0;

  int top() const { return ranked.empty() ? -1 : ranked.front().category; }
  std::vector<int> categories() const;
};

/// A partial root-descending path.
struct PathHypothesis {
  int node = 0;
  std::vector<std::pair<int, int>> edges;  // (parent node, child index)
  double log_prob = 0.0;
  bool complete = false;
};

struct InferOptions {
  /// Divide each edge probability by the sum over its siblings.
  bool renormalize_siblings = false;
};

constexpr int kDefaultBeam = 5;

/// Follows the highest-scoring child from the root to a leaf.
Prediction predict_greedy(const TreeModel& model, const Vec& x, const InferOptions& opts = {});

/// Scores every root-to-leaf path; all categories ranked by joint probability.
Prediction predict_exhaustive(const TreeModel& model, const Vec& x, const InferOptions& opts = {});

/// Layer-synchronous N-best-path search keeping the Q most probable partial
/// paths per layer. Finished paths stay in the beam with frozen probability.
/// The last expansion is returned unpruned, so up to Q*K labels are ranked.
Prediction predict_nbest(const TreeModel& model, const Vec& x, int Q = kDefaultBeam, const InferOptions& opts = {});

/// Runs predict_nbest on every tree and ranks categories by their path
/// probability averaged over trees (zero where a tree's beam dropped them).
Prediction predict_ensemble(std::span<const TreeModel> trees, const Vec& x, int Q = kDefaultBeam,
                            const InferOptions& opts = {});

/// Applies the model's input preprocessing (optional L2 normalization) and
/// checks the dimension. Throws std::invalid_argument on mismatch.
Vec prepare_query(const Model& model, const Vec& x);

}  // namespace vtree
