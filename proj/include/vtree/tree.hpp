#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vtree/dataset.hpp"
#include "vtree/metric.hpp"

namespace vtree {

struct TreeNode {
  int id = 0;
  int depth = 1;
  std::vector<int> categories;  // sorted dense category ids
  std::vector<int> children;    // ordered by smallest contained category
  std::optional<int> parent;

  bool is_leaf() const { return children.empty(); }
};

/// Category hierarchy T_{K,L}. Node 0 is the root; ids follow breadth-first
/// construction order.
struct VisualTree {
  std::vector<TreeNode> nodes;
  int root = 0;
  int branching = 2;  // K
  int max_depth = 1;  // L
  int n_categories = 0;

  const TreeNode& node(int id) const { return nodes[static_cast<std::size_t>(id)]; }
  std::size_t edge_count() const { return nodes.empty() ? 0 : nodes.size() - 1; }
  std::size_t leaf_count() const;
  int height() const;  // deepest node depth

  /// Leaf node id per dense category.
  std::vector<int> leaf_of_category() const;
};

/// Top-down construction. A node with fewer than K categories, or sitting at
/// depth L, gets one singleton leaf per category; any other node is split by
/// spectral clustering on the affinity restricted to its categories. When
/// N <= K^L, a split at depth d caps each group at K^(L-d) categories so
/// that no node anywhere gets more than K children.
/// `stats`, when given, supplies category means for the partition fallback.
VisualTree build_tree(const AffinityMatrix& affinity, int K, int L, std::uint64_t seed,
                      std::span<const CategoryStats> stats = {});

/// Human-readable structural violations; empty when the tree is valid.
std::vector<std::string> validate_tree(const VisualTree& tree);

/// Graphviz digraph. Node labels list category ids, or the mapped names when
/// `labels` is given.
std::string export_dot(const VisualTree& tree, const std::map<int, std::string>* labels = nullptr);

}  // namespace vtree
