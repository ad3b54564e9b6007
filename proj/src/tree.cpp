#include "vtree/tree.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "vtree/rng.hpp"
#include "vtree/spectral.hpp"

namespace vtree {

std::size_t VisualTree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

int VisualTree::height() const {
  int h = 0;
  for (const auto& n : nodes) h = std::max(h, n.depth);
  return h;
}

std::vector<int> VisualTree::leaf_of_category() const {
  std::vector<int> out(static_cast<std::size_t>(n_categories), -1);
  for (const auto& n : nodes)
    if (n.is_leaf() && n.categories.size() == 1) out[static_cast<std::size_t>(n.categories.front())] = n.id;
  return out;
}

namespace {

// K^levels, saturating well above any category count.
long long subtree_capacity(int K, int levels) {
  long long cap = 1;
  for (int i = 0; i < levels && cap < (1LL << 40); ++i) cap *= K;
  return cap;
}

}  // namespace

VisualTree build_tree(const AffinityMatrix& affinity, int K, int L, std::uint64_t seed,
                      std::span<const CategoryStats> stats) {
  if (K < 2) throw std::invalid_argument("branching factor K must be >= 2");
  if (L < 1) throw std::invalid_argument("depth L must be >= 1");
  const int n = static_cast<int>(affinity.size());
  if (n < 1) throw std::invalid_argument("tree needs at least one category");

  VisualTree tree;
  tree.branching = K;
  tree.max_depth = L;
  tree.n_categories = n;
  TreeNode root;
  root.categories.resize(static_cast<std::size_t>(n));
  std::iota(root.categories.begin(), root.categories.end(), 0);
  tree.nodes.push_back(std::move(root));

  std::deque<int> pending{0};
  while (!pending.empty()) {
    const int id = pending.front();
    pending.pop_front();
    const std::vector<int> cats = tree.nodes[static_cast<std::size_t>(id)].categories;
    const int depth = tree.nodes[static_cast<std::size_t>(id)].depth;
    if (cats.size() == 1) continue;

    std::vector<std::vector<int>> groups;
    if (static_cast<int>(cats.size()) < K || depth >= L) {
      for (int c : cats) groups.push_back({c});
    } else {
      Eigen::MatrixXd means;
      if (stats.size() == static_cast<std::size_t>(n)) {
        means.resize(static_cast<Eigen::Index>(cats.size()), stats.front().mean.size());
        for (std::size_t i = 0; i < cats.size(); ++i)
          means.row(static_cast<Eigen::Index>(i)) = stats[static_cast<std::size_t>(cats[i])].mean.transpose();
      }
      Eigen::MatrixXd sub = affinity.restrict(cats);
      auto part = spectral_partition(sub, K,
                                     derive_seed(seed, "tree-partition", static_cast<std::uint64_t>(cats.front()),
                                                 static_cast<std::uint64_t>(depth)),
                                     means);
      // Keep every later level within K children when the K^L leaf budget allows it.
      const long long cap = subtree_capacity(K, L - depth);
      const auto size = static_cast<long long>(cats.size());
      if (size <= cap * K) part = enforce_capacity(sub, part, K, static_cast<int>(std::min(cap, size)));
      for (auto& members : part.groups()) {
        std::vector<int> group;
        for (int m : members) group.push_back(cats[static_cast<std::size_t>(m)]);
        groups.push_back(std::move(group));
      }
    }
    // Members are ascending already; order siblings by their smallest id.
    std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
    for (auto& group : groups) {
      TreeNode child;
      child.id = static_cast<int>(tree.nodes.size());
      child.depth = depth + 1;
      child.categories = std::move(group);
      child.parent = id;
      tree.nodes[static_cast<std::size_t>(id)].children.push_back(child.id);
      pending.push_back(child.id);
      tree.nodes.push_back(std::move(child));
    }
  }
  return tree;
}

std::vector<std::string> validate_tree(const VisualTree& tree) {
  std::vector<std::string> issues;
  auto report = [&](const std::string& s) { issues.push_back(s); };
  if (tree.nodes.empty()) {
    report("tree has no nodes");
    return issues;
  }
  if (tree.root < 0 || static_cast<std::size_t>(tree.root) >= tree.nodes.size()) {
    report("root id out of range");
    return issues;
  }
  const auto& root = tree.node(tree.root);
  if (root.depth != 1) report("root depth is " + std::to_string(root.depth) + ", expected 1");
  if (root.parent) report("root has a parent");
  std::vector<int> all(static_cast<std::size_t>(tree.n_categories));
  std::iota(all.begin(), all.end(), 0);
  if (root.categories != all) report("root does not hold exactly categories 0.." + std::to_string(tree.n_categories - 1));

  std::vector<int> visits(tree.nodes.size(), 0);
  std::vector<int> leaf_hits(static_cast<std::size_t>(std::max(tree.n_categories, 0)), 0);
  std::deque<int> queue{tree.root};
  while (!queue.empty()) {
    int id = queue.front();
    queue.pop_front();
    if (++visits[static_cast<std::size_t>(id)] > 1) {
      report("node " + std::to_string(id) + " reachable more than once");
      continue;
    }
    const auto& v = tree.node(id);
    const std::string name = "node " + std::to_string(id);
    if (v.id != id) report(name + " stores id " + std::to_string(v.id));
    if (!std::is_sorted(v.categories.begin(), v.categories.end()) ||
        std::adjacent_find(v.categories.begin(), v.categories.end()) != v.categories.end())
      report(name + " category set is not sorted and unique");
    if (v.depth > tree.max_depth + 1)
      report(name + " depth " + std::to_string(v.depth) + " exceeds L+1=" + std::to_string(tree.max_depth + 1));

    if (v.is_leaf()) {
      if (v.categories.size() != 1) {
        report(name + " is a leaf with " + std::to_string(v.categories.size()) + " categories");
      }
      for (int c : v.categories)
        if (c >= 0 && c < tree.n_categories) ++leaf_hits[static_cast<std::size_t>(c)];
      continue;
    }
    if (v.categories.size() == 1) report(name + " holds one category but has children");

    std::vector<int> merged;
    bool all_singletons = true;
    int prev_front = -1;
    for (int cid : v.children) {
      if (cid < 0 || static_cast<std::size_t>(cid) >= tree.nodes.size()) {
        report(name + " has out-of-range child " + std::to_string(cid));
        continue;
      }
      const auto& c = tree.node(cid);
      if (!c.parent || *c.parent != id) report("node " + std::to_string(cid) + " parent link does not match " + name);
      if (c.depth != v.depth + 1) report("node " + std::to_string(cid) + " depth is not parent depth + 1");
      if (c.categories.empty()) {
        report("node " + std::to_string(cid) + " has an empty category set");
        continue;
      }
      if (c.categories.front() <= prev_front) report(name + " children are not ordered by smallest category");
      prev_front = c.categories.front();
      all_singletons = all_singletons && c.categories.size() == 1;
      merged.insert(merged.end(), c.categories.begin(), c.categories.end());
      queue.push_back(cid);
    }
    std::sort(merged.begin(), merged.end());
    if (std::adjacent_find(merged.begin(), merged.end()) != merged.end())
      report(name + " children overlap (disjointness violated)");
    std::vector<int> uniq = merged;
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    if (uniq != v.categories) report(name + " children do not cover its category set (coverage violated)");

    const bool flat_expansion = all_singletons && v.depth >= tree.max_depth;
    if (static_cast<int>(v.children.size()) > tree.branching && !flat_expansion)
      report(name + " has " + std::to_string(v.children.size()) + " children, more than K=" +
             std::to_string(tree.branching));
  }
  for (std::size_t i = 0; i < visits.size(); ++i)
    if (visits[i] == 0) report("node " + std::to_string(i) + " unreachable from root");
  for (std::size_t c = 0; c < leaf_hits.size(); ++c) {
    if (leaf_hits[c] == 0) report("category " + std::to_string(c) + " is in no leaf");
    if (leaf_hits[c] > 1) report("category " + std::to_string(c) + " appears in " + std::to_string(leaf_hits[c]) + " leaves");
  }
  return issues;
}

std::string export_dot(const VisualTree& tree, const std::map<int, std::string>* labels) {
  std::ostringstream out;
  out << "digraph visual_tree {\n  node [shape=box];\n";
  for (const auto& v : tree.nodes) {
    out << "  n" << v.id << " [label=\"";
    for (std::size_t i = 0; i < v.categories.size(); ++i) {
      if (i) out << ',';
      int c = v.categories[i];
      auto it = labels ? labels->find(c) : decltype(labels->end()){};
      if (labels && it != labels->end()) {
        for (char ch : it->second) {
          if (ch == '"' || ch == '\\') out << '\\';
          out << ch;
        }
      } else {
        out << c;
      }
    }
    out << "\"];\n";
  }
  for (const auto& v : tree.nodes)
    for (int c : v.children) out << "  n" << v.id << " -> n" << c << ";\n";
  out << "}\n";
  return out.str();
}

}  // namespace vtree
