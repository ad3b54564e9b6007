#include "vtree/infer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace vtree {

double edge_probability(double score) {
  if (score >= 0) return 1.0 / (1.0 + std::exp(-score));
  const double e = std::exp(score);
  return e / (1.0 + e);
}

double log_edge_probability(double score) {
  if (score >= 0) return -std::log1p(std::exp(-score));
  return score - std::log1p(std::exp(score));
}

std::vector<int> Prediction::categories() const {
  std::vector<int> out;
  out.reserve(ranked.size());
  for (const auto& r : ranked) out.push_back(r.category);
  return out;
}

namespace {

void check_dim(const TreeModel& model, const Vec& x) {
  for (const auto& edges : model.edges)
    if (!edges.empty()) {
      if (edges.front().weights.size() != x.size())
        throw std::invalid_argument("query dimension " + std::to_string(x.size()) + " does not match model dimension " +
                                    std::to_string(edges.front().weights.size()));
      return;
    }
}

/// Log probabilities of every child edge of `node`; bumps the counter.
std::vector<double> child_log_probs(const TreeModel& model, int node, const Vec& x, const InferOptions& opts,
                                    std::size_t& evals) {
  const auto& edges = model.edges[static_cast<std::size_t>(node)];
  std::vector<double> out(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) out[i] = log_edge_probability(edges[i].score(x));
  evals += edges.size();
  if (opts.renormalize_siblings && !out.empty()) {
    double mx = *std::max_element(out.begin(), out.end());
    double sum = 0;
    for (double v : out) sum += std::exp(v - mx);
    double log_z = mx + std::log(sum);
    for (double& v : out) v -= log_z;
  }
  return out;
}

int min_category(const TreeModel& model, int node) { return model.tree.node(node).categories.front(); }

// Higher probability first; ties toward the lower category id.
bool better(const TreeModel& model, const PathHypothesis& a, const PathHypothesis& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  return min_category(model, a.node) < min_category(model, b.node);
}

RankedLabel to_ranked(const TreeModel& model, const PathHypothesis& h) {
  RankedLabel r;
  r.category = min_category(model, h.node);
  r.leaf = h.node;
  r.log_prob = h.log_prob;
  r.probability = std::exp(h.log_prob);
  return r;
}

}  // namespace

Prediction predict_greedy(const TreeModel& model, const Vec& x, const InferOptions& opts) {
  check_dim(model, x);
  Prediction pred;
  int node = model.tree.root;
  double log_prob = 0.0;
  bool first = true;
  while (!model.tree.node(node).is_leaf()) {
    auto lp = child_log_probs(model, node, x, opts, pred.classifier_evals);
    // Compare accumulated sums, as the beam does, so rounding ties break the same way.
    std::size_t best = 0;
    for (std::size_t i = 1; i < lp.size(); ++i)
      if (log_prob + lp[i] > log_prob + lp[best]) best = i;
    log_prob += lp[best];
    if (!first) ++pred.multiplications;
    first = false;
    node = model.tree.node(node).children[best];
  }
  PathHypothesis h{node, {}, log_prob, true};
  pred.ranked.push_back(to_ranked(model, h));
  return pred;
}

Prediction predict_exhaustive(const TreeModel& model, const Vec& x, const InferOptions& opts) {
  check_dim(model, x);
  Prediction pred;
  std::vector<PathHypothesis> leaves;
  std::vector<PathHypothesis> stack{{model.tree.root, {}, 0.0, false}};
  while (!stack.empty()) {
    PathHypothesis h = std::move(stack.back());
    stack.pop_back();
    const auto& v = model.tree.node(h.node);
    if (v.is_leaf()) {
      h.complete = true;
      leaves.push_back(std::move(h));
      continue;
    }
    auto lp = child_log_probs(model, h.node, x, opts, pred.classifier_evals);
    for (std::size_t i = 0; i < lp.size(); ++i) {
      PathHypothesis next{v.children[i], h.edges, h.log_prob + lp[i], false};
      next.edges.emplace_back(h.node, static_cast<int>(i));
      if (!h.edges.empty()) ++pred.multiplications;
      stack.push_back(std::move(next));
    }
  }
  std::sort(leaves.begin(), leaves.end(), [&](const auto& a, const auto& b) { return better(model, a, b); });
  for (const auto& h : leaves) pred.ranked.push_back(to_ranked(model, h));
  return pred;
}

Prediction predict_nbest(const TreeModel& model, const Vec& x, int Q, const InferOptions& opts) {
  if (Q < 1) throw std::invalid_argument("beam width Q must be >= 1");
  check_dim(model, x);
  Prediction pred;
  std::vector<PathHypothesis> beam{{model.tree.root, {}, 0.0, model.tree.node(model.tree.root).is_leaf()}};
  while (true) {
    if (std::all_of(beam.begin(), beam.end(), [](const auto& h) { return h.complete; })) break;
    std::vector<PathHypothesis> candidates;
    for (auto& h : beam) {
      if (h.complete) {
        candidates.push_back(std::move(h));
        continue;
      }
      const auto& v = model.tree.node(h.node);
      auto lp = child_log_probs(model, h.node, x, opts, pred.classifier_evals);
      for (std::size_t i = 0; i < lp.size(); ++i) {
        int child = v.children[i];
        PathHypothesis next{child, h.edges, h.log_prob + lp[i], model.tree.node(child).is_leaf()};
        next.edges.emplace_back(h.node, static_cast<int>(i));
        if (!h.edges.empty()) ++pred.multiplications;
        candidates.push_back(std::move(next));
      }
    }
    std::sort(candidates.begin(), candidates.end(), [&](const auto& a, const auto& b) { return better(model, a, b); });
    const bool finished = std::all_of(candidates.begin(), candidates.end(), [](const auto& h) { return h.complete; });
    if (!finished && candidates.size() > static_cast<std::size_t>(Q)) candidates.resize(static_cast<std::size_t>(Q));
    beam = std::move(candidates);
  }
  for (const auto& h : beam) pred.ranked.push_back(to_ranked(model, h));
  return pred;
}

Prediction predict_ensemble(std::span<const TreeModel> trees, const Vec& x, int Q, const InferOptions& opts) {
  if (trees.empty()) throw std::invalid_argument("ensemble needs at least one tree");
  const int n = trees.front().tree.n_categories;
  for (const auto& t : trees)
    if (t.tree.n_categories != n) throw std::invalid_argument("ensemble trees disagree on the category count");

  Prediction pred;
  std::vector<double> sum(static_cast<std::size_t>(n), 0.0);
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (const auto& t : trees) {
    auto p = predict_nbest(t, x, Q, opts);
    pred.classifier_evals += p.classifier_evals;
    pred.multiplications += p.multiplications;
    for (const auto& r : p.ranked) {
      sum[static_cast<std::size_t>(r.category)] += r.probability;
      seen[static_cast<std::size_t>(r.category)] = true;
    }
  }
  const double count = static_cast<double>(trees.size());
  for (int c = 0; c < n; ++c) {
    if (!seen[static_cast<std::size_t>(c)]) continue;
    RankedLabel r;
    r.category = c;
    r.probability = sum[static_cast<std::size_t>(c)] / count;
    r.log_prob = std::log(r.probability);
    pred.ranked.push_back(r);
  }
  std::stable_sort(pred.ranked.begin(), pred.ranked.end(),
                   [](const auto& a, const auto& b) { return a.probability > b.probability; });
  return pred;
}

Vec prepare_query(const Model& model, const Vec& x) {
  if (static_cast<std::uint32_t>(x.size()) != model.dim)
    throw std::invalid_argument("query dimension " + std::to_string(x.size()) + " does not match model dimension " +
                                std::to_string(model.dim));
  if (!model.l2_normalize) return x;
  // Same float rounding as the training data went through.
  Eigen::VectorXf xf = x.cast<float>();
  double n = xf.cast<double>().norm();
  if (n > 0) xf = (xf.cast<double>() / n).cast<float>();
  return xf.cast<double>();
}

}  // namespace vtree
