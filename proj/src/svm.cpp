#include "vtree/svm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "vtree/errors.hpp"
#include "vtree/rng.hpp"

namespace vtree {

void TrainConfig::validate() const {
  if (!(lambda > 0)) throw std::invalid_argument("lambda must be > 0");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (root_subsample < 0) throw std::invalid_argument("root_subsample must be >= 0");
  if (!(tolerance > 0)) throw std::invalid_argument("tolerance must be > 0");
}

double svm_objective(const Eigen::MatrixXd& X, std::span<const double> y, std::span<const double> c,
                     const Vec& w, double b, double lambda) {
  double loss = 0.0;
  double total_weight = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    double ci = c.empty() ? 1.0 : c[static_cast<std::size_t>(i)];
    double margin = y[static_cast<std::size_t>(i)] * (X.row(i).dot(w) + b);
    loss += ci * std::max(0.0, 1.0 - margin);
    total_weight += ci;
  }
  return 0.5 * lambda * (w.squaredNorm() + b * b) + loss / total_weight;
}

namespace {

std::vector<double> side_weights(std::span<const double> y, bool balance) {
  if (!balance) return {};
  double pos = 0, neg = 0;
  for (double v : y) (v > 0 ? pos : neg) += 1;
  std::vector<double> c(y.size());
  const double m = static_cast<double>(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) c[i] = m / (2.0 * (y[i] > 0 ? pos : neg));
  return c;
}

}  // namespace

LinearSolution train_linear_svm(const Eigen::MatrixXd& X, std::span<const double> y, const TrainConfig& config,
                                std::uint64_t seed) {
  config.validate();
  const auto m = X.rows();
  if (static_cast<std::size_t>(m) != y.size()) throw std::invalid_argument("labels and rows differ in count");
  bool has_pos = false, has_neg = false;
  for (double v : y) {
    if (v == 1.0) has_pos = true;
    else if (v == -1.0) has_neg = true;
    else throw std::invalid_argument("labels must be +1 or -1");
  }
  if (!has_pos || !has_neg) throw TrainingError("svm needs both positive and negative samples");
  if (!X.allFinite()) throw TrainingError("non-finite training feature");

  const auto c = side_weights(y, config.balance_classes);
  const double lambda = config.lambda;
  const double radius = 1.0 / std::sqrt(lambda);
  const double bias_feature = config.use_bias ? 1.0 : 0.0;
  const int average_from = config.epochs / 2;

  Vec w = Vec::Zero(X.cols());
  double b = 0.0;
  Vec w_sum = Vec::Zero(X.cols());
  double b_sum = 0.0;
  long long averaged = 0;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(derive_seed(seed, "svm-shuffle"));

  LinearSolution sol;
  double previous = std::numeric_limits<double>::infinity();
  long long t = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index i : order) {
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const double yi = y[static_cast<std::size_t>(i)];
      const double margin = yi * (X.row(i).dot(w) + b * bias_feature);
      w *= 1.0 - eta * lambda;
      b *= 1.0 - eta * lambda;
      if (margin < 1.0) {
        const double step = eta * yi * (c.empty() ? 1.0 : c[static_cast<std::size_t>(i)]);
        w.noalias() += step * X.row(i).transpose();
        b += step * bias_feature;
      }
      const double norm = std::sqrt(w.squaredNorm() + b * b);
      if (norm > radius) {
        w *= radius / norm;
        b *= radius / norm;
      }
      if (epoch >= average_from) {
        w_sum += w;
        b_sum += b;
        ++averaged;
      }
    }
    sol.epochs_run = epoch + 1;
    if (averaged > 0) {
      Vec w_avg = w_sum / static_cast<double>(averaged);
      double b_avg = b_sum / static_cast<double>(averaged);
      double obj = svm_objective(X, y, c, w_avg, b_avg, lambda);
      bool converged = std::abs(previous - obj) <= config.tolerance * std::max(obj, 1e-12);
      previous = obj;
      sol.weights = std::move(w_avg);
      sol.bias = b_avg;
      sol.objective = obj;
      if (converged) break;
    }
  }
  return sol;
}

LinearSolution train_linear_svm(const Eigen::MatrixXd& positives, const Eigen::MatrixXd& negatives,
                                const TrainConfig& config) {
  if (positives.rows() == 0 || negatives.rows() == 0) throw TrainingError("svm needs both positive and negative samples");
  if (positives.cols() != negatives.cols()) throw std::invalid_argument("dimension mismatch");
  Eigen::MatrixXd X(positives.rows() + negatives.rows(), positives.cols());
  X << positives, negatives;
  std::vector<double> y(static_cast<std::size_t>(X.rows()), -1.0);
  std::fill(y.begin(), y.begin() + positives.rows(), 1.0);
  return train_linear_svm(X, y, config, config.seed);
}

std::size_t TreeModel::classifier_count() const {
  std::size_t n = 0;
  for (const auto& e : edges) n += e.size();
  return n;
}

NodeSamples node_samples(const VisualTree& tree, int node, const FeatureDataset& dataset, const TrainConfig& config) {
  const auto& v = tree.node(node);
  NodeSamples out;
  for (std::size_t ci = 0; ci < v.children.size(); ++ci) {
    for (int cat : tree.node(v.children[ci]).categories) {
      auto rows = dataset.rows_of(cat);
      std::vector<std::size_t> picked(rows.begin(), rows.end());
      if (node == tree.root && config.root_subsample > 0 &&
          picked.size() > static_cast<std::size_t>(config.root_subsample)) {
        Rng rng(derive_seed(config.seed, "root-subsample", static_cast<std::uint64_t>(cat)));
        std::shuffle(picked.begin(), picked.end(), rng);
        picked.resize(static_cast<std::size_t>(config.root_subsample));
        std::sort(picked.begin(), picked.end());
      }
      for (auto r : picked) {
        out.rows.push_back(r);
        out.child_of_row.push_back(static_cast<int>(ci));
      }
    }
  }
  return out;
}

namespace {

std::vector<EdgeClassifier> train_node(const VisualTree& tree, int node, const FeatureDataset& dataset,
                                       const TrainConfig& config) {
  const auto& v = tree.node(node);
  if (v.is_leaf()) return {};
  for (int cid : v.children) {
    std::size_t count = 0;
    for (int cat : tree.node(cid).categories)
      if (cat >= 0 && static_cast<std::size_t>(cat) < dataset.n_categories()) count += dataset.rows_of(cat).size();
    if (count == 0)
      throw TrainingError("node " + std::to_string(cid) + " (child of node " + std::to_string(node) +
                          ") has no training samples");
  }
  auto samples = node_samples(tree, node, dataset, config);
  Eigen::MatrixXd X(static_cast<Eigen::Index>(samples.rows.size()), static_cast<Eigen::Index>(dataset.dim()));
  for (std::size_t i = 0; i < samples.rows.size(); ++i)
    X.row(static_cast<Eigen::Index>(i)) = dataset.features().row(static_cast<Eigen::Index>(samples.rows[i])).cast<double>();

  std::vector<EdgeClassifier> out;
  std::vector<double> y(samples.rows.size());
  for (std::size_t ci = 0; ci < v.children.size(); ++ci) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = samples.child_of_row[i] == static_cast<int>(ci) ? 1.0 : -1.0;
    auto sol = train_linear_svm(X, y, config,
                                derive_seed(config.seed, "edge", static_cast<std::uint64_t>(node), ci));
    EdgeClassifier e;
    e.weights = sol.weights.cast<float>();
    e.bias = static_cast<float>(config.use_bias ? sol.bias : 0.0);
    e.node = node;
    e.child_index = static_cast<int>(ci);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

TreeModel train_tree_model(const VisualTree& tree, const FeatureDataset& dataset, const TrainConfig& config) {
  config.validate();
  if (static_cast<std::size_t>(tree.n_categories) != dataset.n_categories())
    throw TrainingError("tree covers " + std::to_string(tree.n_categories) + " categories but the dataset has " +
                        std::to_string(dataset.n_categories()));
  TreeModel model;
  model.tree = tree;
  model.edges.resize(tree.nodes.size());

  const int n_nodes = static_cast<int>(tree.nodes.size());
  const int workers = std::clamp(config.threads, 1, std::max(n_nodes, 1));
  if (workers == 1) {
    for (int v = 0; v < n_nodes; ++v) model.edges[static_cast<std::size_t>(v)] = train_node(tree, v, dataset, config);
    return model;
  }
  // Nodes are strided across workers; each writes only its own slots.
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int v = w; v < n_nodes; v += workers) model.edges[static_cast<std::size_t>(v)] = train_node(tree, v, dataset, config);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return model;
}

}  // namespace vtree
