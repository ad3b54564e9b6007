#include <cstring>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "vtree/errors.hpp"
#include "vtree/model.hpp"
#include "vtree/pipeline.hpp"
#include "vtree/rng.hpp"

using namespace vtree;

namespace {

FeatureDataset planted(int n_categories, int per_class, int dim, int branching, double noise, std::uint64_t seed) {
  SynthConfig c;
  c.n_categories = n_categories;
  c.samples_per_category = per_class;
  c.dim = dim;
  c.hierarchy_branching = branching;
  c.noise_scale = noise;
  c.seed = seed;
  return generate_synthetic(c);
}

bool same_bytes(const Eigen::VectorXf& a, const Eigen::VectorXf& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(float) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

TEST_CASE("separable 1-D pair") {
  Eigen::MatrixXd pos(1, 1), neg(1, 1);
  pos << 1.0;
  neg << -1.0;
  TrainConfig cfg;
  cfg.lambda = 0.01;
  cfg.epochs = 200;
  auto s = train_linear_svm(pos, neg, cfg);
  Vec plus(1), minus(1);
  plus << 1.0;
  minus << -1.0;
  CHECK(s.weights.dot(plus) + s.bias > 0);
  CHECK(s.weights.dot(minus) + s.bias < 0);
}

TEST_CASE("identical positive and negative sets stay bounded") {
  Rng rng(2);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(15, 3);
  TrainConfig cfg;
  cfg.epochs = 100;
  auto s = train_linear_svm(x, x, cfg);
  CHECK(s.weights.allFinite());
  CHECK(std::isfinite(s.bias));
  for (Eigen::Index i = 0; i < x.rows(); ++i) CHECK(std::abs(x.row(i).dot(s.weights) + s.bias) <= 1.0 / std::sqrt(cfg.lambda) * 4);
}

TEST_CASE("objective within 1% of a grid-search oracle on 2-D data") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(seed + 10);
    std::normal_distribution<double> g(0.0, 0.6);
    std::vector<std::vector<double>> rows;
    std::vector<double> ys;
    Eigen::MatrixXd X(20, 2);
    for (int i = 0; i < 20; ++i) {
      double y = i < 10 ? 1.0 : -1.0;
      double x0 = y * 1.5 + g(rng), x1 = 0.5 * y + g(rng);
      X(i, 0) = x0;
      X(i, 1) = x1;
      rows.push_back({x0, x1});
      ys.push_back(y);
    }
    TrainConfig cfg;
    cfg.lambda = 0.05;
    cfg.epochs = 4000;
    cfg.tolerance = 1e-9;
    auto s = train_linear_svm(X, ys, cfg, seed);
    double mine = oracle::hinge_objective(rows, ys, {s.weights[0], s.weights[1]}, s.bias, cfg.lambda);
    CHECK(mine == doctest::Approx(s.objective).epsilon(1e-9));
    double best = oracle::grid_min_objective(rows, ys, cfg.lambda, 8.0, 40, 6);
    CHECK(mine <= best * 1.01);
  }
}

TEST_CASE("svm input errors") {
  Eigen::MatrixXd pos(1, 2), empty(0, 2);
  pos << 1, 2;
  CHECK_THROWS_AS(train_linear_svm(pos, empty, TrainConfig{}), TrainingError);
  Eigen::MatrixXd bad = pos;
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(train_linear_svm(bad, pos, TrainConfig{}), TrainingError);
  TrainConfig cfg;
  cfg.lambda = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("one classifier per edge") {
  SUBCASE("two categories") {
    auto ds = planted(2, 20, 4, 2, 0.3, 1);
    auto tree = build_tree_for(ds, 2, 1, 7, 1);
    auto m = train_tree_model(tree, ds, TrainConfig{});
    CHECK(m.classifier_count() == 2);
  }
  SUBCASE("four categories, K=2, L=2") {
    auto ds = planted(4, 20, 8, 2, 0.05, 2);
    auto tree = build_tree_for(ds, 2, 2, 3, 2);
    REQUIRE(tree.node(0).children.size() == 2);
    auto m = train_tree_model(tree, ds, TrainConfig{});
    CHECK(m.classifier_count() == 6);
    CHECK(m.classifier_count() == tree.edge_count());
    for (std::size_t v = 0; v < m.edges.size(); ++v)
      for (std::size_t i = 0; i < m.edges[v].size(); ++i) {
        CHECK(m.edges[v][i].node == static_cast<int>(v));
        CHECK(m.edges[v][i].child_index == static_cast<int>(i));
        CHECK(m.edges[v][i].weights.allFinite());
      }
  }
}

TEST_CASE("edge classifiers separate their child on clean data") {
  auto ds = planted(16, 40, 16, 4, 0.1, 3);
  auto tree = build_tree_for(ds, 4, 2, 7, 3);
  auto m = train_tree_model(tree, ds, TrainConfig{});
  for (std::size_t v = 0; v < tree.nodes.size(); ++v) {
    if (tree.nodes[v].is_leaf()) continue;
    auto samples = node_samples(tree, static_cast<int>(v), ds, TrainConfig{});
    for (std::size_t i = 0; i < m.edges[v].size(); ++i) {
      int correct = 0;
      for (std::size_t r = 0; r < samples.rows.size(); ++r) {
        bool positive = samples.child_of_row[r] == static_cast<int>(i);
        bool said = m.edges[v][i].score(ds.row(samples.rows[r])) > 0;
        correct += positive == said;
      }
      CHECK(correct >= 0.95 * static_cast<double>(samples.rows.size()));
    }
  }
}

TEST_CASE("node samples: root cap and sibling coverage") {
  auto ds = planted(6, 30, 4, 2, 0.2, 4);
  auto tree = build_tree_for(ds, 2, 2, 3, 4);
  TrainConfig cfg;
  cfg.root_subsample = 7;
  auto root = node_samples(tree, 0, ds, cfg);
  std::vector<int> per_cat(6, 0);
  for (auto r : root.rows) ++per_cat[static_cast<std::size_t>(ds.label(r))];
  for (int n : per_cat) CHECK(n == 7);
  std::set<std::size_t> uniq(root.rows.begin(), root.rows.end());
  CHECK(uniq.size() == root.rows.size());

  for (const auto& v : tree.nodes) {
    if (v.is_leaf() || v.id == 0) continue;
    auto s = node_samples(tree, v.id, ds, cfg);
    // Below the root every sample of C(v) is used, each labelled with the child owning its category.
    std::size_t expected = 0;
    for (int c : v.categories) expected += ds.rows_of(c).size();
    CHECK(s.rows.size() == expected);
    for (std::size_t r = 0; r < s.rows.size(); ++r) {
      const auto& child = tree.node(v.children[static_cast<std::size_t>(s.child_of_row[r])]);
      int lab = ds.label(s.rows[r]);
      CHECK(std::find(child.categories.begin(), child.categories.end(), lab) != child.categories.end());
    }
  }
}

TEST_CASE("a child without samples is a training error") {
  auto ds = planted(4, 10, 3, 2, 0.2, 5);
  auto tree = build_tree_for(ds, 2, 2, 3, 5);
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < ds.size(); ++r)
    if (ds.label(r) != 3) keep.push_back(r);
  // Relabel-free view: reuse the tree but hand it a dataset missing category 3.
  FeatureMatrix f(static_cast<Eigen::Index>(keep.size()), ds.dim());
  std::vector<std::uint32_t> labels;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    f.row(static_cast<Eigen::Index>(i)) = ds.features().row(static_cast<Eigen::Index>(keep[i]));
    labels.push_back(static_cast<std::uint32_t>(ds.label(keep[i])));
  }
  auto missing = FeatureDataset::from_external(std::move(f), labels);
  CHECK_THROWS_AS(train_tree_model(tree, missing, TrainConfig{}), TrainingError);
}

TEST_CASE("training is deterministic and thread-count independent") {
  auto ds = planted(12, 25, 8, 3, 0.4, 6);
  auto tree = build_tree_for(ds, 3, 2, 7, 6);
  TrainConfig cfg;
  cfg.seed = 99;
  auto a = train_tree_model(tree, ds, cfg);
  cfg.threads = 4;
  auto b = train_tree_model(tree, ds, cfg);
  for (std::size_t v = 0; v < a.edges.size(); ++v)
    for (std::size_t i = 0; i < a.edges[v].size(); ++i) {
      CHECK(same_bytes(a.edges[v][i].weights, b.edges[v][i].weights));
      CHECK(a.edges[v][i].bias == b.edges[v][i].bias);
    }
}

TEST_CASE("model round trip is bit exact") {
  auto ds = planted(9, 20, 5, 3, 0.3, 7);
  PipelineConfig cfg;
  cfg.branching = 3;
  cfg.depth = 2;
  cfg.n_trees = 3;
  cfg.seed = 11;
  auto m = train_model(ds, cfg);
  REQUIRE(m.trees.size() == 3);
  auto bytes = encode_model(m);
  auto back = decode_model(bytes);
  CHECK(encode_model(back) == bytes);
  CHECK(back.category_ids == m.category_ids);
  CHECK(back.trees[1].fold_rows == m.trees[1].fold_rows);
  for (std::size_t t = 0; t < m.trees.size(); ++t)
    for (std::size_t v = 0; v < m.trees[t].edges.size(); ++v)
      for (std::size_t i = 0; i < m.trees[t].edges[v].size(); ++i)
        CHECK(same_bytes(back.trees[t].edges[v][i].weights, m.trees[t].edges[v][i].weights));

  CHECK_THROWS_AS(decode_model(bytes.substr(0, bytes.size() - 3)), FormatError);
  CHECK_THROWS_AS(decode_model(bytes + "x"), FormatError);
  auto wrong_version = bytes;
  wrong_version[4] = 9;
  CHECK_THROWS_AS(decode_model(wrong_version), FormatError);
}

TEST_CASE("ensemble folds are disjoint and cover the data") {
  auto ds = planted(5, 12, 3, 2, 0.3, 8);
  auto folds = stratified_folds(ds, 3, 1);
  REQUIRE(folds.size() == 3);
  std::vector<int> seen(ds.size(), 0);
  for (const auto& f : folds) {
    std::set<int> cats;
    for (auto r : f) {
      ++seen[r];
      cats.insert(ds.label(r));
    }
    CHECK(cats.size() == 5);
  }
  for (int s : seen) CHECK(s == 1);
}
