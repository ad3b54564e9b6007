#include <algorithm>
#include <regex>

#include "doctest.h"
#include "vtree/rng.hpp"
#include "vtree/tree.hpp"

using namespace vtree;

namespace {

std::vector<CategoryStats> random_stats(std::uint64_t seed, int n, int dim) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  std::vector<CategoryStats> out(static_cast<std::size_t>(n));
  for (auto& s : out) {
    s.mean = Vec(dim);
    for (int d = 0; d < dim; ++d) s.mean[d] = 3.0 * g(rng);
    s.variance_sq = u(rng);
    s.count = 10;
  }
  return out;
}

VisualTree random_tree(std::uint64_t seed, int n, int K, int L) {
  auto stats = random_stats(seed, n, 6);
  AffinityMatrix a;
  if (n == 1) {
    a.values = a.bandwidths = a.distances = Eigen::MatrixXd::Ones(1, 1);
  } else {
    a = build_affinity(stats);
  }
  return build_tree(a, K, L, seed, stats);
}

int count_matches(const std::string& text, const std::string& pattern) {
  std::regex re(pattern);
  return static_cast<int>(std::distance(std::sregex_iterator(text.begin(), text.end(), re), std::sregex_iterator()));
}

bool mentions(const std::vector<std::string>& issues, const std::string& word) {
  return std::any_of(issues.begin(), issues.end(), [&](const std::string& s) { return s.find(word) != std::string::npos; });
}

}  // namespace

TEST_CASE("small node rule: N=3, K=4, L=2 gives a root with 3 leaves") {
  auto t = random_tree(1, 3, 4, 2);
  REQUIRE(t.nodes.size() == 4);
  CHECK(t.node(0).children.size() == 3);
  for (int c : t.node(0).children) {
    CHECK(t.node(c).is_leaf());
    CHECK(t.node(c).depth == 2);
  }
  CHECK(validate_tree(t).empty());
}

TEST_CASE("T_{32,2} on 1000 categories is two levels of grouping") {
  auto t = random_tree(2, 1000, 32, 2);
  CHECK(validate_tree(t).empty());
  const auto& root = t.node(0);
  CHECK(root.children.size() >= 2);
  CHECK(root.children.size() <= 32);
  for (int g : root.children) {
    const auto& grp = t.node(g);
    if (grp.is_leaf()) continue;
    for (int c : grp.children) CHECK(t.node(c).is_leaf());
  }
  CHECK(t.leaf_count() == 1000);
  CHECK(t.height() <= 3);
}

TEST_CASE("fuzzed builds validate and satisfy the tree properties") {
  Rng rng(404);
  const int Ks[] = {2, 3, 4, 7, 10};
  for (int trial = 0; trial < 100; ++trial) {
    int n = 1 + static_cast<int>(rng() % 80);
    int K = Ks[rng() % 5];
    int L = 1 + static_cast<int>(rng() % 4);
    auto t = random_tree(rng(), n, K, L);
    auto issues = validate_tree(t);
    CHECK_MESSAGE(issues.empty(), "n=" << n << " K=" << K << " L=" << L << ": " << (issues.empty() ? "" : issues[0]));
    CHECK(t.leaf_count() == static_cast<std::size_t>(n));
    CHECK(t.edge_count() == t.nodes.size() - 1);
    CHECK(t.height() <= L + 1);
    for (const auto& v : t.nodes) {
      if (v.is_leaf()) continue;
      bool flat = std::all_of(v.children.begin(), v.children.end(), [&](int c) { return t.node(c).is_leaf(); });
      if (!(flat && v.depth >= L)) CHECK(static_cast<int>(v.children.size()) <= K);
    }
    auto dot = export_dot(t);
    CHECK(count_matches(dot, "->") == static_cast<int>(t.edge_count()));
  }
}

TEST_CASE("with N <= K^L every node has at most K children") {
  Rng rng(405);
  for (int trial = 0; trial < 60; ++trial) {
    int K = 2 + static_cast<int>(rng() % 5);
    int L = 1 + static_cast<int>(rng() % 3);
    int cap = 1;
    for (int i = 0; i < L; ++i) cap *= K;
    int n = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(std::min(cap, 120)));
    auto t = random_tree(rng(), n, K, L);
    CHECK(validate_tree(t).empty());
    for (const auto& v : t.nodes) CHECK(static_cast<int>(v.children.size()) <= K);
  }
}

TEST_CASE("validate_tree catches planted faults") {
  auto t = random_tree(3, 6, 2, 3);
  REQUIRE(validate_tree(t).empty());
  // Find an internal node with two leaf children or fabricate one.
  int v = -1;
  for (const auto& n : t.nodes)
    if (n.children.size() >= 2) {
      v = n.id;
      break;
    }
  REQUIRE(v >= 0);
  const auto& node = t.node(v);
  int a = node.children[0], b = node.children[1];

  SUBCASE("category in two children") {
    auto bad = t;
    auto& cats = bad.nodes[static_cast<std::size_t>(b)].categories;
    cats.push_back(t.node(a).categories.front());
    std::sort(cats.begin(), cats.end());
    CHECK(mentions(validate_tree(bad), "disjoint"));
  }
  SUBCASE("child sets miss a category") {
    auto bad = t;
    auto& cats = bad.nodes[static_cast<std::size_t>(v)].categories;
    cats.push_back(t.n_categories);  // parent claims one more than its children
    bad.n_categories += 1;
    bad.nodes[0].categories.push_back(t.n_categories);
    CHECK(mentions(validate_tree(bad), "coverage"));
  }
  SUBCASE("leaf with two categories") {
    auto bad = t;
    for (auto& n : bad.nodes)
      if (n.is_leaf()) {
        n.categories.push_back(n.categories.front() + 1000);
        break;
      }
    CHECK_FALSE(validate_tree(bad).empty());
  }
}

TEST_CASE("build_tree rejects invalid parameters") {
  auto stats = random_stats(4, 5, 3);
  auto a = build_affinity(stats);
  CHECK_THROWS_AS(build_tree(a, 1, 2, 0), std::invalid_argument);
  CHECK_THROWS_AS(build_tree(a, 2, 0, 0), std::invalid_argument);
}

TEST_CASE("export_dot counts") {
  SUBCASE("single category") {
    auto t = random_tree(5, 1, 4, 2);
    auto dot = export_dot(t);
    CHECK(count_matches(dot, R"(n\d+ \[label=)") == 1);
    CHECK(count_matches(dot, "->") == 0);
  }
  SUBCASE("N=3, K=4") {
    auto t = random_tree(6, 3, 4, 2);
    auto dot = export_dot(t);
    CHECK(dot.rfind("digraph", 0) == 0);
    CHECK(count_matches(dot, R"(n\d+ \[label=)") == 4);
    CHECK(count_matches(dot, "->") == 3);
  }
  SUBCASE("names are escaped") {
    auto t = random_tree(7, 2, 2, 1);
    std::map<int, std::string> names{{0, "say \"hi\""}, {1, "b"}};
    auto dot = export_dot(t, &names);
    CHECK(dot.find(R"(say \"hi\")") != std::string::npos);
  }
}

TEST_CASE("construction is deterministic") {
  auto a = random_tree(8, 60, 4, 3);
  auto b = random_tree(8, 60, 4, 3);
  REQUIRE(a.nodes.size() == b.nodes.size());
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    CHECK(a.nodes[i].categories == b.nodes[i].categories);
    CHECK(a.nodes[i].children == b.nodes[i].children);
  }
  CHECK(export_dot(a) == export_dot(b));
}

TEST_CASE("leaf_of_category inverts the leaves") {
  auto t = random_tree(9, 25, 3, 2);
  auto leaf = t.leaf_of_category();
  REQUIRE(leaf.size() == 25);
  for (int c = 0; c < 25; ++c) CHECK(t.node(leaf[static_cast<std::size_t>(c)]).categories == std::vector<int>{c});
}
