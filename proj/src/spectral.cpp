#include "vtree/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "vtree/rng.hpp"

namespace vtree {

std::vector<std::vector<int>> Partition::groups() const {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(n_groups));
  for (std::size_t i = 0; i < assignment.size(); ++i) out[static_cast<std::size_t>(assignment[i])].push_back(static_cast<int>(i));
  return out;
}

Partition canonicalize(const std::vector<int>& assignment) {
  Partition p;
  p.assignment.resize(assignment.size());
  std::vector<int> remap;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    auto g = static_cast<std::size_t>(assignment[i]);
    if (g >= remap.size()) remap.resize(g + 1, -1);
    if (remap[g] < 0) remap[g] = p.n_groups++;
    p.assignment[i] = remap[g];
  }
  return p;
}

LaplacianSpectrum normalized_laplacian_spectrum(const Eigen::MatrixXd& affinity) {
  const auto n = affinity.rows();
  if (n == 0 || affinity.cols() != n) throw std::invalid_argument("affinity must be square and non-empty");
  const double scale = std::max(1.0, affinity.cwiseAbs().maxCoeff());
  if (!affinity.allFinite() || (affinity - affinity.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("affinity is not symmetric");
  if (affinity.minCoeff() < 0) throw std::invalid_argument("affinity has negative entries");

  Eigen::VectorXd inv_sqrt_degree(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double deg = affinity.row(i).sum();
    inv_sqrt_degree[i] = deg > 0 ? 1.0 / std::sqrt(deg) : 0.0;
  }
  LaplacianSpectrum out;
  out.laplacian = -(inv_sqrt_degree.asDiagonal() * affinity * inv_sqrt_degree.asDiagonal());
  out.laplacian.diagonal().array() += 1.0;
  out.laplacian = 0.5 * (out.laplacian + out.laplacian.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(out.laplacian, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigensolver did not converge");
  out.eigenvalues = solver.eigenvalues();
  out.eigenvectors = solver.eigenvectors();
  return out;
}

Eigen::MatrixXd laplacian_embed(const Eigen::MatrixXd& affinity, int k) {
  if (k < 1 || k > affinity.rows()) throw std::invalid_argument("embedding width out of range");
  auto spectrum = normalized_laplacian_spectrum(affinity);
  Eigen::MatrixXd embed = spectrum.eigenvectors.leftCols(k);
  for (Eigen::Index i = 0; i < embed.rows(); ++i) {
    double norm = embed.row(i).norm();
    if (norm > 0) embed.row(i) /= norm;
  }
  return embed;
}

namespace {

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

int nearest(const Eigen::MatrixXd& centroids, const Eigen::RowVectorXd& p) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index g = 0; g < centroids.rows(); ++g) {
    double d = (centroids.row(g) - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(g);
    }
  }
  return best;
}

Eigen::MatrixXd plus_plus_seeds(const Eigen::MatrixXd& points, int K, Rng& rng) {
  const auto n = points.rows();
  Eigen::MatrixXd centroids(K, points.cols());
  std::vector<bool> chosen(static_cast<std::size_t>(n), false);
  auto first = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n));
  centroids.row(0) = points.row(first);
  chosen[static_cast<std::size_t>(first)] = true;

  Eigen::VectorXd d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = (points.row(i) - centroids.row(0)).squaredNorm();
  for (int c = 1; c < K; ++c) {
    double total = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!chosen[static_cast<std::size_t>(i)]) total += d2[i];
    Eigen::Index pick = -1;
    if (total > 0) {
      double u = uniform01(rng) * total;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (chosen[static_cast<std::size_t>(i)] || d2[i] <= 0) continue;
        pick = i;
        u -= d2[i];
        if (u < 0) break;
      }
    } else {
      // Every remaining point coincides with a centre: take the first unused.
      for (Eigen::Index i = 0; i < n && pick < 0; ++i)
        if (!chosen[static_cast<std::size_t>(i)]) pick = i;
    }
    chosen[static_cast<std::size_t>(pick)] = true;
    centroids.row(c) = points.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) d2[i] = std::min(d2[i], (points.row(i) - centroids.row(c)).squaredNorm());
  }
  return centroids;
}

void recompute_centroids(const Eigen::MatrixXd& points, const std::vector<int>& assign, Eigen::MatrixXd& centroids,
                         std::vector<int>& sizes) {
  const auto K = centroids.rows();
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(K, points.cols());
  sizes.assign(static_cast<std::size_t>(K), 0);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    sums.row(assign[static_cast<std::size_t>(i)]) += points.row(i);
    ++sizes[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
  }
  for (Eigen::Index g = 0; g < K; ++g)
    if (sizes[static_cast<std::size_t>(g)] > 0) centroids.row(g) = sums.row(g) / sizes[static_cast<std::size_t>(g)];
}

// Moves, for each empty group in id order, the point farthest from its own
// centroid (taken from a group with more than one member).
void repair_empty(const Eigen::MatrixXd& points, std::vector<int>& assign, Eigen::MatrixXd& centroids,
                  std::vector<int>& sizes) {
  for (Eigen::Index g = 0; g < centroids.rows(); ++g) {
    if (sizes[static_cast<std::size_t>(g)] > 0) continue;
    Eigen::Index far = -1;
    double far_d = -1;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      int own = assign[static_cast<std::size_t>(i)];
      if (sizes[static_cast<std::size_t>(own)] < 2) continue;
      double d = (points.row(i) - centroids.row(own)).squaredNorm();
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    if (far < 0) return;
    assign[static_cast<std::size_t>(far)] = static_cast<int>(g);
    recompute_centroids(points, assign, centroids, sizes);
  }
}

}  // namespace

namespace {

KMeansResult lloyd(const Eigen::MatrixXd& points, int K, Rng& rng, int max_iters) {
  const auto n = points.rows();
  KMeansResult res;
  res.centroids = plus_plus_seeds(points, K, rng);
  std::vector<int> assign(static_cast<std::size_t>(n), -1);
  std::vector<int> sizes;
  for (res.iterations = 0; res.iterations < max_iters; ++res.iterations) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int g = nearest(res.centroids, points.row(i));
      if (g != assign[static_cast<std::size_t>(i)]) {
        assign[static_cast<std::size_t>(i)] = g;
        changed = true;
      }
    }
    if (!changed) break;
    recompute_centroids(points, assign, res.centroids, sizes);
    repair_empty(points, assign, res.centroids, sizes);
  }

  res.inertia = 0;
  for (Eigen::Index i = 0; i < n; ++i) res.inertia += (points.row(i) - res.centroids.row(assign[static_cast<std::size_t>(i)])).squaredNorm();
  res.partition.assignment = std::move(assign);
  res.partition.n_groups = K;
  return res;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, int K, std::uint64_t seed, int max_iters, int restarts) {
  if (K < 1) throw std::invalid_argument("kmeans needs K >= 1");
  if (K > points.rows()) throw std::invalid_argument("kmeans: K exceeds the number of points");
  if (restarts < 1) throw std::invalid_argument("kmeans needs at least one run");

  KMeansResult best;
  for (int r = 0; r < restarts; ++r) {
    Rng rng(derive_seed(seed, "kmeans++", static_cast<std::uint64_t>(r)));
    auto res = lloyd(points, K, rng, max_iters);
    if (r == 0 || res.inertia < best.inertia) best = std::move(res);
  }
  return best;
}

Partition spectral_partition(const Eigen::MatrixXd& affinity, int K, std::uint64_t seed,
                             const Eigen::MatrixXd& fallback_points) {
  const auto n = static_cast<int>(affinity.rows());
  if (n < 2) throw std::invalid_argument("spectral_partition needs at least two items");
  if (K < 2) throw std::invalid_argument("spectral_partition needs K >= 2");
  const int k = std::min(K, n);

  Eigen::MatrixXd embed = laplacian_embed(affinity, k);
  Partition p = canonicalize(kmeans(embed, k, seed).partition.assignment);
  for (std::uint64_t retry = 1; p.n_groups < 2 && retry <= 3; ++retry)
    p = canonicalize(kmeans(embed, k, derive_seed(seed, "partition-retry", retry)).partition.assignment);
  if (p.n_groups < 2 && fallback_points.rows() == n)
    p = canonicalize(kmeans(fallback_points, k, derive_seed(seed, "partition-means")).partition.assignment);
  if (p.n_groups < 2) {
    std::vector<int> rr(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) rr[static_cast<std::size_t>(i)] = i % k;
    p = canonicalize(rr);
  }
  return p;
}

Partition enforce_capacity(const Eigen::MatrixXd& affinity, const Partition& partition, int K, int cap) {
  const auto n = static_cast<int>(partition.assignment.size());
  if (cap < 1 || static_cast<long long>(K) * cap < n) throw std::invalid_argument("group capacity is infeasible");
  std::vector<int> assign = partition.assignment;
  int n_groups = partition.n_groups;
  std::vector<int> sizes(static_cast<std::size_t>(std::max(n_groups, K)), 0);
  for (int g : assign) ++sizes[static_cast<std::size_t>(g)];

  auto mean_affinity = [&](int i, int g, bool exclude_self) {
    double sum = 0;
    int cnt = 0;
    for (int j = 0; j < n; ++j) {
      if (assign[static_cast<std::size_t>(j)] != g || (exclude_self && j == i)) continue;
      sum += affinity(i, j);
      ++cnt;
    }
    return cnt > 0 ? sum / cnt : 0.0;
  };

  while (true) {
    int src = -1;
    for (int g = 0; g < n_groups; ++g)
      if (sizes[static_cast<std::size_t>(g)] > cap && (src < 0 || sizes[static_cast<std::size_t>(g)] > sizes[static_cast<std::size_t>(src)]))
        src = g;
    if (src < 0) break;

    int mover = -1;
    double weakest = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (assign[static_cast<std::size_t>(i)] != src) continue;
      double c = mean_affinity(i, src, true);
      if (c < weakest) {
        weakest = c;
        mover = i;
      }
    }
    int dst = -1;
    double pull = -1;
    for (int g = 0; g < n_groups; ++g) {
      if (g == src || sizes[static_cast<std::size_t>(g)] >= cap) continue;
      double a = mean_affinity(mover, g, false);
      if (a > pull) {
        pull = a;
        dst = g;
      }
    }
    if (dst < 0) dst = n_groups++;  // feasibility guarantees n_groups < K here
    assign[static_cast<std::size_t>(mover)] = dst;
    --sizes[static_cast<std::size_t>(src)];
    ++sizes[static_cast<std::size_t>(dst)];
  }
  return canonicalize(assign);
}

}  // namespace vtree
