#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace vtree {

struct Partition {
  std::vector<int> assignment;  // group id per input item
  int n_groups = 0;

  /// Members of each group, ascending item index.
  std::vector<std::vector<int>> groups() const;
};

/// Full eigendecomposition of L_sym = I - D^{-1/2} A D^{-1/2}, eigenvalues
/// ascending. Throws std::invalid_argument for a non-symmetric or negative
/// affinity and std::runtime_error if the eigensolver does not converge.
struct LaplacianSpectrum {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;  // column j pairs with eigenvalues[j]
  Eigen::MatrixXd laplacian;
};
LaplacianSpectrum normalized_laplacian_spectrum(const Eigen::MatrixXd& affinity);

/// Eigenvectors of the k smallest L_sym eigenvalues, one row per item, each
/// row scaled to unit length (all-zero rows stay zero).
Eigen::MatrixXd laplacian_embed(const Eigen::MatrixXd& affinity, int k);

struct KMeansResult {
  Partition partition;
  Eigen::MatrixXd centroids;
  double inertia = 0.0;  // within-cluster sum of squares
  int iterations = 0;
};

constexpr int kKMeansMaxIters = 300;
constexpr int kKMeansRestarts = 10;

/// Lloyd iteration from k-means++ seeding, repeated for `restarts` derived
/// seedings; the lowest inertia wins (earliest run on ties). Ties in nearest-centroid go to
/// the lower group id; an empty group takes the point farthest from its own
/// centroid. Throws std::invalid_argument when K > n or K < 1.
KMeansResult kmeans(const Eigen::MatrixXd& points, int K, std::uint64_t seed, int max_iters = kKMeansMaxIters,
                    int restarts = kKMeansRestarts);

/// Spectral clustering of a category affinity into at most K groups. Group
/// ids are numbered by first appearance. For n >= 2 the result always has at
/// least two groups: a single-group outcome retries kmeans with derived
/// seeds, then clusters `fallback_points` (one row per item, may be empty),
/// then deals items round-robin.
Partition spectral_partition(const Eigen::MatrixXd& affinity, int K, std::uint64_t seed,
                             const Eigen::MatrixXd& fallback_points = {});

/// Caps group sizes at `cap` while keeping at most K groups. Repeatedly takes
/// the largest oversize group, moves its member with the lowest mean
/// affinity to its own group into the open group it has the highest mean
/// affinity to (opening a new group while fewer than K exist). Requires
/// n <= K * cap. Result is canonicalized.
Partition enforce_capacity(const Eigen::MatrixXd& affinity, const Partition& partition, int K, int cap);

/// Renumbers group ids by order of first appearance.
Partition canonicalize(const std::vector<int>& assignment);

}  // namespace vtree
