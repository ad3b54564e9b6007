#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "vtree/dataset.hpp"

namespace vtree {

/// Root-mean-square distance over all cross pairs of two sample sets (one
/// sample per row). O(N_i * N_j * D); kept as the reference for
/// distance_fast.
double distance_naive(const Eigen::MatrixXd& rows_i, const Eigen::MatrixXd& rows_j);

/// Same quantity from precomputed stats: sqrt(|Q_i - Q_j|^2 + s_i^2 + s_j^2).
double distance_fast(const CategoryStats& a, const CategoryStats& b);

struct AffinityMatrix {
  Eigen::MatrixXd values;      // A_ij = exp(-dis_ij / delta_ij), unit diagonal
  Eigen::MatrixXd bandwidths;  // delta_ij = sqrt(delta_i * delta_j)
  Eigen::MatrixXd distances;   // dis(C_i, C_j); diagonal is sqrt(2) * sigma_i

  std::size_t size() const { return static_cast<std::size_t>(values.rows()); }

  /// Values restricted to the given category ids (rows and columns).
  Eigen::MatrixXd restrict(std::span<const int> ids) const;
};

constexpr int kDefaultTuningK = 7;

/// Self-tuned affinity. delta_i is the distance from category i to its
/// tuning_k-th nearest other category. When that is zero, or tuning_k >= N,
/// delta_i falls back to the median positive pairwise distance; when every
/// pairwise distance is zero all off-diagonal entries are 1.
AffinityMatrix build_affinity(std::span<const CategoryStats> stats, int tuning_k = kDefaultTuningK);

}  // namespace vtree
