#include "vtree/metric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace vtree {

double distance_naive(const Eigen::MatrixXd& rows_i, const Eigen::MatrixXd& rows_j) {
  if (rows_i.rows() == 0 || rows_j.rows() == 0) throw std::invalid_argument("distance of empty category");
  if (rows_i.cols() != rows_j.cols()) throw std::invalid_argument("dimension mismatch");
  double total = 0.0;
  for (Eigen::Index s = 0; s < rows_i.rows(); ++s)
    for (Eigen::Index t = 0; t < rows_j.rows(); ++t) total += (rows_i.row(s) - rows_j.row(t)).squaredNorm();
  return std::sqrt(total / (static_cast<double>(rows_i.rows()) * static_cast<double>(rows_j.rows())));
}

double distance_fast(const CategoryStats& a, const CategoryStats& b) {
  if (a.mean.size() != b.mean.size()) throw std::invalid_argument("dimension mismatch");
  // Variances summed first so the result is exactly symmetric in (a, b).
  return std::sqrt((a.mean - b.mean).squaredNorm() + (a.variance_sq + b.variance_sq));
}

Eigen::MatrixXd AffinityMatrix::restrict(std::span<const int> ids) const {
  const auto n = static_cast<Eigen::Index>(ids.size());
  Eigen::MatrixXd sub(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) sub(a, b) = values(ids[static_cast<std::size_t>(a)], ids[static_cast<std::size_t>(b)]);
  return sub;
}

namespace {

double median_positive(const Eigen::MatrixXd& dist) {
  std::vector<double> vals;
  for (Eigen::Index i = 0; i < dist.rows(); ++i)
    for (Eigen::Index j = i + 1; j < dist.cols(); ++j)
      if (dist(i, j) > 0) vals.push_back(dist(i, j));
  if (vals.empty()) return 0.0;
  auto mid = vals.begin() + static_cast<std::ptrdiff_t>(vals.size() / 2);
  std::nth_element(vals.begin(), mid, vals.end());
  if (vals.size() % 2 == 1) return *mid;
  double hi = *mid;
  double lo = *std::max_element(vals.begin(), mid);
  return 0.5 * (lo + hi);
}

}  // namespace

AffinityMatrix build_affinity(std::span<const CategoryStats> stats, int tuning_k) {
  const auto n = static_cast<Eigen::Index>(stats.size());
  if (n < 2) throw std::invalid_argument("affinity needs at least two categories");
  if (tuning_k < 1) throw std::invalid_argument("tuning_k must be >= 1");

  AffinityMatrix aff;
  aff.distances.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j)
      aff.distances(i, j) = aff.distances(j, i) = distance_fast(stats[static_cast<std::size_t>(i)], stats[static_cast<std::size_t>(j)]);

  const double fallback = median_positive(aff.distances);
  std::vector<double> local(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    double d = 0.0;
    if (tuning_k < n) {
      std::vector<double> others;
      others.reserve(static_cast<std::size_t>(n - 1));
      for (Eigen::Index j = 0; j < n; ++j)
        if (j != i) others.push_back(aff.distances(i, j));
      auto kth = others.begin() + (tuning_k - 1);
      std::nth_element(others.begin(), kth, others.end());
      d = *kth;
    }
    local[static_cast<std::size_t>(i)] = d > 0 ? d : fallback;
  }

  aff.values.setOnes(n, n);
  aff.bandwidths.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double bw = std::sqrt(local[static_cast<std::size_t>(i)] * local[static_cast<std::size_t>(j)]);
      // All-zero distances leave no scale; keep a positive placeholder.
      aff.bandwidths(i, j) = bw > 0 ? bw : 1.0;
      // Clamped so distant pairs stay strictly positive instead of underflowing.
      if (i != j && fallback > 0)
        aff.values(i, j) = std::max(std::exp(-aff.distances(i, j) / aff.bandwidths(i, j)),
                                    std::numeric_limits<double>::min());
    }
  }
  return aff;
}

}  // namespace vtree
