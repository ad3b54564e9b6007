#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace vtree {

/// Feature storage is single precision to match the on-disk format; all
/// statistics and training arithmetic is carried out in double.
using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

/// Labeled feature vectors grouped by category. Labels are dense ids in
/// [0, N); `original_ids[c]` is the external id that dense id `c` came from.
class FeatureDataset {
 public:
  FeatureDataset() = default;

  /// Builds a dataset from raw external labels. External ids are remapped to
  /// 0..N-1 in increasing order of external id. Throws std::invalid_argument
  /// when sizes disagree or a value is not finite.
  static FeatureDataset from_external(FeatureMatrix features,
                                      std::span<const std::uint32_t> external_labels);

  std::size_t size() const { return labels_.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(features_.cols()); }
  std::size_t n_categories() const { return index_.size(); }

  const FeatureMatrix& features() const { return features_; }
  std::span<const int> labels() const { return labels_; }
  int label(std::size_t row) const { return labels_[row]; }
  Vec row(std::size_t r) const { return features_.row(static_cast<Eigen::Index>(r)).cast<double>().transpose(); }

  /// Row indices of every sample of category `c`, ascending.
  std::span<const std::size_t> rows_of(int c) const { return index_[static_cast<std::size_t>(c)]; }
  std::span<const std::uint32_t> original_ids() const { return original_ids_; }
  std::uint32_t original_id(int c) const { return original_ids_[static_cast<std::size_t>(c)]; }

  /// Subset of rows (in the given order). Dense ids and the id map are kept
  /// as-is, so every category must still be represented.
  FeatureDataset subset(std::span<const std::size_t> rows) const;

  /// Copy with every row scaled to unit Euclidean norm (zero rows untouched).
  FeatureDataset l2_normalized() const;

  /// Original ids per row, in row order.
  std::vector<std::uint32_t> external_labels() const;

 private:
  FeatureMatrix features_;
  std::vector<int> labels_;
  std::vector<std::vector<std::size_t>> index_;
  std::vector<std::uint32_t> original_ids_;
};

struct CategoryStats {
  Vec mean;
  double variance_sq = 0.0;  // (1/N_i) sum ||x - mean||^2
  std::size_t count = 0;
};

/// Per-category mean and population variance, indexed by dense category id.
std::vector<CategoryStats> compute_stats(const FeatureDataset& dataset);

/// Stats of an arbitrary set of rows (one category's samples).
CategoryStats stats_of_rows(const Eigen::MatrixXd& rows);

enum class FileFormat { Csv, Binary };

FileFormat parse_format(const std::string& name);

/// Loads a dataset. Throws IoError when the file cannot be opened and
/// FormatError (carrying the 1-based record number) on malformed content.
FeatureDataset load_dataset(const std::filesystem::path& path, FileFormat format);

void save_dataset(const FeatureDataset& dataset, const std::filesystem::path& path, FileFormat format);

/// Binary layout: "HVTF", version 0x01, u32 m, u32 D, then m records of
/// (u32 label, D float32), all little-endian. Labels written are original ids.
std::string encode_binary(const FeatureDataset& dataset);
FeatureDataset decode_binary(const std::string& bytes);

struct SynthConfig {
  int n_categories = 64;
  int samples_per_category = 120;
  int dim = 32;
  int hierarchy_branching = 8;
  double noise_scale = 0.5;
  std::uint64_t seed = 0;
  /// Per-level scale of the planted center offsets. Coordinates of a level-l
  /// offset have standard deviation level_decay^l / sqrt(dim), and noise
  /// coordinates noise_scale / sqrt(dim), so feature vectors are unit scale.
  double level_decay = 0.45;

  void validate() const;
};

/// Gaussian categories whose means hang off a planted tree of super-cluster
/// centers with `hierarchy_branching` fan-out. Category c sits under the
/// leaf addressed by the base-b digits of c. Rows are grouped by category.
FeatureDataset generate_synthetic(const SynthConfig& config);

/// Per-class disjoint train/test row split. Each category contributes up to
/// `train_per_class` rows to train and up to `test_per_class` of the rest to
/// test (0 means "all remaining").
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};
Split split_per_class(const FeatureDataset& dataset, int train_per_class, int test_per_class,
                      std::uint64_t seed);

}  // namespace vtree
