#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vtree/svm.hpp"

namespace vtree {

/// Container for one or more trained trees sharing a feature dimension and a
/// category id map. Serialized layout (little-endian):
///
///   "HVTM" u8 version(=1)
///   u32 D, u32 N, u32 n_trees
///   N x u32 original category id (indexed by dense id)
///   config echo: f64 lambda, u32 epochs, u32 root_subsample, u64 seed,
///                f64 tolerance, u8 use_bias, u8 balance_classes,
///                u32 tuning_k, u8 l2_normalize
///   per tree:
///     u32 K, u32 L, u32 node_count
///     per node (id order): u32 depth, u32 parent (0xFFFFFFFF = none),
///                          u32 n_categories, ids..., u32 n_children, ids...
///     per node, per child edge: D x f32 weights, f32 bias
///     u32 fold_size, fold_size x u32 training row indices
struct Model {
  std::uint32_t dim = 0;
  std::vector<std::uint32_t> category_ids;  // original id of each dense category
  TrainConfig config;
  int tuning_k = 7;
  bool l2_normalize = false;
  std::vector<TreeModel> trees;

  std::size_t n_categories() const { return category_ids.size(); }
};

constexpr std::uint8_t kModelVersion = 1;

std::string encode_model(const Model& model);
/// Throws FormatError on a malformed or truncated container.
Model decode_model(const std::string& bytes);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace vtree
