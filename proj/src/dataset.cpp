#include "vtree/dataset.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "vtree/errors.hpp"
#include "vtree/rng.hpp"

namespace vtree {

FeatureDataset FeatureDataset::from_external(FeatureMatrix features,
                                             std::span<const std::uint32_t> external_labels) {
  if (static_cast<std::size_t>(features.rows()) != external_labels.size())
    throw std::invalid_argument("feature rows and labels differ in count");
  if (!features.allFinite()) throw std::invalid_argument("non-finite feature value");

  std::map<std::uint32_t, int> dense;
  for (auto id : external_labels) dense.emplace(id, 0);
  FeatureDataset d;
  d.original_ids_.reserve(dense.size());
  for (auto& [id, slot] : dense) {
    slot = static_cast<int>(d.original_ids_.size());
    d.original_ids_.push_back(id);
  }
  d.features_ = std::move(features);
  d.labels_.reserve(external_labels.size());
  d.index_.assign(dense.size(), {});
  for (std::size_t r = 0; r < external_labels.size(); ++r) {
    int c = dense.at(external_labels[r]);
    d.labels_.push_back(c);
    d.index_[static_cast<std::size_t>(c)].push_back(r);
  }
  return d;
}

FeatureDataset FeatureDataset::subset(std::span<const std::size_t> rows) const {
  FeatureDataset d;
  d.features_.resize(static_cast<Eigen::Index>(rows.size()), features_.cols());
  d.labels_.reserve(rows.size());
  d.index_.assign(index_.size(), {});
  d.original_ids_ = original_ids_;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= size()) throw std::out_of_range("subset row out of range");
    d.features_.row(static_cast<Eigen::Index>(i)) = features_.row(static_cast<Eigen::Index>(rows[i]));
    int c = labels_[rows[i]];
    d.labels_.push_back(c);
    d.index_[static_cast<std::size_t>(c)].push_back(i);
  }
  for (std::size_t c = 0; c < d.index_.size(); ++c)
    if (d.index_[c].empty())
      throw std::invalid_argument("subset leaves category " + std::to_string(original_ids_[c]) +
                                  " without samples");
  return d;
}

FeatureDataset FeatureDataset::l2_normalized() const {
  FeatureDataset d = *this;
  for (Eigen::Index r = 0; r < d.features_.rows(); ++r) {
    double n = d.features_.row(r).cast<double>().norm();
    if (n > 0) d.features_.row(r) = (d.features_.row(r).cast<double>() / n).cast<float>();
  }
  return d;
}

std::vector<std::uint32_t> FeatureDataset::external_labels() const {
  std::vector<std::uint32_t> out;
  out.reserve(labels_.size());
  for (int c : labels_) out.push_back(original_ids_[static_cast<std::size_t>(c)]);
  return out;
}

CategoryStats stats_of_rows(const Eigen::MatrixXd& rows) {
  if (rows.rows() == 0) throw std::invalid_argument("stats of empty category");
  CategoryStats s;
  s.count = static_cast<std::size_t>(rows.rows());
  s.mean = rows.colwise().mean().transpose();
  // Two-pass form: sum of squared deviations from the finished mean.
  s.variance_sq = (rows.rowwise() - s.mean.transpose()).rowwise().squaredNorm().sum() /
                  static_cast<double>(s.count);
  return s;
}

std::vector<CategoryStats> compute_stats(const FeatureDataset& dataset) {
  std::vector<CategoryStats> out;
  out.reserve(dataset.n_categories());
  const auto D = static_cast<Eigen::Index>(dataset.dim());
  for (std::size_t c = 0; c < dataset.n_categories(); ++c) {
    auto rows = dataset.rows_of(static_cast<int>(c));
    Eigen::MatrixXd block(static_cast<Eigen::Index>(rows.size()), D);
    for (std::size_t i = 0; i < rows.size(); ++i)
      block.row(static_cast<Eigen::Index>(i)) =
          dataset.features().row(static_cast<Eigen::Index>(rows[i])).cast<double>();
    out.push_back(stats_of_rows(block));
  }
  return out;
}

FileFormat parse_format(const std::string& name) {
  if (name == "csv") return FileFormat::Csv;
  if (name == "bin" || name == "binary") return FileFormat::Binary;
  throw std::invalid_argument("unknown format '" + name + "' (expected csv or bin)");
}

namespace {

constexpr char kMagic[4] = {'H', 'V', 'T', 'F'};
constexpr std::uint8_t kVersion = 0x01;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

FeatureDataset parse_csv(std::istream& in) {
  std::vector<std::uint32_t> labels;
  std::vector<float> values;
  std::size_t dim = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view = trim(line);
    if (view.empty()) continue;
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      auto comma = view.find(',', start);
      fields.push_back(trim(view.substr(start, comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() < 2) throw FormatError("expected label followed by at least one feature", lineno);
    if (dim == 0) dim = fields.size() - 1;
    if (fields.size() - 1 != dim)
      throw FormatError("expected " + std::to_string(dim) + " features, found " +
                            std::to_string(fields.size() - 1),
                        lineno);

    std::uint32_t label = 0;
    auto lf = fields[0];
    auto [lp, lec] = std::from_chars(lf.data(), lf.data() + lf.size(), label);
    if (lec != std::errc() || lp != lf.data() + lf.size())
      throw FormatError("label '" + std::string(lf) + "' is not a nonnegative integer", lineno);
    labels.push_back(label);

    for (std::size_t f = 1; f < fields.size(); ++f) {
      auto field = fields[f];
      double v = 0;
      auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || p != field.data() + field.size())
        throw FormatError("field " + std::to_string(f) + " '" + std::string(field) + "' is not a number",
                          lineno);
      float fv = static_cast<float>(v);
      if (!std::isfinite(v) || !std::isfinite(fv))
        throw FormatError("field " + std::to_string(f) + " is not finite", lineno);
      values.push_back(fv);
    }
  }
  if (labels.empty()) throw FormatError("empty dataset file");
  FeatureMatrix features = Eigen::Map<FeatureMatrix>(values.data(), static_cast<Eigen::Index>(labels.size()),
                                                     static_cast<Eigen::Index>(dim));
  return FeatureDataset::from_external(std::move(features), labels);
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const std::string& in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

}  // namespace

std::string encode_binary(const FeatureDataset& dataset) {
  std::string out(kMagic, 4);
  out.push_back(static_cast<char>(kVersion));
  put_u32(out, static_cast<std::uint32_t>(dataset.size()));
  put_u32(out, static_cast<std::uint32_t>(dataset.dim()));
  out.reserve(out.size() + dataset.size() * (4 + 4 * dataset.dim()));
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    put_u32(out, dataset.original_id(dataset.label(r)));
    for (std::size_t f = 0; f < dataset.dim(); ++f)
      put_u32(out, std::bit_cast<std::uint32_t>(
                       dataset.features()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f))));
  }
  return out;
}

FeatureDataset decode_binary(const std::string& bytes) {
  if (bytes.empty()) throw FormatError("empty dataset file");
  if (bytes.size() < 13 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError("missing HVTF header");
  if (static_cast<std::uint8_t>(bytes[4]) != kVersion)
    throw FormatError("unsupported dataset version " + std::to_string(static_cast<unsigned char>(bytes[4])));
  const std::uint32_t m = get_u32(bytes, 5);
  const std::uint32_t dim = get_u32(bytes, 9);
  if (m == 0) throw FormatError("dataset holds no records");
  if (dim == 0) throw FormatError("dataset dimension is zero");
  const std::size_t record = 4 + 4 * static_cast<std::size_t>(dim);
  std::size_t pos = 13;
  FeatureMatrix features(m, dim);
  std::vector<std::uint32_t> labels(m);
  for (std::uint32_t r = 0; r < m; ++r) {
    if (pos + record > bytes.size()) throw FormatError("truncated record", r + 1);
    labels[r] = get_u32(bytes, pos);
    pos += 4;
    for (std::uint32_t f = 0; f < dim; ++f, pos += 4) {
      float v = std::bit_cast<float>(get_u32(bytes, pos));
      if (!std::isfinite(v)) throw FormatError("feature " + std::to_string(f) + " is not finite", r + 1);
      features(r, f) = v;
    }
  }
  if (pos != bytes.size()) throw FormatError("trailing bytes after last record");
  return FeatureDataset::from_external(std::move(features), labels);
}

FeatureDataset load_dataset(const std::filesystem::path& path, FileFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  if (format == FileFormat::Csv) return parse_csv(in);
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_binary(buf.str());
}

void save_dataset(const FeatureDataset& dataset, const std::filesystem::path& path, FileFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  if (format == FileFormat::Binary) {
    auto bytes = encode_binary(dataset);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  } else {
    char buf[64];
    for (std::size_t r = 0; r < dataset.size(); ++r) {
      out << dataset.original_id(dataset.label(r));
      for (std::size_t f = 0; f < dataset.dim(); ++f) {
        float v = dataset.features()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f));
        auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
        out << ',' << std::string_view(buf, static_cast<std::size_t>(p - buf));
      }
      out << '\n';
    }
  }
  if (!out) throw IoError("write failed for " + path.string());
}

void SynthConfig::validate() const {
  if (n_categories < 1 || samples_per_category < 1 || dim < 1 || hierarchy_branching < 1)
    throw std::invalid_argument("synthetic config counts must be >= 1");
  if (!(noise_scale > 0)) throw std::invalid_argument("noise_scale must be > 0");
  if (!(level_decay > 0)) throw std::invalid_argument("level_decay must be > 0");
}

FeatureDataset generate_synthetic(const SynthConfig& config) {
  config.validate();
  const int n = config.n_categories;
  const int b = std::max(config.hierarchy_branching, 2);
  int levels = 1;
  for (long long span = b; span < n; span *= b) ++levels;

  Rng rng(derive_seed(config.seed, "synth"));
  std::normal_distribution<double> gauss(0.0, 1.0);
  // Per-coordinate sd 1/sqrt(D): a root offset or a noise draw has norm ~1 (times its scale).
  const double unit = 1.0 / std::sqrt(static_cast<double>(config.dim));

  // One offset per planted tree node, addressed by (level, prefix of digits).
  std::map<std::pair<int, long long>, Vec> offsets;
  auto offset_for = [&](int level, long long prefix) -> const Vec& {
    auto key = std::make_pair(level, prefix);
    auto it = offsets.find(key);
    if (it == offsets.end()) {
      Vec v(config.dim);
      double sd = unit * std::pow(config.level_decay, level);
      for (int d = 0; d < config.dim; ++d) v[d] = sd * gauss(rng);
      it = offsets.emplace(key, std::move(v)).first;
    }
    return it->second;
  };

  std::vector<Vec> means;
  means.reserve(static_cast<std::size_t>(n));
  for (int c = 0; c < n; ++c) {
    Vec mean = Vec::Zero(config.dim);
    long long divisor = 1;
    for (int l = 1; l < levels; ++l) divisor *= b;
    for (int l = 0; l < levels; ++l) {
      mean += offset_for(l, c / divisor);
      divisor = std::max<long long>(divisor / b, 1);
    }
    means.push_back(std::move(mean));
  }

  const auto m = static_cast<Eigen::Index>(n) * config.samples_per_category;
  FeatureMatrix features(m, config.dim);
  std::vector<std::uint32_t> labels;
  labels.reserve(static_cast<std::size_t>(m));
  Eigen::Index r = 0;
  for (int c = 0; c < n; ++c) {
    for (int s = 0; s < config.samples_per_category; ++s, ++r) {
      for (int d = 0; d < config.dim; ++d)
        features(r, d) = static_cast<float>(means[static_cast<std::size_t>(c)][d] + unit * config.noise_scale * gauss(rng));
      labels.push_back(static_cast<std::uint32_t>(c));
    }
  }
  return FeatureDataset::from_external(std::move(features), labels);
}

Split split_per_class(const FeatureDataset& dataset, int train_per_class, int test_per_class,
                      std::uint64_t seed) {
  Split split;
  for (std::size_t c = 0; c < dataset.n_categories(); ++c) {
    auto rows = dataset.rows_of(static_cast<int>(c));
    std::vector<std::size_t> order(rows.begin(), rows.end());
    Rng rng(derive_seed(seed, "split", c));
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t n_train = train_per_class > 0 ? std::min<std::size_t>(order.size(), static_cast<std::size_t>(train_per_class))
                                              : order.size();
    std::size_t remaining = order.size() - n_train;
    std::size_t n_test = test_per_class > 0 ? std::min<std::size_t>(remaining, static_cast<std::size_t>(test_per_class))
                                            : remaining;
    split.train.insert(split.train.end(), order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.test.insert(split.test.end(), order.begin() + static_cast<std::ptrdiff_t>(n_train),
                      order.begin() + static_cast<std::ptrdiff_t>(n_train + n_test));
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

}  // namespace vtree
