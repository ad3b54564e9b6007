#include "vtree/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "vtree/errors.hpp"

namespace vtree {

namespace {

constexpr std::uint32_t kNoParent = 0xFFFFFFFFu;

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_++])) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  /// Reads a count and checks that at least count*unit bytes remain.
  std::uint32_t count(std::size_t unit) {
    std::uint32_t n = u32();
    need(static_cast<std::size_t>(n) * unit);
    return n;
  }
  bool done() const { return pos_ == in_.size(); }
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw FormatError("model file truncated at byte " + std::to_string(pos_));
  }

 private:
  const std::string& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_model(const Model& model) {
  Writer w;
  w.raw("HVTM", 4);
  w.u8(kModelVersion);
  w.u32(model.dim);
  w.u32(static_cast<std::uint32_t>(model.category_ids.size()));
  w.u32(static_cast<std::uint32_t>(model.trees.size()));
  for (auto id : model.category_ids) w.u32(id);

  const auto& c = model.config;
  w.f64(c.lambda);
  w.u32(static_cast<std::uint32_t>(c.epochs));
  w.u32(static_cast<std::uint32_t>(c.root_subsample));
  w.u64(c.seed);
  w.f64(c.tolerance);
  w.u8(c.use_bias ? 1 : 0);
  w.u8(c.balance_classes ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(model.tuning_k));
  w.u8(model.l2_normalize ? 1 : 0);

  for (const auto& tm : model.trees) {
    const auto& t = tm.tree;
    w.u32(static_cast<std::uint32_t>(t.branching));
    w.u32(static_cast<std::uint32_t>(t.max_depth));
    w.u32(static_cast<std::uint32_t>(t.nodes.size()));
    for (const auto& v : t.nodes) {
      w.u32(static_cast<std::uint32_t>(v.depth));
      w.u32(v.parent ? static_cast<std::uint32_t>(*v.parent) : kNoParent);
      w.u32(static_cast<std::uint32_t>(v.categories.size()));
      for (int cat : v.categories) w.u32(static_cast<std::uint32_t>(cat));
      w.u32(static_cast<std::uint32_t>(v.children.size()));
      for (int ch : v.children) w.u32(static_cast<std::uint32_t>(ch));
    }
    for (std::size_t v = 0; v < t.nodes.size(); ++v) {
      const auto& edges = tm.edges[v];
      if (edges.size() != t.nodes[v].children.size())
        throw std::invalid_argument("node " + std::to_string(v) + " classifier count does not match its children");
      for (const auto& e : edges) {
        if (static_cast<std::uint32_t>(e.weights.size()) != model.dim)
          throw std::invalid_argument("classifier dimension does not match model dimension");
        for (Eigen::Index d = 0; d < e.weights.size(); ++d) w.f32(e.weights[d]);
        w.f32(e.bias);
      }
    }
    w.u32(static_cast<std::uint32_t>(tm.fold_rows.size()));
    for (auto r : tm.fold_rows) w.u32(r);
  }
  return w.take();
}

Model decode_model(const std::string& bytes) {
  if (bytes.size() < 5 || std::memcmp(bytes.data(), "HVTM", 4) != 0) throw FormatError("missing HVTM header");
  Reader r(bytes);
  for (int i = 0; i < 4; ++i) r.u8();
  if (auto version = r.u8(); version != kModelVersion)
    throw FormatError("unsupported model version " + std::to_string(version));

  Model m;
  m.dim = r.u32();
  const std::uint32_t n = r.u32();
  const std::uint32_t n_trees = r.u32();
  if (m.dim == 0 || n == 0) throw FormatError("model has zero dimension or zero categories");
  r.need(static_cast<std::size_t>(n) * 4);
  m.category_ids.resize(n);
  for (auto& id : m.category_ids) id = r.u32();

  auto& c = m.config;
  c.lambda = r.f64();
  c.epochs = static_cast<int>(r.u32());
  c.root_subsample = static_cast<int>(r.u32());
  c.seed = r.u64();
  c.tolerance = r.f64();
  c.use_bias = r.u8() != 0;
  c.balance_classes = r.u8() != 0;
  m.tuning_k = static_cast<int>(r.u32());
  m.l2_normalize = r.u8() != 0;

  for (std::uint32_t ti = 0; ti < n_trees; ++ti) {
    TreeModel tm;
    auto& t = tm.tree;
    t.branching = static_cast<int>(r.u32());
    t.max_depth = static_cast<int>(r.u32());
    t.n_categories = static_cast<int>(n);
    const std::uint32_t n_nodes = r.count(16);
    t.nodes.resize(n_nodes);
    for (std::uint32_t id = 0; id < n_nodes; ++id) {
      auto& v = t.nodes[id];
      v.id = static_cast<int>(id);
      v.depth = static_cast<int>(r.u32());
      std::uint32_t parent = r.u32();
      if (parent != kNoParent) {
        if (parent >= n_nodes) throw FormatError("node " + std::to_string(id) + " parent out of range");
        v.parent = static_cast<int>(parent);
      }
      std::uint32_t n_cat = r.count(4);
      for (std::uint32_t k = 0; k < n_cat; ++k) {
        std::uint32_t cat = r.u32();
        if (cat >= n) throw FormatError("node " + std::to_string(id) + " category out of range");
        v.categories.push_back(static_cast<int>(cat));
      }
      std::uint32_t n_children = r.count(4);
      for (std::uint32_t k = 0; k < n_children; ++k) {
        std::uint32_t ch = r.u32();
        if (ch >= n_nodes) throw FormatError("node " + std::to_string(id) + " child out of range");
        v.children.push_back(static_cast<int>(ch));
      }
    }
    tm.edges.resize(n_nodes);
    for (std::uint32_t id = 0; id < n_nodes; ++id) {
      for (std::size_t ci = 0; ci < t.nodes[id].children.size(); ++ci) {
        EdgeClassifier e;
        e.node = static_cast<int>(id);
        e.child_index = static_cast<int>(ci);
        r.need((static_cast<std::size_t>(m.dim) + 1) * 4);
        e.weights.resize(m.dim);
        for (std::uint32_t d = 0; d < m.dim; ++d) e.weights[d] = r.f32();
        e.bias = r.f32();
        tm.edges[id].push_back(std::move(e));
      }
    }
    const std::uint32_t fold = r.count(4);
    tm.fold_rows.resize(fold);
    for (auto& row : tm.fold_rows) row = r.u32();
    if (auto issues = validate_tree(t); !issues.empty())
      throw FormatError("tree " + std::to_string(ti) + " is invalid: " + issues.front());
    m.trees.push_back(std::move(tm));
  }
  if (!r.done()) throw FormatError("trailing bytes after model");
  return m;
}

void save_model(const Model& model, const std::filesystem::path& path) {
  auto bytes = encode_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_model(buf.str());
}

}  // namespace vtree
