#include "kgalign/feature_builder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <unordered_map>

namespace kgalign {

Matrix SparseNormalizedAdjacency::to_dense() const {
  Matrix dense = Matrix::Zero(n, n);
  for (std::int32_t i = 0; i < n; ++i) {
    for (auto k = row_offsets[i]; k < row_offsets[i + 1]; ++k) dense(i, columns[k]) = values[k];
  }
  return dense;
}

Matrix SparseNormalizedAdjacency::multiply(const Matrix& in) const {
  require(in.rows() == n, "adjacency multiply: row count mismatch");
  Matrix out = Matrix::Zero(n, in.cols());
  for (std::int32_t i = 0; i < n; ++i) {
    auto row = out.row(i);
    for (auto k = row_offsets[i]; k < row_offsets[i + 1]; ++k) row.noalias() += values[k] * in.row(columns[k]);
  }
  return out;
}

SparseNormalizedAdjacency build_adjacency(const Graph& graph) {
  const auto n = static_cast<std::int32_t>(graph.entity_count());
  require(n >= 1, "build_adjacency: graph has no entities");

  std::vector<std::set<std::int32_t>> neighbours(static_cast<std::size_t>(n));
  for (std::int32_t i = 0; i < n; ++i) neighbours[i].insert(i);
  for (const auto& t : graph.triples) {
    neighbours[t.head.value].insert(t.tail.value);
    neighbours[t.tail.value].insert(t.head.value);
  }

  std::vector<double> inv_sqrt_degree(static_cast<std::size_t>(n));
  for (std::int32_t i = 0; i < n; ++i) {
    inv_sqrt_degree[i] = 1.0 / std::sqrt(static_cast<double>(neighbours[i].size()));
  }

  SparseNormalizedAdjacency adj;
  adj.n = n;
  adj.row_offsets.reserve(static_cast<std::size_t>(n) + 1);
  adj.row_offsets.push_back(0);
  for (std::int32_t i = 0; i < n; ++i) {
    for (const auto j : neighbours[i]) {
      adj.columns.push_back(j);
      adj.values.push_back(inv_sqrt_degree[i] * inv_sqrt_degree[j]);
    }
    adj.row_offsets.push_back(static_cast<std::int32_t>(adj.columns.size()));
  }
  return adj;
}

void dump_adjacency(std::ostream& out, const SparseNormalizedAdjacency& adj) {
  for (std::int32_t i = 0; i < adj.n; ++i) {
    for (auto k = adj.row_offsets[i]; k < adj.row_offsets[i + 1]; ++k) {
      out << i << ' ' << adj.columns[k] << ' ' << adj.values[k] << '\n';
    }
  }
}

namespace {

// Counts occurrences of names across graphs and keeps the `limit` most
// frequent; ties go to the name seen first.
class FrequencyTable {
 public:
  void add(const std::string& name, std::size_t count = 1) {
    auto [it, inserted] = order_.try_emplace(name, names_.size());
    if (inserted) {
      names_.push_back(name);
      counts_.push_back(0);
    }
    counts_[it->second] += count;
  }

  AspectColumns top(std::size_t limit) const {
    std::vector<std::size_t> idx(names_.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return counts_[a] > counts_[b]; });
    if (idx.size() > limit) idx.resize(limit);
    AspectColumns cols;
    for (const auto i : idx) cols.names.push_back(names_[i]);
    return cols;
  }

 private:
  std::unordered_map<std::string, std::size_t> order_;
  std::vector<std::string> names_;
  std::vector<std::size_t> counts_;
};

void count_relations(FrequencyTable& table, const Graph& g) {
  // Interning order first so unused or rare names keep their position.
  for (const auto& name : g.relations.labels()) table.add(name, 0);
  for (const auto& t : g.triples) table.add(g.relations.label(t.rel.value));
}

void count_attributes(FrequencyTable& table, const Graph& g) {
  for (const auto& name : g.attribute_keys.labels()) table.add(name, 0);
  for (const auto& a : g.attributes) table.add(g.attribute_keys.label(a.key.value));
}

// Maps a graph-local id to its column slot, or -1 when not selected.
std::vector<std::int32_t> column_slots(const Interner& interner, const AspectColumns& cols) {
  std::vector<std::int32_t> slots(interner.size(), -1);
  for (std::size_t c = 0; c < cols.names.size(); ++c) {
    if (auto id = interner.find(cols.names[c])) slots[static_cast<std::size_t>(*id)] = static_cast<std::int32_t>(c);
  }
  return slots;
}

}  // namespace

AspectColumns relation_columns(const Graph& source, const Graph& target, std::size_t cap) {
  FrequencyTable table;
  count_relations(table, source);
  count_relations(table, target);
  return table.top(cap / 2);
}

AspectColumns relation_columns(const Graph& graph, std::size_t cap) {
  FrequencyTable table;
  count_relations(table, graph);
  return table.top(cap / 2);
}

AspectColumns attribute_columns(const Graph& source, const Graph& target, std::size_t cap) {
  FrequencyTable table;
  count_attributes(table, source);
  count_attributes(table, target);
  return table.top(cap);
}

AspectColumns attribute_columns(const Graph& graph, std::size_t cap) {
  FrequencyTable table;
  count_attributes(table, graph);
  return table.top(cap);
}

Matrix build_relation_features(const Graph& graph, const AspectColumns& columns) {
  const auto slots = column_slots(graph.relations, columns);
  Matrix x = Matrix::Zero(static_cast<Eigen::Index>(graph.entity_count()),
                          static_cast<Eigen::Index>(2 * columns.names.size()));
  for (const auto& t : graph.triples) {
    const auto slot = slots[t.rel.value];
    if (slot < 0) continue;
    x(t.head.value, 2 * slot) += 1.0;
    x(t.tail.value, 2 * slot + 1) += 1.0;
  }
  normalize_rows(x);
  return x;
}

Matrix build_attribute_features(const Graph& graph, const AspectColumns& columns) {
  const auto slots = column_slots(graph.attribute_keys, columns);
  Matrix x = Matrix::Zero(static_cast<Eigen::Index>(graph.entity_count()),
                          static_cast<Eigen::Index>(columns.names.size()));
  for (const auto& a : graph.attributes) {
    const auto slot = slots[a.key.value];
    if (slot >= 0) x(a.entity.value, slot) += 1.0;
  }
  normalize_rows(x);
  return x;
}

Matrix init_features(std::size_t n, std::size_t d, std::uint64_t rng_seed) {
  require(d >= 1, "init_features: d must be >= 1");
  const double stddev = 1.0 / std::sqrt(static_cast<double>(d));
  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> normal(0.0, stddev);
  Matrix h(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    double v = normal(rng);
    while (std::abs(v) > 2.0 * stddev) v = normal(rng);
    h.data()[i] = v;
  }
  return h;
}

PairFeatures build_pair_features(const Graph& source, const Graph& target, FeatureCaps caps) {
  PairFeatures f;
  f.relation_columns = relation_columns(source, target, caps.relation);
  f.attribute_columns = attribute_columns(source, target, caps.attribute);
  f.source = {build_adjacency(source), build_relation_features(source, f.relation_columns),
              build_attribute_features(source, f.attribute_columns)};
  f.target = {build_adjacency(target), build_relation_features(target, f.relation_columns),
              build_attribute_features(target, f.attribute_columns)};
  return f;
}

}  // namespace kgalign
