#pragma once

#include "kgalign/common.hpp"
#include "kgalign/kg_core.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace kgalign {

// Symmetric-normalized adjacency with self-loops, D^-1/2 (A + I) D^-1/2, in
// CSR form. Column indices are sorted within each row.
struct SparseNormalizedAdjacency {
  std::int32_t n = 0;
  std::vector<std::int32_t> row_offsets;  // size n + 1
  std::vector<std::int32_t> columns;
  std::vector<double> values;

  std::size_t nonzeros() const { return values.size(); }
  Matrix to_dense() const;
  // out = A * in
  Matrix multiply(const Matrix& in) const;
};

SparseNormalizedAdjacency build_adjacency(const Graph& graph);

// Writes "row col value" lines, one per stored entry.
void dump_adjacency(std::ostream& out, const SparseNormalizedAdjacency& adj);

// Column vocabulary shared by both graphs: names sorted by joint frequency,
// ties in order of first appearance (source graph first).
struct AspectColumns {
  std::vector<std::string> names;
};

inline constexpr std::size_t kDefaultFeatureCap = 1000;

// Relation columns cover at most cap / 2 relation types (two columns each).
AspectColumns relation_columns(const Graph& source, const Graph& target,
                               std::size_t cap = kDefaultFeatureCap);
AspectColumns relation_columns(const Graph& graph, std::size_t cap = kDefaultFeatureCap);
AspectColumns attribute_columns(const Graph& source, const Graph& target,
                                std::size_t cap = kDefaultFeatureCap);
AspectColumns attribute_columns(const Graph& graph, std::size_t cap = kDefaultFeatureCap);

// Row i holds (head count, tail count) for each column relation type,
// interleaved, then L2-normalized if nonzero.
Matrix build_relation_features(const Graph& graph, const AspectColumns& columns);

// Row i holds the number of attribute triples of each column key, then
// L2-normalized if nonzero.
Matrix build_attribute_features(const Graph& graph, const AspectColumns& columns);

// Truncated normal (mean 0, std 1/sqrt(d), cut at two std), deterministic in rng_seed.
Matrix init_features(std::size_t n, std::size_t d, std::uint64_t rng_seed);

struct GraphFeatures {
  SparseNormalizedAdjacency adjacency;
  Matrix relation;
  Matrix attribute;
};

struct FeatureCaps {
  std::size_t relation = kDefaultFeatureCap;
  std::size_t attribute = kDefaultFeatureCap;

  bool operator==(const FeatureCaps&) const = default;
};

struct PairFeatures {
  GraphFeatures source;
  GraphFeatures target;
  AspectColumns relation_columns;
  AspectColumns attribute_columns;
};

PairFeatures build_pair_features(const Graph& source, const Graph& target, FeatureCaps caps = {});

}  // namespace kgalign
