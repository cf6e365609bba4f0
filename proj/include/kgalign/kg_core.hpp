#pragma once

#include "kgalign/common.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kgalign {

// Assigns contiguous ids to labels in order of first appearance.
class Interner {
 public:
  std::int32_t intern(std::string_view label);
  std::optional<std::int32_t> find(std::string_view label) const;
  const std::string& label(std::int32_t id) const { return labels_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::int32_t> index_;
};

struct RelationTriple {
  EntityId head;
  RelationId rel;
  EntityId tail;
  auto operator<=>(const RelationTriple&) const = default;
};

struct AttributeTriple {
  EntityId entity;
  AttrKeyId key;
  std::string value;
  auto operator<=>(const AttributeTriple&) const = default;
};

struct LoadReport {
  std::size_t relation_rows = 0;
  std::size_t relation_duplicates = 0;
  std::size_t attribute_rows = 0;
  std::size_t attribute_duplicates = 0;
};

// One interned knowledge graph. Immutable once loaded.
struct Graph {
  Interner entities;
  Interner relations;
  Interner attribute_keys;
  std::vector<RelationTriple> triples;
  std::vector<AttributeTriple> attributes;
  LoadReport report;

  std::size_t entity_count() const { return entities.size(); }
};

struct KnowledgeGraphPair {
  Graph source;
  Graph target;
  std::vector<SeedPair> seeds;
};

struct SeedSplit {
  std::vector<SeedPair> train;
  std::vector<SeedPair> test;
  double ratio = 0.0;
  std::uint64_t rng_seed = 0;
};

// Splits a tab-separated line into fields (no quoting).
std::vector<std::string_view> split_tabs(std::string_view line);

// Entities listed in `labels_path` (first column) are interned first, then
// entities as they appear in the triple files. Duplicate triples are dropped
// and counted in `Graph::report`.
Graph load_graph(const std::filesystem::path& triples_path,
                 const std::optional<std::filesystem::path>& attrs_path = std::nullopt,
                 const std::optional<std::filesystem::path>& labels_path = std::nullopt);

// Builds a graph from in-memory rows; same rules as load_graph.
Graph make_graph(std::span<const std::array<std::string, 3>> relation_rows,
                 std::span<const std::array<std::string, 3>> attribute_rows = {},
                 std::span<const std::string> entity_labels = {});

std::vector<SeedPair> load_seeds(const std::filesystem::path& path, const Graph& source,
                                 const Graph& target);

// Throws ConfigError unless every entity occurs at most once per side.
void check_injective(std::span<const SeedPair> seeds);

SeedSplit split_seeds(std::span<const SeedPair> seeds, double ratio, std::uint64_t rng_seed);

}  // namespace kgalign
