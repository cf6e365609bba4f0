#include "kgalign/kg_core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <tuple>
#include <unordered_set>

namespace kgalign {

std::int32_t Interner::intern(std::string_view label) {
  auto it = index_.find(std::string(label));
  if (it != index_.end()) return it->second;
  const auto id = static_cast<std::int32_t>(labels_.size());
  labels_.emplace_back(label);
  index_.emplace(labels_.back(), id);
  return id;
}

std::optional<std::int32_t> Interner::find(std::string_view label) const {
  auto it = index_.find(std::string(label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

namespace {

using Row = std::array<std::string, 3>;

struct NumberedRow {
  Row fields;
  std::size_t line;
};

std::vector<NumberedRow> read_rows(const std::filesystem::path& path, std::size_t arity) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  std::vector<NumberedRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != arity) {
      throw ParseError(path.string(), lineno,
                       "expected " + std::to_string(arity) + " tab-separated fields, got " +
                           std::to_string(fields.size()));
    }
    NumberedRow row{{}, lineno};
    for (std::size_t i = 0; i < arity; ++i) {
      if (fields[i].empty()) {
        throw ParseError(path.string(), lineno, "empty field " + std::to_string(i + 1));
      }
      row.fields[i] = std::string(fields[i]);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<std::string> read_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  std::vector<std::string> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto first = split_tabs(line).front();
    if (first.empty()) throw ParseError(path.string(), lineno, "empty entity label");
    labels.emplace_back(first);
  }
  return labels;
}

Graph build_graph(std::span<const Row> relation_rows, std::span<const Row> attribute_rows,
                  std::span<const std::string> entity_labels) {
  Graph g;
  for (const auto& label : entity_labels) g.entities.intern(label);

  std::set<std::tuple<std::int32_t, std::int32_t, std::int32_t>> seen;
  for (const auto& row : relation_rows) {
    ++g.report.relation_rows;
    const auto head = g.entities.intern(row[0]);
    const auto rel = g.relations.intern(row[1]);
    const auto tail = g.entities.intern(row[2]);
    if (!seen.emplace(head, rel, tail).second) {
      ++g.report.relation_duplicates;
      continue;
    }
    g.triples.push_back({EntityId(head), RelationId(rel), EntityId(tail)});
  }
  if (g.triples.empty()) throw LoadError("graph has no relation triples");

  std::set<std::tuple<std::int32_t, std::int32_t, std::string>> seen_attrs;
  for (const auto& row : attribute_rows) {
    ++g.report.attribute_rows;
    const auto entity = g.entities.intern(row[0]);
    const auto key = g.attribute_keys.intern(row[1]);
    if (!seen_attrs.emplace(entity, key, row[2]).second) {
      ++g.report.attribute_duplicates;
      continue;
    }
    g.attributes.push_back({EntityId(entity), AttrKeyId(key), row[2]});
  }
  return g;
}

}  // namespace

Graph make_graph(std::span<const Row> relation_rows, std::span<const Row> attribute_rows,
                 std::span<const std::string> entity_labels) {
  return build_graph(relation_rows, attribute_rows, entity_labels);
}

Graph load_graph(const std::filesystem::path& triples_path,
                 const std::optional<std::filesystem::path>& attrs_path,
                 const std::optional<std::filesystem::path>& labels_path) {
  std::vector<std::string> labels;
  if (labels_path) labels = read_labels(*labels_path);

  auto to_rows = [](std::vector<NumberedRow> numbered) {
    std::vector<Row> rows;
    rows.reserve(numbered.size());
    for (auto& r : numbered) rows.push_back(std::move(r.fields));
    return rows;
  };
  const auto relation_rows = to_rows(read_rows(triples_path, 3));
  std::vector<Row> attribute_rows;
  if (attrs_path) attribute_rows = to_rows(read_rows(*attrs_path, 3));

  try {
    return build_graph(relation_rows, attribute_rows, labels);
  } catch (const LoadError& e) {
    throw LoadError(triples_path.string() + ": " + e.what());
  }
}

void check_injective(std::span<const SeedPair> seeds) {
  std::unordered_set<EntityId> left;
  std::unordered_set<EntityId> right;
  for (const auto& s : seeds) {
    if (!left.insert(s.source).second || !right.insert(s.target).second) {
      throw ConfigError("non-injective seed set");
    }
  }
}

std::vector<SeedPair> load_seeds(const std::filesystem::path& path, const Graph& source,
                                 const Graph& target) {
  std::vector<SeedPair> seeds;
  std::unordered_set<EntityId> left;
  std::unordered_set<EntityId> right;
  for (const auto& row : read_rows(path, 2)) {
    const auto s = source.entities.find(row.fields[0]);
    if (!s) throw ParseError(path.string(), row.line, "unknown g1 label '" + row.fields[0] + "'");
    const auto t = target.entities.find(row.fields[1]);
    if (!t) throw ParseError(path.string(), row.line, "unknown g2 label '" + row.fields[1] + "'");
    const SeedPair pair{EntityId(*s), EntityId(*t)};
    if (!left.insert(pair.source).second || !right.insert(pair.target).second) {
      throw ConfigError(path.string() + ":" + std::to_string(row.line) +
                        ": non-injective seed set");
    }
    seeds.push_back(pair);
  }
  return seeds;
}

SeedSplit split_seeds(std::span<const SeedPair> seeds, double ratio, std::uint64_t rng_seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw ConfigError("train ratio must lie in (0, 1), got " + std::to_string(ratio));
  }
  if (seeds.size() < 2) throw ConfigError("need at least 2 seed pairs to split");

  std::vector<SeedPair> shuffled(seeds.begin(), seeds.end());
  std::mt19937_64 rng(rng_seed);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);

  const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(seeds.size())));
  SeedSplit split;
  split.ratio = ratio;
  split.rng_seed = rng_seed;
  split.train.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_train), shuffled.end());
  return split;
}

}  // namespace kgalign
