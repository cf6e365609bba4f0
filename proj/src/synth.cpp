#include "kgalign/synth.hpp"

#include "kgalign/semantic_head.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <tuple>

namespace kgalign {

void SynthSpec::validate() const {
  if (n < 10) throw ConfigError("synthetic graph needs n >= 10");
  if (!(noise >= 0.0 && noise < 1.0)) throw ConfigError("edge noise p must lie in [0, 1)");
  if (!(avg_degree > 0.0) || avg_degree > static_cast<double>(n - 1)) {
    throw ConfigError("average degree must lie in (0, n - 1]");
  }
  if (relation_types < 1) throw ConfigError("need at least one relation type");
  if (attribute_keys < 1 || max_attributes < 1) throw ConfigError("need at least one attribute key per entity");
  if (!(seed_ratio > 0.0 && seed_ratio < 1.0)) throw ConfigError("seed ratio must lie in (0, 1)");
  if (text_dim < 1) throw ConfigError("text_dim must be >= 1");
}

namespace {

struct Edge {
  std::size_t head;
  std::size_t rel;
  std::size_t tail;
};

std::pair<std::size_t, std::size_t> unordered(std::size_t a, std::size_t b) { return {std::min(a, b), std::max(a, b)}; }

// Draws a new edge between distinct nodes whose unordered pair is not in `used`.
Edge draw_edge(std::size_t n, std::size_t relation_types, std::set<std::pair<std::size_t, std::size_t>>& used,
               std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> node(0, n - 1);
  std::uniform_int_distribution<std::size_t> rel(0, relation_types - 1);
  while (true) {
    const auto a = node(rng);
    const auto b = node(rng);
    if (a == b || !used.insert(unordered(a, b)).second) continue;
    return {a, rel(rng), b};
  }
}

}  // namespace

SynthDataset generate_synth(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(derive_seed(spec.rng_seed, 0));
  const std::size_t n = spec.n;
  const std::size_t max_edges = n * (n - 1) / 2;
  const auto m = std::min<std::size_t>(max_edges, static_cast<std::size_t>(std::llround(spec.avg_degree * static_cast<double>(n) / 2.0)));

  std::set<std::pair<std::size_t, std::size_t>> used;
  std::vector<Edge> edges;
  edges.reserve(m);
  for (std::size_t e = 0; e < m; ++e) edges.push_back(draw_edge(n, spec.relation_types, used, rng));

  std::vector<std::vector<std::size_t>> attrs(n);
  std::vector<std::string> values(n * spec.attribute_keys);
  {
    std::vector<std::size_t> keys(spec.attribute_keys);
    std::iota(keys.begin(), keys.end(), 0);
    std::uniform_int_distribution<std::size_t> count(1, std::min(spec.max_attributes, spec.attribute_keys));
    std::uniform_int_distribution<int> token(0, 99999);
    for (std::size_t i = 0; i < n; ++i) {
      std::shuffle(keys.begin(), keys.end(), rng);
      attrs[i].assign(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(count(rng)));
      std::sort(attrs[i].begin(), attrs[i].end());
      for (const auto k : attrs[i]) values[i * spec.attribute_keys + k] = "v" + std::to_string(token(rng));
    }
  }

  std::vector<std::string> descriptions(n);
  {
    std::uniform_int_distribution<int> word(0, 4999);
    for (std::size_t i = 0; i < n; ++i) {
      std::string text = "entity";
      for (int w = 0; w < 6; ++w) text += " w" + std::to_string(word(rng));
      descriptions[i] = std::move(text);
    }
  }

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);

  // Perturbed copy in target ids.
  std::bernoulli_distribution drop(spec.noise);
  std::set<std::pair<std::size_t, std::size_t>> target_used;
  std::vector<Edge> target_edges;
  std::size_t dropped = 0;
  for (const auto& e : edges) {
    if (drop(rng)) {
      ++dropped;
      continue;
    }
    target_edges.push_back({perm[e.head], e.rel, perm[e.tail]});
    target_used.insert(unordered(perm[e.head], perm[e.tail]));
  }
  // Dropped pairs stay excluded so a re-added edge is genuinely new.
  for (const auto& e : edges) target_used.insert(unordered(perm[e.head], perm[e.tail]));
  for (std::size_t r = 0; r < dropped && target_used.size() < max_edges; ++r) {
    target_edges.push_back(draw_edge(n, spec.relation_types, target_used, rng));
  }
  std::sort(target_edges.begin(), target_edges.end(), [](const Edge& a, const Edge& b) {
    return std::tie(a.head, a.tail, a.rel) < std::tie(b.head, b.tail, b.rel);
  });

  SynthDataset data;
  data.dropped_edges = dropped;
  auto& src = data.source;
  auto& tgt = data.target;
  src.labels.resize(n);
  tgt.labels.resize(n);
  src.descriptions = descriptions;
  tgt.descriptions.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    src.labels[i] = "s" + std::to_string(i);
    tgt.labels[i] = "t" + std::to_string(i);
  }
  for (std::size_t i = 0; i < n; ++i) tgt.descriptions[perm[i]] = descriptions[i];

  auto rel_name = [](std::size_t r) { return "rel" + std::to_string(r); };
  auto key_name = [](std::size_t k) { return "key" + std::to_string(k); };
  for (const auto& e : edges) src.relations.push_back({src.labels[e.head], rel_name(e.rel), src.labels[e.tail]});
  for (const auto& e : target_edges) tgt.relations.push_back({tgt.labels[e.head], rel_name(e.rel), tgt.labels[e.tail]});

  std::vector<std::size_t> inverse(n);
  for (std::size_t i = 0; i < n; ++i) inverse[perm[i]] = i;
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto k : attrs[i]) src.attributes.push_back({src.labels[i], key_name(k), values[i * spec.attribute_keys + k]});
  }
  for (std::size_t j = 0; j < n; ++j) {
    const auto i = inverse[j];
    for (const auto k : attrs[i]) tgt.attributes.push_back({tgt.labels[j], key_name(k), values[i * spec.attribute_keys + k]});
  }
  for (std::size_t i = 0; i < n; ++i) data.gold.push_back({src.labels[i], tgt.labels[perm[i]]});
  return data;
}

namespace {

template <std::size_t N>
void write_rows(const std::filesystem::path& path, const std::vector<std::array<std::string, N>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write " + path.string());
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < N; ++i) out << (i ? "\t" : "") << row[i];
    out << '\n';
  }
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& a,
                 const std::vector<std::string>* b = nullptr) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write " + path.string());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out << a[i];
    if (b) out << '\t' << (*b)[i];
    out << '\n';
  }
}

}  // namespace

void write_synth(const SynthDataset& data, const SynthSpec& spec, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const SynthGraph* graphs[2] = {&data.source, &data.target};
  for (int g = 0; g < 2; ++g) {
    const auto suffix = std::to_string(g + 1) + ".tsv";
    write_rows(dir / ("rel_triples_" + suffix), graphs[g]->relations);
    write_rows(dir / ("attr_triples_" + suffix), graphs[g]->attributes);
    write_lines(dir / ("ent_labels_" + suffix), graphs[g]->labels);
    write_lines(dir / ("descriptions_" + suffix), graphs[g]->labels, &graphs[g]->descriptions);
    write_text_embeddings(dir / ("text_emb_" + suffix), graphs[g]->labels,
                          fixture_embeddings(graphs[g]->descriptions, spec.text_dim), Provenance::hash_fixture);
  }
  write_rows(dir / "seeds.tsv", data.gold);

  std::ofstream conf(dir / "run.conf", std::ios::binary);
  if (!conf) throw LoadError("cannot write " + (dir / "run.conf").string());
  conf << "# generated by gen-synth\n";
  for (const char* g : {"1", "2"}) {
    conf << "rel_triples_" << g << " = rel_triples_" << g << ".tsv\n";
    conf << "attr_triples_" << g << " = attr_triples_" << g << ".tsv\n";
    conf << "ent_labels_" << g << " = ent_labels_" << g << ".tsv\n";
    conf << "text_emb_" << g << " = text_emb_" << g << ".tsv\n";
  }
  conf << "seeds = seeds.tsv\n";
  conf << "train_ratio = " << format_double(spec.seed_ratio) << '\n';
  conf << "seed = " << spec.rng_seed << '\n';
}

}  // namespace kgalign
