#pragma once

#include "kgalign/common.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace kgalign {

struct SynthSpec {
  std::size_t n = 200;
  double avg_degree = 6.0;
  std::size_t relation_types = 4;
  std::size_t attribute_keys = 8;
  std::size_t max_attributes = 3;  // per entity, drawn uniformly from [1, max]
  double noise = 0.1;              // fraction of edges dropped and re-added in the copy
  double seed_ratio = 0.3;
  std::uint64_t rng_seed = 1;
  std::size_t text_dim = 64;  // width of the emitted fixture embeddings

  void validate() const;
};

// One graph as rows ready for writing: labels in id order, relation and
// attribute triples, and a free-text description per entity.
struct SynthGraph {
  std::vector<std::string> labels;
  std::vector<std::array<std::string, 3>> relations;
  std::vector<std::array<std::string, 3>> attributes;
  std::vector<std::string> descriptions;
};

struct SynthDataset {
  SynthGraph source;
  SynthGraph target;
  std::vector<std::array<std::string, 2>> gold;  // (source label, target label)
  std::size_t dropped_edges = 0;
};

// The target graph is a node-relabelled copy of the source in which each edge
// is dropped with probability `noise` and the same number of new edges is
// added at random. Aligned entities share their description text.
SynthDataset generate_synth(const SynthSpec& spec);

// Writes rel_triples_{1,2}.tsv, attr_triples_{1,2}.tsv, ent_labels_{1,2}.tsv,
// seeds.tsv, descriptions_{1,2}.tsv, text_emb_{1,2}.tsv and run.conf.
void write_synth(const SynthDataset& data, const SynthSpec& spec, const std::filesystem::path& dir);

}  // namespace kgalign
