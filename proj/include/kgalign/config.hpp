#pragma once

#include "kgalign/feature_builder.hpp"
#include "kgalign/fusion_align.hpp"
#include "kgalign/gcn_encoder.hpp"
#include "kgalign/training_engine.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace kgalign {

// Dataset locations. Empty means "not given".
struct DatasetPaths {
  std::filesystem::path rel_triples_1;
  std::filesystem::path rel_triples_2;
  std::filesystem::path attr_triples_1;
  std::filesystem::path attr_triples_2;
  std::filesystem::path ent_labels_1;
  std::filesystem::path ent_labels_2;
  std::filesystem::path text_emb_1;
  std::filesystem::path text_emb_2;
  // When set, text_emb_N is raw float32 and this is its label index.
  std::filesystem::path text_emb_index_1;
  std::filesystem::path text_emb_index_2;
  std::filesystem::path seeds;

  bool operator==(const DatasetPaths&) const = default;
};

struct RunConfig {
  DatasetPaths data;
  std::filesystem::path out = "out";
  double train_ratio = 0.3;
  Hyperparams hyper;
  Ablation ablation = Ablation::none;
  FusionMode fusion = FusionMode::weighted_sum;
  std::vector<double> tau_sweep;  // extra τ values reported by eval
  FeatureCaps caps;
  std::vector<int> hits_ks = {1, 10};
  bool deterministic = false;

  void validate() const;
  bool operator==(const RunConfig&) const;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// Every key in schema order, values in their canonical text form.
KeyValues to_kv(const RunConfig& config);

// Unknown keys and malformed values raise ConfigError. Relative paths are
// resolved against `base_dir`.
RunConfig from_kv(const KeyValues& kv, const std::filesystem::path& base_dir = {});

// Overwrites the named keys of an existing config.
void apply_kv(RunConfig& config, const KeyValues& kv, const std::filesystem::path& base_dir = {});

// `key = value` lines; `#` starts a comment, blank lines are ignored.
KeyValues parse_kv(std::string_view text, const std::string& source_name);
RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir,
                       const std::string& source_name = "<config>");
RunConfig load_config(const std::filesystem::path& path);
std::string format_config(const RunConfig& config);

}  // namespace kgalign
