#pragma once

#include "kgalign/checkpoint.hpp"
#include "kgalign/config.hpp"
#include "kgalign/kg_core.hpp"
#include "kgalign/semantic_head.hpp"
#include "kgalign/synth.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>

namespace kgalign {

// Fixed layout under the run's output directory.
struct OutputDirs {
  std::filesystem::path root;
  std::filesystem::path checkpoints;
  std::filesystem::path reports;
  std::filesystem::path logs;

  explicit OutputDirs(const std::filesystem::path& out);
  void create() const;
  std::filesystem::path structural_checkpoint() const { return checkpoints / "structural.ckpt"; }
  std::filesystem::path semantic_checkpoint() const { return checkpoints / "semantic.ckpt"; }
};

struct Dataset {
  Graph source;
  Graph target;
  std::vector<SeedPair> seeds;
  SeedSplit split;
};

Dataset load_dataset(const RunConfig& config);

struct TextTables {
  TextEmbeddingTable source;
  TextEmbeddingTable target;
};

TextTables load_text_tables(const RunConfig& config, const Dataset& dataset);

// Semantic output width: the configured sem_dim, or the hybrid width of the
// configured ablation when sem_dim is 0.
std::size_t effective_sem_dim(const RunConfig& config);

struct TauResult {
  double tau = 1.0;
  std::vector<RankedList> lists;
  std::vector<HitsAtK> hits;
};

// Pools by structural similarity, then reranks the pool under each τ.
std::vector<TauResult> evaluate(const RunConfig& config, const Dataset& dataset, const PairFeatures& features,
                                const EncoderParams& structural, const MlpParams* semantic,
                                const TextTables* text, std::span<const double> taus);

// Each command reads what earlier commands left in config.out and writes its
// own checkpoints/reports. Progress goes to `console` and logs/<command>.log;
// wall-clock time goes to reports/runtime.json only.
void run_ingest(const RunConfig& config, std::ostream& console);
void run_train_struct(const RunConfig& config, std::ostream& console);
void run_train_sem(const RunConfig& config, std::ostream& console);
void run_align(const RunConfig& config, std::ostream& console);
void run_eval(const RunConfig& config, std::ostream& console);
void run_gen_synth(const SynthSpec& spec, const std::filesystem::path& dir, std::ostream& console);

struct GradCheckSummary {
  GradCheckReport clean;
  GradCheckReport corrupted;
  bool passed = false;
};

inline constexpr double kGradCheckTolerance = 1e-4;
inline constexpr double kGradCheckDetection = 1e-2;

GradCheckSummary run_grad_check(std::size_t nodes, std::uint64_t rng_seed, Metric metric, Ablation ablation,
                                std::ostream& console);

}  // namespace kgalign
