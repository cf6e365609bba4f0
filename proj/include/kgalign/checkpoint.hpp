#pragma once

#include "kgalign/gcn_encoder.hpp"
#include "kgalign/semantic_head.hpp"
#include "kgalign/training_engine.hpp"

#include <cstdint>
#include <filesystem>

namespace kgalign {

// Binary layout, all integers little-endian:
//   magic "KGALCKPT" | u32 version | u32 kind | u32 metric | u32 ablation |
//   u64 rng_seed | u32 dim count | u64 dims... | u32 tensor count |
//   per tensor: u32 rows | u32 cols | rows*cols float32 (row-major)
// Tensors follow the owning params' declared order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointKind : std::uint32_t { structural = 1, semantic = 2 };

struct StructuralCheckpoint {
  EncoderParams params;
  Metric metric = Metric::l1;
  Ablation ablation = Ablation::none;
  std::uint64_t rng_seed = 0;
};

struct SemanticCheckpoint {
  MlpParams params;
  std::uint64_t rng_seed = 0;
};

void save_checkpoint(const std::filesystem::path& path, const StructuralCheckpoint& ckpt);
void save_checkpoint(const std::filesystem::path& path, const SemanticCheckpoint& ckpt);

StructuralCheckpoint load_structural_checkpoint(const std::filesystem::path& path);
SemanticCheckpoint load_semantic_checkpoint(const std::filesystem::path& path);

}  // namespace kgalign
