#pragma once

#include "kgalign/common.hpp"
#include "kgalign/kg_core.hpp"
#include "kgalign/training_engine.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kgalign {

enum class Provenance { unknown, real_encoder, hash_fixture };

std::string_view to_string(Provenance p);

// One fixed-width text vector per entity, rows in EntityId order.
struct TextEmbeddingTable {
  Matrix rows;
  Provenance provenance = Provenance::unknown;

  std::size_t width() const { return static_cast<std::size_t>(rows.cols()); }
};

// Text format: a `#dim=<d>` line, optional `#provenance=<tag>` line, then one
// `label \t v1 \t ... \t vd` row per entity. Rows for labels outside the graph
// are ignored.
TextEmbeddingTable load_text_embeddings(const std::filesystem::path& path, const Graph& graph);

// Binary variant: raw little-endian float32 rows; the index file holds the
// `#dim=` header and one label per line in row order.
TextEmbeddingTable load_text_embeddings_binary(const std::filesystem::path& data_path,
                                               const std::filesystem::path& index_path,
                                               const Graph& graph);

void write_text_embeddings(const std::filesystem::path& path, std::span<const std::string> labels,
                           const Matrix& rows, Provenance provenance);

// Deterministic stand-in for a sentence encoder: the text hash seeds a
// Gaussian vector which is L2-normalized. Identical texts give identical rows.
Eigen::RowVectorXd fixture_embedding(std::string_view text, std::size_t width, std::uint64_t seed = 0);
Matrix fixture_embeddings(std::span<const std::string> texts, std::size_t width, std::uint64_t seed = 0);

struct MlpParams {
  Matrix w1;  // d_text x hidden
  Matrix b1;  // 1 x hidden
  Matrix w2;  // hidden x d_sem
  Matrix b2;  // 1 x d_sem

  struct NamedTensor {
    std::string_view name;
    Matrix* tensor;
  };
  std::vector<NamedTensor> tensors();
  MlpParams zeros_like() const;
};

MlpParams init_mlp(std::size_t d_text, std::size_t hidden, std::size_t d_sem, std::uint64_t rng_seed);

struct MlpTrace {
  Matrix pre_hidden;
  Matrix hidden;
  Matrix output;      // before normalization
  Matrix normalized;  // T^B rows
};

MlpTrace mlp_forward(const Matrix& input, const MlpParams& params);

// C(e) = MLP(text(e)), rows L2-normalized (zero rows stay zero).
Matrix mlp_project(const TextEmbeddingTable& table, const MlpParams& params);

struct Triplet {
  EntityId query;     // source graph
  EntityId positive;  // gold target
  EntityId negative;  // random target != positive
};

std::vector<Triplet> sample_triplets(std::span<const SeedPair> seeds, std::size_t n_target,
                                     std::size_t per_positive, std::uint64_t rng_seed, std::uint64_t epoch);

struct SemanticLoss {
  double value = 0.0;
  Matrix grad_source;
  Matrix grad_target;
  std::size_t active = 0;
};

// Sum over triplets of max(0, g(e, e-) - g(e, e+) + m), g = cosine similarity.
SemanticLoss semantic_loss(const Matrix& source, const Matrix& target, std::span<const Triplet> triplets,
                           double margin);

struct SemanticObjective {
  double loss = 0.0;
  MlpParams grad;
};

SemanticObjective semantic_objective(const MlpParams& params, const TextEmbeddingTable& source,
                                     const TextEmbeddingTable& target, std::span<const Triplet> triplets,
                                     double margin);

struct SemanticTrainResult {
  MlpParams params;
  Matrix source;  // T^B of the first graph
  Matrix target;
  std::vector<double> loss_curve;
};

SemanticTrainResult train_semantic(const TextEmbeddingTable& source, const TextEmbeddingTable& target,
                                   std::span<const SeedPair> train, const Hyperparams& hyper,
                                   const EpochCallback& on_epoch = {});

// Output width of the semantic head for the given hyperparameters.
std::size_t semantic_width(const Hyperparams& hyper);

}  // namespace kgalign
