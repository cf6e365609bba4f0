#pragma once

#include "kgalign/common.hpp"

#include <map>
#include <span>
#include <string_view>
#include <vector>

namespace kgalign {

enum class FusionMode { weighted_sum, weighted_concat };

std::string_view to_string(FusionMode m);
FusionMode parse_fusion(std::string_view s);

struct FusedEmbeddings {
  Matrix source;
  Matrix target;
  double tau = 1.0;
  FusionMode mode = FusionMode::weighted_sum;
};

// sum:    normalize(tau * structural + (1 - tau) * semantic)
// concat: normalize([tau * structural, (1 - tau) * semantic])
Matrix fuse_rows(const Matrix& structural, const Matrix& semantic, double tau, FusionMode mode);

FusedEmbeddings fuse(const Matrix& structural_source, const Matrix& structural_target, const Matrix& semantic_source,
                     const Matrix& semantic_target, double tau, FusionMode mode);

// Cosine similarity in [-1, 1]; 0 when either vector is zero.
double cosine_similarity(const Eigen::Ref<const Eigen::RowVectorXd>& a, const Eigen::Ref<const Eigen::RowVectorXd>& b);

struct Candidate {
  EntityId target;
  double score;
};

struct RankedList {
  EntityId source;
  std::vector<Candidate> candidates;  // descending score, ties by ascending target id
};

// Per source, the q targets with the highest cosine similarity (whole target
// set when q exceeds it), best first.
std::vector<std::vector<EntityId>> candidate_pool(const Matrix& source, const Matrix& target,
                                                  std::span<const EntityId> sources, std::size_t q,
                                                  unsigned threads = 1);

// Re-scores each pool under the given embeddings and sorts it.
std::vector<RankedList> rank_candidates(const Matrix& source, const Matrix& target,
                                        std::span<const EntityId> sources,
                                        std::span<const std::vector<EntityId>> pools, unsigned threads = 1);

struct HitsAtK {
  int k;
  double value;
};

// Fraction of gold pairs whose target appears in the first k candidates of
// its source's list; sources without a list count as misses.
std::vector<HitsAtK> hits_at_k(std::span<const RankedList> lists, std::span<const SeedPair> gold,
                               std::span<const int> ks);

struct AlignmentReport {
  std::vector<RankedList> lists;
  std::vector<HitsAtK> metrics;
};

// Worker count from KGALIGN_THREADS (default: hardware concurrency, min 1).
unsigned kernel_threads();

}  // namespace kgalign
