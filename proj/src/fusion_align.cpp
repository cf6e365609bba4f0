#include "kgalign/fusion_align.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <string>
#include <thread>
#include <unordered_map>

namespace kgalign {

std::string_view to_string(FusionMode m) {
  return m == FusionMode::weighted_sum ? "sum" : "concat";
}

FusionMode parse_fusion(std::string_view s) {
  if (s == "sum") return FusionMode::weighted_sum;
  if (s == "concat") return FusionMode::weighted_concat;
  throw ConfigError("unknown fusion mode '" + std::string(s) + "' (expected sum, concat)");
}

Matrix fuse_rows(const Matrix& structural, const Matrix& semantic, double tau, FusionMode mode) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in [0, 1]");
  require(structural.rows() == semantic.rows(), "fuse: structural and semantic row counts differ");
  Matrix out;
  if (mode == FusionMode::weighted_sum) {
    if (structural.cols() != semantic.cols()) {
      throw ConfigError("weighted-sum fusion needs equal widths (structural " + std::to_string(structural.cols()) +
                        ", semantic " + std::to_string(semantic.cols()) + "); use --fusion concat");
    }
    out = tau * structural + (1.0 - tau) * semantic;
  } else {
    out.resize(structural.rows(), structural.cols() + semantic.cols());
    out.leftCols(structural.cols()) = tau * structural;
    out.rightCols(semantic.cols()) = (1.0 - tau) * semantic;
  }
  normalize_rows(out);
  return out;
}

FusedEmbeddings fuse(const Matrix& structural_source, const Matrix& structural_target, const Matrix& semantic_source,
                     const Matrix& semantic_target, double tau, FusionMode mode) {
  return {fuse_rows(structural_source, semantic_source, tau, mode),
          fuse_rows(structural_target, semantic_target, tau, mode), tau, mode};
}

double cosine_similarity(const Eigen::Ref<const Eigen::RowVectorXd>& a, const Eigen::Ref<const Eigen::RowVectorXd>& b) {
  const double aa = a.squaredNorm();
  const double bb = b.squaredNorm();
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return std::clamp(a.dot(b) / std::sqrt(aa * bb), -1.0, 1.0);
}

namespace {

bool better(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.target < b.target;
}

// Runs fn(i) for i in [0, n) over up to `threads` workers with static
// contiguous chunks; each index is handled by exactly one worker.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned w = 0; w < threads; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    workers.emplace_back([=, &fn] {
      for (std::size_t i = begin; i < end; ++i) fn(i);
    });
  }
  for (auto& t : workers) t.join();
}

}  // namespace

std::vector<std::vector<EntityId>> candidate_pool(const Matrix& source, const Matrix& target,
                                                  std::span<const EntityId> sources, std::size_t q, unsigned threads) {
  if (q < 1) throw ConfigError("candidate pool size Q must be >= 1");
  require(source.cols() == target.cols(), "candidate_pool: embedding widths differ");
  const auto n_target = static_cast<std::size_t>(target.rows());
  const std::size_t keep = std::min(q, n_target);
  std::vector<std::vector<EntityId>> pools(sources.size());
  parallel_for(sources.size(), threads, [&](std::size_t i) {
    const auto query = source.row(sources[i].value);
    std::vector<Candidate> all(n_target);
    for (std::size_t t = 0; t < n_target; ++t) {
      all[t] = {EntityId(static_cast<std::int32_t>(t)), cosine_similarity(query, target.row(static_cast<Eigen::Index>(t)))};
    }
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), better);
    auto& pool = pools[i];
    pool.reserve(keep);
    for (std::size_t k = 0; k < keep; ++k) pool.push_back(all[k].target);
  });
  return pools;
}

std::vector<RankedList> rank_candidates(const Matrix& source, const Matrix& target, std::span<const EntityId> sources,
                                        std::span<const std::vector<EntityId>> pools, unsigned threads) {
  require(sources.size() == pools.size(), "rank_candidates: one pool per source required");
  require(source.cols() == target.cols(), "rank_candidates: embedding widths differ");
  std::vector<RankedList> lists(sources.size());
  parallel_for(sources.size(), threads, [&](std::size_t i) {
    const auto query = source.row(sources[i].value);
    auto& list = lists[i];
    list.source = sources[i];
    list.candidates.reserve(pools[i].size());
    for (const auto t : pools[i]) list.candidates.push_back({t, cosine_similarity(query, target.row(t.value))});
    std::sort(list.candidates.begin(), list.candidates.end(), better);
  });
  return lists;
}

std::vector<HitsAtK> hits_at_k(std::span<const RankedList> lists, std::span<const SeedPair> gold,
                               std::span<const int> ks) {
  for (const int k : ks) {
    if (k <= 0) throw ConfigError("Hits@k needs k >= 1, got " + std::to_string(k));
  }
  std::unordered_map<EntityId, const RankedList*> by_source;
  for (const auto& l : lists) by_source.emplace(l.source, &l);

  // Rank of the gold target per gold pair; SIZE_MAX when absent.
  std::vector<std::size_t> ranks;
  ranks.reserve(gold.size());
  for (const auto& g : gold) {
    std::size_t rank = SIZE_MAX;
    if (auto it = by_source.find(g.source); it != by_source.end()) {
      const auto& c = it->second->candidates;
      for (std::size_t r = 0; r < c.size(); ++r) {
        if (c[r].target == g.target) {
          rank = r;
          break;
        }
      }
    }
    ranks.push_back(rank);
  }

  std::vector<HitsAtK> out;
  for (const int k : ks) {
    std::size_t hits = 0;
    for (const auto r : ranks) hits += r < static_cast<std::size_t>(k) ? 1 : 0;
    out.push_back({k, gold.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(gold.size())});
  }
  return out;
}

unsigned kernel_threads() {
  if (const char* env = std::getenv("KGALIGN_THREADS")) {
    const auto v = parse_double(env);
    if (v && *v >= 1) return static_cast<unsigned>(*v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace kgalign
