#pragma once

#include "kgalign/common.hpp"
#include "kgalign/gcn_encoder.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kgalign {

enum class Metric { l1, l2, cosine };

std::string_view to_string(Metric m);
Metric parse_metric(std::string_view s);

struct Hyperparams {
  std::size_t d = 200;
  std::size_t h = 200;
  double beta = 3.0;    // structural margin
  double margin = 0.5;  // semantic margin
  double tau = 0.5;     // fusion weight of the structural embedding
  std::size_t pool_size = 50;
  std::size_t k_neg = 5;
  std::size_t epochs = 300;
  double lr = 0.005;
  std::uint64_t rng_seed = 1;
  Metric metric = Metric::l1;
  bool train_h0 = true;
  double gate_bias = -1.0;

  // Semantic head.
  std::size_t sem_epochs = 100;
  double sem_lr = 0.005;
  std::size_t mlp_hidden = 300;
  std::size_t sem_dim = 0;  // 0 selects the hybrid width d + 2h
  std::size_t sem_negatives = 1;

  void validate() const;
  bool operator==(const Hyperparams&) const = default;
};

// A seed pair with exactly one side replaced by a random entity.
struct NegativePair {
  std::size_t seed_index;
  EntityId source;
  EntityId target;
};

struct NegativeBatch {
  std::vector<NegativePair> pairs;
};

// k_neg source-side then k_neg target-side corruptions per seed. A corruption
// that is itself a seed pair is redrawn.
NegativeBatch sample_negatives(std::span<const SeedPair> seeds, std::size_t n_source,
                               std::size_t n_target, std::size_t k_neg, std::uint64_t rng_seed,
                               std::uint64_t epoch);

double distance(Metric metric, const Eigen::Ref<const Eigen::RowVectorXd>& a,
                const Eigen::Ref<const Eigen::RowVectorXd>& b);

struct PairLoss {
  double value = 0.0;
  Matrix grad_source;  // d loss / d source embeddings
  Matrix grad_target;
  std::size_t terms = 0;
  std::size_t active = 0;  // terms with a positive hinge
};

// Mean over all (seed, negative) terms of max(0, rho(pos) + beta - rho(neg)).
PairLoss structural_loss(const Matrix& source, const Matrix& target, std::span<const SeedPair> seeds,
                         const NegativeBatch& negatives, double beta, Metric metric);

// Accumulates parameter gradients for one graph given d loss / d hybrid.
// `grad_h0` receives the gradient of that graph's initial features.
void encoder_backward(const EncoderTrace& trace, const GraphFeatures& features, const EncoderParams& params,
                      const Matrix& grad_hybrid, Ablation ablation, EncoderParams& grad, Matrix& grad_h0);

struct ObjectiveValue {
  double loss = 0.0;
  EncoderParams grad;
  std::size_t terms = 0;
  std::size_t active = 0;
};

ObjectiveValue structural_objective(const PairFeatures& features, const EncoderParams& params,
                                    std::span<const SeedPair> seeds, const NegativeBatch& negatives,
                                    double beta, Metric metric, Ablation ablation);

struct AdamConfig {
  double lr = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}

  // params[i] -= lr * mhat / (sqrt(vhat) + eps), moments kept per slot.
  void step(std::span<Matrix* const> params, std::span<const Matrix* const> grads);
  long steps() const { return t_; }

 private:
  AdamConfig config_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long t_ = 0;
};

struct StructuralTrainResult {
  EncoderParams params;
  std::vector<double> loss_curve;  // loss before each epoch's update
};

using EpochCallback = std::function<void(std::size_t epoch, double loss)>;

// Full-batch Adam on the structural loss, fresh negatives every epoch.
StructuralTrainResult train_structural(const PairFeatures& features, std::span<const SeedPair> train,
                                       const Hyperparams& hyper, Ablation ablation = Ablation::none,
                                       const EpochCallback& on_epoch = {},
                                       std::optional<EncoderParams> initial = std::nullopt);

struct GradCheckInstance {
  PairFeatures features;
  EncoderParams params;
  std::vector<SeedPair> seeds;
  NegativeBatch negatives;
  double beta = 3.0;
  Metric metric = Metric::l1;
  Ablation ablation = Ablation::none;
};

// Two random graphs of n entities each with small dims, random parameters
// and a handful of seeds.
GradCheckInstance make_grad_check_instance(std::size_t n, std::uint64_t rng_seed,
                                           Metric metric = Metric::l1,
                                           Ablation ablation = Ablation::none);

struct GradCheckOptions {
  std::size_t samples = 64;
  double step = 1e-5;
  std::uint64_t rng_seed = 7;
  // Adds `corruption` to every analytic gradient entry of the named tensor.
  std::optional<std::string> corrupt_tensor;
  double corruption = 0.1;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::size_t samples = 0;
};

// relative error = |analytic - numeric| / max(|analytic|, |numeric|, 1e-6)
double relative_error(double analytic, double numeric);

GradCheckReport grad_check(const GradCheckInstance& instance, const GradCheckOptions& options = {});

}  // namespace kgalign
