#include "kgalign/training_engine.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_set>

namespace kgalign {

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::l1: return "l1";
    case Metric::l2: return "l2";
    case Metric::cosine: return "cos";
  }
  return "l1";
}

Metric parse_metric(std::string_view s) {
  if (s == "l1") return Metric::l1;
  if (s == "l2") return Metric::l2;
  if (s == "cos") return Metric::cosine;
  throw ConfigError("unknown metric '" + std::string(s) + "' (expected l1, l2, cos)");
}

void Hyperparams::validate() const {
  if (d < 1 || h < 1) throw ConfigError("d and h must be >= 1");
  if (!(beta > 0.0)) throw ConfigError("beta must be > 0");
  if (!(margin >= 0.0)) throw ConfigError("margin must be >= 0");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in [0, 1]");
  if (pool_size < 1) throw ConfigError("pool size Q must be >= 1");
  if (k_neg < 1) throw ConfigError("k_neg must be >= 1");
  if (!(lr >= 0.0) || !(sem_lr >= 0.0)) throw ConfigError("learning rates must be >= 0");
  if (mlp_hidden < 1) throw ConfigError("mlp_hidden must be >= 1");
  if (sem_negatives < 1) throw ConfigError("sem_negatives must be >= 1");
}

NegativeBatch sample_negatives(std::span<const SeedPair> seeds, std::size_t n_source,
                               std::size_t n_target, std::size_t k_neg, std::uint64_t rng_seed,
                               std::uint64_t epoch) {
  if (n_source <= k_neg || n_target <= k_neg) {
    throw ConfigError("negative sampling needs more than k_neg = " + std::to_string(k_neg) +
                      " entities per graph");
  }
  auto key = [](EntityId s, EntityId t) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(s.value)) << 32) |
           static_cast<std::uint32_t>(t.value);
  };
  std::unordered_set<std::uint64_t> seed_set;
  for (const auto& s : seeds) seed_set.insert(key(s.source, s.target));

  std::mt19937_64 rng(derive_seed(rng_seed, 1000 + epoch));
  std::uniform_int_distribution<std::int32_t> pick_source(0, static_cast<std::int32_t>(n_source) - 1);
  std::uniform_int_distribution<std::int32_t> pick_target(0, static_cast<std::int32_t>(n_target) - 1);

  NegativeBatch batch;
  batch.pairs.reserve(seeds.size() * 2 * k_neg);
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto& s = seeds[i];
    for (std::size_t k = 0; k < k_neg; ++k) {
      EntityId corrupt;
      do corrupt = EntityId(pick_source(rng));
      while (seed_set.contains(key(corrupt, s.target)));
      batch.pairs.push_back({i, corrupt, s.target});
    }
    for (std::size_t k = 0; k < k_neg; ++k) {
      EntityId corrupt;
      do corrupt = EntityId(pick_target(rng));
      while (seed_set.contains(key(s.source, corrupt)));
      batch.pairs.push_back({i, s.source, corrupt});
    }
  }
  return batch;
}

double distance(Metric metric, const Eigen::Ref<const Eigen::RowVectorXd>& a,
                const Eigen::Ref<const Eigen::RowVectorXd>& b) {
  switch (metric) {
    case Metric::l1: return (a - b).lpNorm<1>();
    case Metric::l2: return (a - b).norm();
    case Metric::cosine: {
      const double na = a.norm();
      const double nb = b.norm();
      if (na == 0.0 || nb == 0.0) return 1.0;
      return 1.0 - a.dot(b) / (na * nb);
    }
  }
  return 0.0;
}

namespace {

// Adds scale * d rho(a, b) / da to ga and scale * d rho / db to gb.
void accumulate_distance_grad(Metric metric, const Eigen::Ref<const Eigen::RowVectorXd>& a,
                              const Eigen::Ref<const Eigen::RowVectorXd>& b, double scale,
                              Eigen::Ref<Eigen::RowVectorXd> ga, Eigen::Ref<Eigen::RowVectorXd> gb) {
  switch (metric) {
    case Metric::l1: {
      const Eigen::RowVectorXd s = (a - b).unaryExpr([](double v) {
        return static_cast<double>((v > 0.0) - (v < 0.0));
      });
      ga += scale * s;
      gb -= scale * s;
      return;
    }
    case Metric::l2: {
      const double n = (a - b).norm();
      if (n == 0.0) return;
      ga += (scale / n) * (a - b);
      gb -= (scale / n) * (a - b);
      return;
    }
    case Metric::cosine: {
      const double na = a.norm();
      const double nb = b.norm();
      if (na == 0.0 || nb == 0.0) return;
      const double c = a.dot(b) / (na * nb);
      ga -= scale * (b / (na * nb) - c * a / (na * na));
      gb -= scale * (a / (na * nb) - c * b / (nb * nb));
      return;
    }
  }
}

Matrix relu_mask(const Matrix& pre, const Matrix& grad) {
  return grad.binaryExpr(pre, [](double g, double p) { return p > 0.0 ? g : 0.0; });
}

void channel_backward(const Matrix& x, const ChannelTrace& t, const ChannelParams& p,
                      const Matrix& grad_out, bool highway, ChannelParams& g) {
  Matrix grad_transform;
  Matrix grad_carry;
  if (highway) {
    grad_transform = grad_out.cwiseProduct(t.gate);
    const Matrix grad_gate = grad_out.cwiseProduct(t.transform - t.carry);
    grad_carry = grad_out.cwiseProduct((1.0 - t.gate.array()).matrix());
    const Matrix grad_gate_pre =
        grad_gate.array() * t.gate.array() * (1.0 - t.gate.array());
    g.w_gate.noalias() += t.carry.transpose() * grad_gate_pre;
    g.b_gate += grad_gate_pre.colwise().sum();
    grad_carry.noalias() += grad_gate_pre * p.w_gate.transpose();
  } else {
    grad_transform = grad_out;
    grad_carry = Matrix::Zero(t.carry.rows(), t.carry.cols());
  }
  const Matrix grad_pre_out = relu_mask(t.pre_out, grad_transform);
  g.w_out.noalias() += t.carry.transpose() * grad_pre_out;
  g.b_out += grad_pre_out.colwise().sum();
  grad_carry.noalias() += grad_pre_out * p.w_out.transpose();

  const Matrix grad_pre_in = relu_mask(t.pre_in, grad_carry);
  g.w_in.noalias() += x.transpose() * grad_pre_in;
  g.b_in += grad_pre_in.colwise().sum();
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

PairLoss structural_loss(const Matrix& source, const Matrix& target, std::span<const SeedPair> seeds,
                         const NegativeBatch& negatives, double beta, Metric metric) {
  if (seeds.empty()) throw ConfigError("structural loss needs a non-empty seed set");
  if (negatives.pairs.empty()) throw ConfigError("structural loss needs at least one negative");
  require(source.cols() == target.cols(), "structural_loss: embedding widths differ");

  PairLoss out;
  out.grad_source = Matrix::Zero(source.rows(), source.cols());
  out.grad_target = Matrix::Zero(target.rows(), target.cols());
  out.terms = negatives.pairs.size();

  std::vector<double> positive(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    positive[i] = distance(metric, source.row(seeds[i].source.value), target.row(seeds[i].target.value));
  }

  const double scale = 1.0 / static_cast<double>(out.terms);
  double total = 0.0;
  for (const auto& neg : negatives.pairs) {
    const auto& seed = seeds[neg.seed_index];
    const double hinge = positive[neg.seed_index] + beta -
                         distance(metric, source.row(neg.source.value), target.row(neg.target.value));
    if (std::isnan(hinge)) {
      total = hinge;  // surfaces as a non-finite loss
      continue;
    }
    if (hinge <= 0.0) continue;
    total += hinge;
    ++out.active;
    accumulate_distance_grad(metric, source.row(seed.source.value), target.row(seed.target.value), scale,
                             out.grad_source.row(seed.source.value), out.grad_target.row(seed.target.value));
    accumulate_distance_grad(metric, source.row(neg.source.value), target.row(neg.target.value), -scale,
                             out.grad_source.row(neg.source.value), out.grad_target.row(neg.target.value));
  }
  out.value = total * scale;
  return out;
}

void encoder_backward(const EncoderTrace& trace, const GraphFeatures& features, const EncoderParams& params,
                      const Matrix& grad_hybrid, Ablation ablation, EncoderParams& grad, Matrix& grad_h0) {
  const Matrix grad_concat = normalize_rows_backward(trace.concat, trace.output.hybrid, grad_hybrid);
  const auto& adj = features.adjacency;
  const auto d = params.w_gcn2.cols();

  const Matrix grad_top = grad_concat.leftCols(d);
  grad.w_gcn2.noalias() += trace.agg2.transpose() * grad_top;
  // The normalized adjacency is symmetric, so A^T g = A g.
  const Matrix grad_hidden = adj.multiply(grad_top * params.w_gcn2.transpose());
  const Matrix grad_pre1 = relu_mask(trace.pre1, grad_hidden);
  grad.w_gcn1.noalias() += trace.agg1.transpose() * grad_pre1;
  grad_h0 += adj.multiply(grad_pre1 * params.w_gcn1.transpose());

  const bool highway = ablation != Ablation::no_highway;
  Eigen::Index offset = d;
  if (ablation != Ablation::no_relation) {
    const auto w = trace.output.relation.cols();
    channel_backward(features.relation, trace.relation, params.relation, grad_concat.middleCols(offset, w),
                     highway, grad.relation);
    offset += w;
  }
  if (ablation != Ablation::no_attribute) {
    const auto w = trace.output.attribute.cols();
    channel_backward(features.attribute, trace.attribute, params.attribute,
                     grad_concat.middleCols(offset, w), highway, grad.attribute);
  }
}

ObjectiveValue structural_objective(const PairFeatures& features, const EncoderParams& params,
                                    std::span<const SeedPair> seeds, const NegativeBatch& negatives,
                                    double beta, Metric metric, Ablation ablation) {
  const auto source = encode_graph_traced(features.source, params.h0_source, params, ablation);
  const auto target = encode_graph_traced(features.target, params.h0_target, params, ablation);
  const auto loss = structural_loss(source.output.hybrid, target.output.hybrid, seeds, negatives, beta, metric);

  ObjectiveValue out;
  out.loss = loss.value;
  out.terms = loss.terms;
  out.active = loss.active;
  out.grad = params.zeros_like();
  encoder_backward(source, features.source, params, loss.grad_source, ablation, out.grad, out.grad.h0_source);
  encoder_backward(target, features.target, params, loss.grad_target, ablation, out.grad, out.grad.h0_target);
  return out;
}

void Adam::step(std::span<Matrix* const> params, std::span<const Matrix* const> grads) {
  require(params.size() == grads.size(), "Adam::step: parameter and gradient counts differ");
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.push_back(Matrix::Zero(p->rows(), p->cols()));
      v_.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  require(m_.size() == params.size(), "Adam::step: parameter set changed between steps");
  ++t_;
  const double correction1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = m_[i];
    auto& v = v_[i];
    const Matrix& g = *grads[i];
    require(g.rows() == params[i]->rows() && g.cols() == params[i]->cols(), "Adam::step: gradient shape mismatch");
    m = config_.beta1 * m + (1.0 - config_.beta1) * g;
    v = config_.beta2 * v + (1.0 - config_.beta2) * g.cwiseProduct(g);
    auto& p = *params[i];
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      const double mhat = m.data()[k] / correction1;
      const double vhat = v.data()[k] / correction2;
      p.data()[k] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

StructuralTrainResult train_structural(const PairFeatures& features, std::span<const SeedPair> train,
                                       const Hyperparams& hyper, Ablation ablation,
                                       const EpochCallback& on_epoch, std::optional<EncoderParams> initial) {
  hyper.validate();
  if (train.empty()) throw ConfigError("structural training needs a non-empty seed set");

  EncoderDims dims;
  dims.d = hyper.d;
  dims.h = hyper.h;
  dims.k_relation = static_cast<std::size_t>(features.source.relation.cols());
  dims.k_attribute = static_cast<std::size_t>(features.source.attribute.cols());
  dims.n_source = static_cast<std::size_t>(features.source.adjacency.n);
  dims.n_target = static_cast<std::size_t>(features.target.adjacency.n);

  StructuralTrainResult result;
  result.params = initial ? std::move(*initial) : init_encoder(dims, {hyper.rng_seed, hyper.gate_bias});
  require(result.params.dims == dims, "train_structural: initial parameters do not match the features");
  result.loss_curve.reserve(hyper.epochs);

  Adam adam({.lr = hyper.lr});
  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    const auto negatives = sample_negatives(train, dims.n_source, dims.n_target, hyper.k_neg, hyper.rng_seed, epoch);
    auto objective = structural_objective(features, result.params, train, negatives, hyper.beta, hyper.metric, ablation);

    const bool grads_finite = std::ranges::all_of(objective.grad.tensors(), [](const auto& t) { return all_finite(*t.tensor); });
    if (!std::isfinite(objective.loss) || !grads_finite) {
      std::string culprit = "hybrid embeddings";
      for (const auto& t : result.params.tensors()) {
        if (!all_finite(*t.tensor)) {
          culprit = std::string(t.name);
          break;
        }
      }
      if (culprit == "hybrid embeddings" && !grads_finite) {
        for (const auto& t : objective.grad.tensors()) {
          if (!all_finite(*t.tensor)) {
            culprit = "grad." + std::string(t.name);
            break;
          }
        }
      }
      throw NumericalError(std::string(std::isfinite(objective.loss) ? "non-finite gradient" : "non-finite structural loss") +
                           " at epoch " + std::to_string(epoch) + "; first non-finite tensor: " + culprit);
    }

    result.loss_curve.push_back(objective.loss);
    if (on_epoch) on_epoch(epoch, objective.loss);

    std::vector<Matrix*> params;
    std::vector<const Matrix*> grads;
    auto p = result.params.tensors();
    auto g = objective.grad.tensors();
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!hyper.train_h0 && (p[i].name == "h0_source" || p[i].name == "h0_target")) continue;
      params.push_back(p[i].tensor);
      grads.push_back(g[i].tensor);
    }
    adam.step(params, grads);
  }
  return result;
}

namespace {

std::vector<std::array<std::string, 3>> random_relation_rows(std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> node(0, n - 1);
  std::uniform_int_distribution<int> rel(0, 1);
  std::vector<std::array<std::string, 3>> rows;
  for (std::size_t i = 0; i < 2 * n; ++i) {
    const auto a = node(rng);
    const auto b = node(rng);
    if (a == b) continue;
    rows.push_back({"e" + std::to_string(a), "r" + std::to_string(rel(rng)), "e" + std::to_string(b)});
  }
  return rows;
}

std::vector<std::array<std::string, 3>> random_attribute_rows(std::size_t n, std::mt19937_64& rng) {
  std::bernoulli_distribution has(0.5);
  std::vector<std::array<std::string, 3>> rows;
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) {
      if (has(rng)) rows.push_back({"e" + std::to_string(i), "a" + std::to_string(k), "v"});
    }
  }
  return rows;
}

}  // namespace

GradCheckInstance make_grad_check_instance(std::size_t n, std::uint64_t rng_seed, Metric metric,
                                           Ablation ablation) {
  require(n >= 4, "make_grad_check_instance: need at least 4 entities");
  std::mt19937_64 rng(derive_seed(rng_seed, 0));
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < n; ++i) labels.push_back("e" + std::to_string(i));

  const auto rel1 = random_relation_rows(n, rng);
  const auto rel2 = random_relation_rows(n, rng);
  const auto attr1 = random_attribute_rows(n, rng);
  const auto attr2 = random_attribute_rows(n, rng);
  const Graph source = make_graph(rel1, attr1, labels);
  const Graph target = make_graph(rel2, attr2, labels);

  GradCheckInstance inst;
  inst.features = build_pair_features(source, target);
  EncoderDims dims;
  dims.d = 6;
  dims.h = 5;
  dims.k_relation = static_cast<std::size_t>(inst.features.source.relation.cols());
  dims.k_attribute = static_cast<std::size_t>(inst.features.source.attribute.cols());
  dims.n_source = n;
  dims.n_target = n;
  inst.params = init_encoder(dims, {derive_seed(rng_seed, 1), 0.0});
  std::normal_distribution<double> jitter(0.0, 0.3);
  for (auto* bias : {&inst.params.relation.b_in, &inst.params.relation.b_gate, &inst.params.relation.b_out,
                     &inst.params.attribute.b_in, &inst.params.attribute.b_gate, &inst.params.attribute.b_out}) {
    for (Eigen::Index k = 0; k < bias->size(); ++k) bias->data()[k] = jitter(rng);
  }

  std::vector<std::int32_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<std::int32_t>(i);
  std::shuffle(perm.begin(), perm.end(), rng);
  for (std::size_t i = 0; i < n / 2; ++i) inst.seeds.push_back({EntityId(static_cast<std::int32_t>(i)), EntityId(perm[i])});
  inst.negatives = sample_negatives(inst.seeds, n, n, 2, rng_seed, 0);
  inst.beta = 1.0;
  inst.metric = metric;
  inst.ablation = ablation;
  return inst;
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

GradCheckReport grad_check(const GradCheckInstance& inst, const GradCheckOptions& options) {
  auto objective = structural_objective(inst.features, inst.params, inst.seeds, inst.negatives, inst.beta,
                                        inst.metric, inst.ablation);
  if (options.corrupt_tensor) {
    bool found = false;
    for (auto& t : objective.grad.tensors()) {
      if (t.name == *options.corrupt_tensor) {
        t.tensor->array() += options.corruption;
        found = true;
      }
    }
    if (!found) throw ConfigError("grad_check: unknown tensor '" + *options.corrupt_tensor + "'");
  }

  EncoderParams probe = inst.params;
  auto probe_tensors = probe.tensors();
  const auto grad_tensors = objective.grad.tensors();
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < probe_tensors.size(); ++i) {
    if (probe_tensors[i].tensor->size() > 0) usable.push_back(i);
  }

  auto loss_at = [&]() {
    const auto s = encode_graph_traced(inst.features.source, probe.h0_source, probe, inst.ablation);
    const auto t = encode_graph_traced(inst.features.target, probe.h0_target, probe, inst.ablation);
    return structural_loss(s.output.hybrid, t.output.hybrid, inst.seeds, inst.negatives, inst.beta, inst.metric).value;
  };

  std::mt19937_64 rng(options.rng_seed);
  GradCheckReport report;
  for (std::size_t s = 0; s < options.samples; ++s) {
    // Round-robin over tensors so every tensor is probed.
    const auto ti = usable[s % usable.size()];
    Matrix& tensor = *probe_tensors[ti].tensor;
    std::uniform_int_distribution<Eigen::Index> pick(0, tensor.size() - 1);
    const auto k = pick(rng);
    const double saved = tensor.data()[k];
    tensor.data()[k] = saved + options.step;
    const double plus = loss_at();
    tensor.data()[k] = saved - options.step;
    const double minus = loss_at();
    tensor.data()[k] = saved;

    const double numeric = (plus - minus) / (2.0 * options.step);
    const double analytic = grad_tensors[ti].tensor->data()[k];
    const double err = relative_error(analytic, numeric);
    if (err >= report.max_relative_error) {
      report.max_relative_error = err;
      report.worst_tensor = std::string(probe_tensors[ti].name);
    }
    ++report.samples;
  }
  return report;
}

}  // namespace kgalign
