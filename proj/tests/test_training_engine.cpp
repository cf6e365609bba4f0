#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "kgalign/synth.hpp"
#include "kgalign/training_engine.hpp"
#include "test_util.hpp"

#include <set>

using namespace kgalign;
using testutil::random_matrix;

namespace {

Matrix rows_of(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (const double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

// Pair features plus the full gold alignment of a synthetic twin-graph dataset.
struct SynthTask {
  PairFeatures features;
  std::vector<SeedPair> gold;
};

SynthTask synth_task(const SynthSpec& spec) {
  const auto data = generate_synth(spec);
  const auto g1 = make_graph(data.source.relations, data.source.attributes, data.source.labels);
  const auto g2 = make_graph(data.target.relations, data.target.attributes, data.target.labels);
  SynthTask t{build_pair_features(g1, g2), {}};
  for (const auto& [a, b] : data.gold) t.gold.push_back({EntityId(*g1.entities.find(a)), EntityId(*g2.entities.find(b))});
  return t;
}

bool bit_identical(const EncoderParams& a, const EncoderParams& b) {
  const auto ta = a.tensors();
  const auto tb = b.tensors();
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i].tensor->rows() != tb[i].tensor->rows() || ta[i].tensor->cols() != tb[i].tensor->cols()) return false;
    if (!(ta[i].tensor->array() == tb[i].tensor->array()).all()) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("metric names") {
  for (const auto m : {Metric::l1, Metric::l2, Metric::cosine}) CHECK(parse_metric(to_string(m)) == m);
  CHECK(to_string(Metric::cosine) == "cos");
  CHECK_THROWS_AS(parse_metric("l3"), ConfigError);
}

TEST_CASE("distances") {
  Eigen::RowVectorXd a(3), b(3);
  a << 1, 0, 2;
  b << 0, 2, 2;
  CHECK(distance(Metric::l1, a, b) == 3.0);
  CHECK(std::abs(distance(Metric::l2, a, b) - std::sqrt(5.0)) < 1e-15);
  CHECK(std::abs(distance(Metric::cosine, a, b) - (1.0 - 4.0 / (std::sqrt(5.0) * std::sqrt(8.0)))) < 1e-15);
  CHECK(distance(Metric::cosine, a, a) == doctest::Approx(0.0));
}

TEST_CASE("hinge boundary and arithmetic") {
  NegativeBatch negs;
  negs.pairs.push_back({0, EntityId(0), EntityId(1)});
  const std::vector<SeedPair> seeds = {{EntityId(0), EntityId(0)}};

  SUBCASE("positive 0, negative beta gives 0") {
    const auto src = rows_of({{0, 0}});
    const auto tgt = rows_of({{0, 0}, {1, 2}});
    const auto loss = structural_loss(src, tgt, seeds, negs, 3.0, Metric::l1);
    CHECK(loss.value == 0.0);
    CHECK(loss.active == 0);
    CHECK(loss.grad_source.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("positive 1, beta 3, negative 2 gives 2") {
    const auto src = rows_of({{0, 0}});
    const auto tgt = rows_of({{1, 0}, {1, 1}});
    const auto loss = structural_loss(src, tgt, seeds, negs, 3.0, Metric::l1);
    CHECK(loss.value == 2.0);
    CHECK(loss.terms == 1);
    CHECK(loss.active == 1);
  }
}

TEST_CASE("structural loss equals a brute-force re-evaluation") {
  std::mt19937_64 rng(17);
  for (const auto metric : {Metric::l1, Metric::l2, Metric::cosine}) {
    for (int trial = 0; trial < 10; ++trial) {
      const int n = 12;
      const auto src = random_matrix(n, 5, rng);
      const auto tgt = random_matrix(n, 5, rng);
      std::vector<SeedPair> seeds;
      for (int i = 0; i < 4; ++i) seeds.push_back({EntityId(i), EntityId((i * 5) % n)});
      const auto negs = sample_negatives(seeds, n, n, 3, rng(), 0);
      const double beta = metric == Metric::cosine ? 0.4 : 2.0;

      double total = 0.0;
      std::size_t count = 0;
      std::size_t active = 0;
      for (std::size_t s = 0; s < seeds.size(); ++s) {
        const double pos = distance(metric, src.row(seeds[s].source.value), tgt.row(seeds[s].target.value));
        for (const auto& neg : negs.pairs) {
          if (neg.seed_index != s) continue;
          const double term = std::max(0.0, pos + beta - distance(metric, src.row(neg.source.value), tgt.row(neg.target.value)));
          total += term;
          active += term > 0.0;
          ++count;
        }
      }
      const auto loss = structural_loss(src, tgt, seeds, negs, beta, metric);
      CHECK(loss.terms == count);
      CHECK(loss.active == active);
      CHECK(std::abs(loss.value - total / static_cast<double>(count)) < 1e-12);
      CHECK(loss.value >= 0.0);
      CHECK((loss.value == 0.0) == (loss.active == 0));
    }
  }
}

TEST_CASE("structural loss rejects empty inputs") {
  const Matrix m = Matrix::Ones(3, 2);
  NegativeBatch negs;
  negs.pairs.push_back({0, EntityId(1), EntityId(0)});
  CHECK_THROWS_AS(structural_loss(m, m, {}, negs, 1.0, Metric::l1), ConfigError);
  const std::vector<SeedPair> seeds = {{EntityId(0), EntityId(0)}};
  CHECK_THROWS_AS(structural_loss(m, m, seeds, NegativeBatch{}, 1.0, Metric::l1), ConfigError);
}

TEST_CASE("negative sampling") {
  const std::vector<SeedPair> seeds = {{EntityId(0), EntityId(3)}, {EntityId(1), EntityId(4)}, {EntityId(2), EntityId(5)}};
  SUBCASE("count and side layout") {
    const auto b = sample_negatives(seeds, 20, 20, 5, 1, 0);
    REQUIRE(b.pairs.size() == 30);
    for (std::size_t s = 0; s < 3; ++s) {
      std::size_t left = 0;
      std::size_t right = 0;
      for (const auto& p : b.pairs) {
        if (p.seed_index != s) continue;
        if (p.target == seeds[s].target) ++left;
        if (p.source == seeds[s].source) ++right;
      }
      CHECK(left == 5);
      CHECK(right == 5);
    }
  }
  SUBCASE("determinism and epoch dependence") {
    const auto a = sample_negatives(seeds, 20, 20, 5, 9, 4);
    const auto b = sample_negatives(seeds, 20, 20, 5, 9, 4);
    const auto c = sample_negatives(seeds, 20, 20, 5, 9, 5);
    auto key = [](const NegativeBatch& x) {
      std::vector<std::tuple<std::size_t, int, int>> k;
      for (const auto& p : x.pairs) k.emplace_back(p.seed_index, p.source.value, p.target.value);
      return k;
    };
    CHECK(key(a) == key(b));
    CHECK(key(a) != key(c));
  }
  SUBCASE("corruptions never reproduce a seed pair") {
    // Dense seed set on a tiny graph makes accidental hits frequent.
    std::vector<SeedPair> dense;
    for (int i = 0; i < 7; ++i) dense.push_back({EntityId(i), EntityId((i + 2) % 7)});
    std::set<std::pair<int, int>> seed_set;
    for (const auto& s : dense) seed_set.insert({s.source.value, s.target.value});
    for (std::uint64_t epoch = 0; epoch < 50; ++epoch) {
      for (const auto& p : sample_negatives(dense, 7, 7, 5, 3, epoch).pairs) {
        CHECK(seed_set.count({p.source.value, p.target.value}) == 0);
      }
    }
  }
  SUBCASE("graph too small") {
    CHECK_THROWS_AS(sample_negatives(seeds, 5, 20, 5, 1, 0), ConfigError);
  }
}

TEST_CASE("analytic gradients match finite differences") {
  for (const auto metric : {Metric::l1, Metric::l2, Metric::cosine}) {
    for (const auto ablation : {Ablation::none, Ablation::no_relation, Ablation::no_attribute, Ablation::no_highway}) {
      CAPTURE(to_string(metric));
      CAPTURE(to_string(ablation));
      const auto instance = make_grad_check_instance(8, 3, metric, ablation);
      const auto report = grad_check(instance);
      CHECK(report.samples >= 50);
      CHECK(report.max_relative_error < 1e-4);
    }
  }
}

TEST_CASE("corrupted gradients are detected") {
  const auto instance = make_grad_check_instance(8, 1);
  for (const char* name : {"w_gcn1", "rel.w_gate", "attr.b_out", "h0_target"}) {
    GradCheckOptions opt;
    opt.corrupt_tensor = name;
    CAPTURE(name);
    CHECK(grad_check(instance, opt).max_relative_error > 1e-2);
  }
}

TEST_CASE("relative error definition") {
  CHECK(relative_error(1.0, 1.0) == 0.0);
  CHECK(relative_error(2.0, 1.0) == 0.5);
  CHECK(relative_error(0.0, 1e-9) == doctest::Approx(1e-3));
}

TEST_CASE("no learning signal gives an exactly zero gradient") {
  auto instance = make_grad_check_instance(8, 2);
  NegativeBatch same;
  for (std::size_t s = 0; s < instance.seeds.size(); ++s) {
    same.pairs.push_back({s, instance.seeds[s].source, instance.seeds[s].target});
  }
  const auto obj = structural_objective(instance.features, instance.params, instance.seeds, same, 0.0, Metric::l1,
                                        Ablation::none);
  CHECK(obj.loss == 0.0);
  for (const auto& t : obj.grad.tensors()) {
    CAPTURE(t.name);
    CHECK(t.tensor->cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("Adam matches a scalar reference and ignores zero gradients") {
  std::mt19937_64 rng(21);
  Matrix p = random_matrix(3, 4, rng);
  Matrix frozen = random_matrix(2, 2, rng);
  const Matrix frozen_before = frozen;
  std::vector<double> ref(p.data(), p.data() + p.size());
  std::vector<double> m(ref.size(), 0.0), v(ref.size(), 0.0);
  Adam adam({.lr = 0.01});
  for (int t = 1; t <= 5; ++t) {
    const Matrix g = random_matrix(3, 4, rng);
    const Matrix zero = Matrix::Zero(2, 2);
    Matrix* params[] = {&p, &frozen};
    const Matrix* grads[] = {&g, &zero};
    adam.step(params, grads);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      m[i] = 0.9 * m[i] + 0.1 * g.data()[i];
      v[i] = 0.999 * v[i] + 0.001 * g.data()[i] * g.data()[i];
      const double mhat = m[i] / (1.0 - std::pow(0.9, t));
      const double vhat = v[i] / (1.0 - std::pow(0.999, t));
      ref[i] -= 0.01 * mhat / (std::sqrt(vhat) + 1e-8);
    }
  }
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(p.data()[i] - ref[i]) < 1e-14);
  CHECK((frozen.array() == frozen_before.array()).all());
  CHECK(adam.steps() == 5);
}

TEST_CASE("training on the synthetic twin graphs") {
  SynthSpec spec;
  const auto task = synth_task(spec);
  std::vector<SeedPair> train(task.gold.begin(), task.gold.begin() + 60);

  SUBCASE("loss halves within 100 epochs") {
    Hyperparams hp;
    hp.epochs = 100;
    const auto r = train_structural(task.features, train, hp);
    REQUIRE(r.loss_curve.size() == 100);
    MESSAGE("initial " << r.loss_curve.front() << ", final " << r.loss_curve.back());
    CHECK(r.loss_curve.back() < 0.5 * r.loss_curve.front());
  }
  SUBCASE("lr 0 leaves every parameter bit-identical") {
    Hyperparams hp;
    hp.d = hp.h = 16;
    hp.epochs = 5;
    hp.lr = 0.0;
    const auto r = train_structural(task.features, train, hp);
    EncoderDims dims{16, 16, static_cast<std::size_t>(task.features.source.relation.cols()),
                     static_cast<std::size_t>(task.features.source.attribute.cols()), 200, 200};
    CHECK(bit_identical(r.params, init_encoder(dims, {hp.rng_seed, hp.gate_bias})));
  }
  SUBCASE("same config and seed give identical curves and parameters") {
    Hyperparams hp;
    hp.d = hp.h = 32;
    hp.epochs = 15;
    const auto a = train_structural(task.features, train, hp);
    const auto b = train_structural(task.features, train, hp);
    CHECK(a.loss_curve == b.loss_curve);
    CHECK(bit_identical(a.params, b.params));
  }
  SUBCASE("frozen initial features stay put") {
    Hyperparams hp;
    hp.d = hp.h = 16;
    hp.epochs = 5;
    hp.train_h0 = false;
    const auto r = train_structural(task.features, train, hp);
    EncoderDims dims{16, 16, static_cast<std::size_t>(task.features.source.relation.cols()),
                     static_cast<std::size_t>(task.features.source.attribute.cols()), 200, 200};
    const auto init = init_encoder(dims, {hp.rng_seed, hp.gate_bias});
    CHECK((r.params.h0_source.array() == init.h0_source.array()).all());
    CHECK_FALSE((r.params.w_gcn1.array() == init.w_gcn1.array()).all());
  }
  SUBCASE("non-finite parameters abort with the tensor name") {
    Hyperparams hp;
    hp.d = hp.h = 8;
    hp.epochs = 3;
    EncoderDims dims{8, 8, static_cast<std::size_t>(task.features.source.relation.cols()),
                     static_cast<std::size_t>(task.features.source.attribute.cols()), 200, 200};
    auto init = init_encoder(dims, {1, -1.0});
    init.w_gcn2(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(train_structural(task.features, train, hp, Ablation::none, {}, init),
                         doctest::Contains("w_gcn2"), NumericalError);
  }
  SUBCASE("empty seed set") {
    Hyperparams hp;
    CHECK_THROWS_AS(train_structural(task.features, {}, hp), ConfigError);
  }
}

TEST_CASE("hyperparameter validation") {
  Hyperparams hp;
  CHECK_NOTHROW(hp.validate());
  hp.beta = 0.0;
  CHECK_THROWS_AS(hp.validate(), ConfigError);
  hp = {};
  hp.tau = 1.5;
  CHECK_THROWS_AS(hp.validate(), ConfigError);
  hp = {};
  hp.k_neg = 0;
  CHECK_THROWS_AS(hp.validate(), ConfigError);
}
