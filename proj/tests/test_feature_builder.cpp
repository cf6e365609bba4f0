#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "kgalign/feature_builder.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <map>
#include <sstream>

using namespace kgalign;
using Rows = std::vector<std::array<std::string, 3>>;

TEST_CASE("single isolated node keeps only its self-loop") {
  const Rows rows = {{"a", "self", "a"}};
  const auto adj = build_adjacency(make_graph(rows));
  REQUIRE(adj.n == 1);
  CHECK(adj.nonzeros() == 1);
  CHECK(adj.values[0] == 1.0);
}

TEST_CASE("two nodes, one edge") {
  const Rows rows = {{"a", "r", "b"}};
  const auto dense = build_adjacency(make_graph(rows)).to_dense();
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) CHECK(std::abs(dense(i, j) - 0.5) < 1e-15);
  }
}

TEST_CASE("k-regular graph stores 1/(k+1) everywhere") {
  // Ring with chords: each node linked to i±1 and i±2, so k = 4.
  Rows rows;
  const int n = 12;
  for (int i = 0; i < n; ++i) {
    rows.push_back({"v" + std::to_string(i), "r", "v" + std::to_string((i + 1) % n)});
    rows.push_back({"v" + std::to_string(i), "r", "v" + std::to_string((i + 2) % n)});
  }
  const auto g = make_graph(rows);
  const auto adj = build_adjacency(g);
  CHECK(adj.nonzeros() == static_cast<std::size_t>(n * 5));
  for (const double v : adj.values) CHECK(std::abs(v - 0.2) < 1e-15);
  CHECK((adj.to_dense() - oracle::dense_adjacency(g)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sparse adjacency matches the dense oracle and is symmetric") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> size(1, 50);
  std::uniform_real_distribution<double> density(0.0, 0.3);
  for (int trial = 0; trial < 40; ++trial) {
    const auto g = oracle::random_graph(size(rng), density(rng), rng);
    const auto adj = build_adjacency(g);
    const auto dense = adj.to_dense();
    CHECK((dense - oracle::dense_adjacency(g)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((dense - dense.transpose()).cwiseAbs().maxCoeff() == 0.0);
    for (Eigen::Index i = 0; i < dense.rows(); ++i) CHECK(dense(i, i) > 0.0);
    for (std::int32_t r = 0; r < adj.n; ++r) {
      CHECK(std::is_sorted(adj.columns.begin() + adj.row_offsets[r], adj.columns.begin() + adj.row_offsets[r + 1]));
    }
  }
}

TEST_CASE("sparse multiply equals dense product") {
  std::mt19937_64 rng(5);
  const auto g = oracle::random_graph(30, 0.1, rng);
  const auto adj = build_adjacency(g);
  const auto x = testutil::random_matrix(30, 7, rng);
  CHECK((adj.multiply(x) - adj.to_dense() * x).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("adjacency dump lists every stored entry") {
  const Rows rows = {{"a", "r", "b"}, {"b", "r", "c"}};
  const auto adj = build_adjacency(make_graph(rows));
  std::ostringstream out;
  dump_adjacency(out, adj);
  const auto text = out.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<long>(adj.nonzeros()));
}

TEST_CASE("relation feature counts") {
  SUBCASE("head of the same relation twice") {
    const Rows rows = {{"a", "likes", "b"}, {"a", "likes", "c"}};
    const auto g = make_graph(rows);
    const auto cols = relation_columns(g);
    const auto x = build_relation_features(g, cols);
    REQUIRE(x.cols() == 2);
    // Normalized (2, 0) for entity a.
    CHECK(x(0, 0) == 1.0);
    CHECK(x(0, 1) == 0.0);
  }
  SUBCASE("isolated entity has a zero row") {
    const Rows rows = {{"a", "likes", "b"}};
    const std::vector<std::string> labels = {"lonely", "a", "b"};
    const auto g = make_graph(rows, {}, labels);
    const auto x = build_relation_features(g, relation_columns(g));
    CHECK(x.row(0).squaredNorm() == 0.0);
  }
}

TEST_CASE("relation features agree with a raw count oracle") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const auto g = oracle::random_graph(25, 0.08, rng, 4);
    const auto cols = relation_columns(g);
    const auto x = build_relation_features(g, cols);
    Matrix counts = Matrix::Zero(x.rows(), x.cols());
    for (const auto& t : g.triples) {
      const auto& name = g.relations.label(t.rel.value);
      const auto slot = std::find(cols.names.begin(), cols.names.end(), name) - cols.names.begin();
      counts(t.head.value, 2 * slot) += 1;
      counts(t.tail.value, 2 * slot + 1) += 1;
    }
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double norm = counts.row(i).norm();
      if (norm == 0.0) {
        CHECK(x.row(i).squaredNorm() == 0.0);
      } else {
        CHECK((x.row(i) - counts.row(i) / norm).cwiseAbs().maxCoeff() < 1e-15);
        CHECK(std::abs(x.row(i).norm() - 1.0) < 1e-6);
      }
    }
  }
}

TEST_CASE("relation cap keeps the most frequent types, ties by interning order") {
  // Frequencies: r0:1, r1:3, r2:3, r3:2, r4:1.
  const Rows rows = {{"a", "r0", "b"}, {"a", "r1", "b"}, {"b", "r1", "c"}, {"c", "r1", "a"}, {"a", "r2", "c"},
                     {"b", "r2", "a"}, {"c", "r2", "b"}, {"a", "r3", "a"}, {"b", "r3", "c"}, {"c", "r4", "c"}};
  const auto g = make_graph(rows);
  const auto capped = relation_columns(g, 6);
  CHECK(capped.names == std::vector<std::string>{"r1", "r2", "r3"});

  // Frequency-sort oracle: uncapped list sorted by (count desc, interning order).
  std::map<std::string, int> freq;
  for (const auto& r : rows) ++freq[r[1]];
  std::vector<std::string> oracle_order = g.relations.labels();
  std::stable_sort(oracle_order.begin(), oracle_order.end(),
                   [&](const auto& a, const auto& b) { return freq[a] > freq[b]; });
  const auto uncapped = relation_columns(g, 1000);
  CHECK(uncapped.names == oracle_order);
  for (std::size_t cap = 2; cap <= 10; cap += 2) {
    const auto c = relation_columns(g, cap);
    CHECK(std::vector<std::string>(oracle_order.begin(), oracle_order.begin() + static_cast<long>(cap / 2)) == c.names);
  }
  const auto x = build_relation_features(g, capped);
  CHECK(x.cols() == 6);
}

TEST_CASE("attribute features") {
  const Rows rel = {{"a", "r", "b"}, {"b", "r", "c"}};
  const Rows attrs = {{"a", "name", "Alice"}, {"a", "year", "1990"}, {"b", "name", "Bob"}};
  const auto g = make_graph(rel, attrs);
  const auto cols = attribute_columns(g);
  const auto x = build_attribute_features(g, cols);
  REQUIRE(x.cols() == 2);
  CHECK(std::abs(x(0, 0) - 1.0 / std::sqrt(2.0)) < 1e-15);
  CHECK(std::abs(x(0, 1) - 1.0 / std::sqrt(2.0)) < 1e-15);
  CHECK(x(1, 0) == 1.0);
  CHECK(x.row(2).squaredNorm() == 0.0);
}

TEST_CASE("two graphs share the attribute column semantics") {
  const Rows rel1 = {{"a", "r", "b"}};
  const Rows rel2 = {{"x", "s", "y"}};
  const Rows attr1 = {{"a", "year", "1"}, {"b", "year", "2"}, {"a", "name", "n"}};
  const Rows attr2 = {{"x", "name", "n"}, {"y", "color", "red"}, {"x", "color", "blue"}, {"y", "name", "m"}};
  const auto g1 = make_graph(rel1, attr1);
  const auto g2 = make_graph(rel2, attr2);
  const auto f = build_pair_features(g1, g2);
  const auto& names = f.attribute_columns.names;
  // name: 3, year: 2, color: 2 (year first seen earlier).
  CHECK(names == std::vector<std::string>{"name", "year", "color"});
  auto col = [&](const std::string& key) { return std::find(names.begin(), names.end(), key) - names.begin(); };
  CHECK(f.source.attribute(0, col("year")) > 0.0);
  CHECK(f.source.attribute(0, col("color")) == 0.0);
  CHECK(f.target.attribute(1, col("color")) > 0.0);
  CHECK(f.target.attribute(1, col("year")) == 0.0);
  CHECK(f.source.relation.cols() == f.target.relation.cols());
}

TEST_CASE("initial features: truncation, determinism, mean") {
  const auto a = init_features(100, 100, 9);
  const auto b = init_features(100, 100, 9);
  CHECK((a.array() == b.array()).all());
  CHECK(a.cwiseAbs().maxCoeff() <= 2.0 / std::sqrt(100.0));
  // Truncated at two std keeps the variance at ~0.774 of the untruncated one.
  const double sd = std::sqrt(0.774) / std::sqrt(100.0);
  const double se = sd / std::sqrt(static_cast<double>(a.size()));
  CHECK(std::abs(a.mean()) < 3.0 * se);
  CHECK_FALSE((init_features(100, 100, 10).array() == a.array()).all());
}
