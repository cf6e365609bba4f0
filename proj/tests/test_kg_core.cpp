#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "kgalign/kg_core.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <map>
#include <set>

using namespace kgalign;
using testutil::TempDir;
using testutil::write_file;

TEST_CASE("two mirrored triples intern two entities and one relation") {
  TempDir dir;
  write_file(dir / "rel.tsv", "a\tlikes\tb\nb\tlikes\ta\n");
  const auto g = load_graph(dir / "rel.tsv");
  CHECK(g.entity_count() == 2);
  CHECK(g.relations.size() == 1);
  CHECK(g.triples.size() == 2);
  CHECK(g.report.relation_duplicates == 0);
}

TEST_CASE("empty triples file is rejected") {
  TempDir dir;
  write_file(dir / "rel.tsv", "");
  CHECK_THROWS_WITH_AS(load_graph(dir / "rel.tsv"), doctest::Contains("graph has no relation triples"), LoadError);
}

TEST_CASE("duplicate rows are deduplicated and counted") {
  TempDir dir;
  write_file(dir / "rel.tsv", "a\tlikes\tb\na\tlikes\tb\nb\tknows\tc\n");
  const auto g = load_graph(dir / "rel.tsv");
  CHECK(g.triples.size() == 2);
  CHECK(g.report.relation_rows == 3);
  CHECK(g.report.relation_duplicates == 1);
}

TEST_CASE("dedup count matches a multiset difference on random rows") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> pick(0, 5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::array<std::string, 3>> rows;
    for (int i = 0; i < 40; ++i) {
      rows.push_back({"e" + std::to_string(pick(rng)), "r" + std::to_string(pick(rng) % 2), "e" + std::to_string(pick(rng))});
    }
    std::map<std::array<std::string, 3>, int> counts;
    for (const auto& r : rows) ++counts[r];
    std::size_t extra = 0;
    for (const auto& [row, c] : counts) extra += static_cast<std::size_t>(c - 1);

    const auto g = make_graph(rows);
    CHECK(g.triples.size() == counts.size());
    CHECK(g.report.relation_duplicates == extra);
    std::set<std::array<std::string, 3>> stored;
    for (const auto& t : g.triples) {
      stored.insert({g.entities.label(t.head.value), g.relations.label(t.rel.value), g.entities.label(t.tail.value)});
    }
    CHECK(stored.size() == counts.size());
    for (const auto& [row, c] : counts) CHECK(stored.count(row) == 1);
  }
}

TEST_CASE("malformed rows report the line number") {
  TempDir dir;
  SUBCASE("wrong arity") {
    write_file(dir / "rel.tsv", "a\tlikes\tb\n\na\tlikes\n");
    CHECK_THROWS_WITH_AS(load_graph(dir / "rel.tsv"), doctest::Contains(":3:"), ParseError);
  }
  SUBCASE("empty field") {
    write_file(dir / "rel.tsv", "a\t\tb\n");
    CHECK_THROWS_WITH_AS(load_graph(dir / "rel.tsv"), doctest::Contains(":1:"), ParseError);
  }
  SUBCASE("attribute file") {
    write_file(dir / "rel.tsv", "a\tlikes\tb\n");
    write_file(dir / "attr.tsv", "a\tname\tAlice\nb\tname\n");
    CHECK_THROWS_WITH_AS(load_graph(dir / "rel.tsv", dir / "attr.tsv"), doctest::Contains("attr.tsv:2:"), ParseError);
  }
}

TEST_CASE("labels file fixes the id order and adds isolated entities") {
  TempDir dir;
  write_file(dir / "rel.tsv", "a\tlikes\tb\r\n");
  write_file(dir / "labels.tsv", "z\tZed\nb\na\n");
  const auto g = load_graph(dir / "rel.tsv", std::nullopt, dir / "labels.tsv");
  REQUIRE(g.entity_count() == 3);
  CHECK(g.entities.label(0) == "z");
  CHECK(g.entities.label(1) == "b");
  CHECK(g.entities.label(2) == "a");
}

TEST_CASE("interning round-trips every label") {
  const std::vector<std::array<std::string, 3>> rows = {{"x", "r", "y"}, {"y", "r", "z"}, {"w", "q", "x"}};
  const auto g = make_graph(rows);
  for (std::int32_t id = 0; id < static_cast<std::int32_t>(g.entity_count()); ++id) {
    CHECK(*g.entities.find(g.entities.label(id)) == id);
  }
  CHECK_FALSE(g.entities.find("nope").has_value());
}

TEST_CASE("loading the same files twice gives identical graphs") {
  TempDir dir;
  write_file(dir / "rel.tsv", "c\tr1\ta\na\tr2\tb\nb\tr1\tc\n");
  write_file(dir / "attr.tsv", "a\tk\t1\nc\tk\t2\n");
  const auto g1 = load_graph(dir / "rel.tsv", dir / "attr.tsv");
  const auto g2 = load_graph(dir / "rel.tsv", dir / "attr.tsv");
  CHECK(g1.entities.labels() == g2.entities.labels());
  CHECK(g1.relations.labels() == g2.relations.labels());
  REQUIRE(g1.triples.size() == g2.triples.size());
  for (std::size_t i = 0; i < g1.triples.size(); ++i) {
    CHECK(g1.triples[i].head == g2.triples[i].head);
    CHECK(g1.triples[i].rel == g2.triples[i].rel);
    CHECK(g1.triples[i].tail == g2.triples[i].tail);
  }
  CHECK(g1.attributes.size() == g2.attributes.size());
}

namespace {

struct SeedFixture {
  TempDir dir;
  Graph g1;
  Graph g2;
  SeedFixture() {
    write_file(dir / "g1.tsv", "a\tr\tb\nb\tr\tc\n");
    write_file(dir / "g2.tsv", "x\tr\ty\ny\tr\tz\n");
    g1 = load_graph(dir / "g1.tsv");
    g2 = load_graph(dir / "g2.tsv");
  }
};

}  // namespace

TEST_CASE("seed loading") {
  SeedFixture f;
  SUBCASE("three resolvable rows") {
    write_file(f.dir / "seeds.tsv", "a\tx\nb\ty\nc\tz\n");
    const auto seeds = load_seeds(f.dir / "seeds.tsv", f.g1, f.g2);
    REQUIRE(seeds.size() == 3);
    CHECK(f.g1.entities.label(seeds[2].source.value) == "c");
    CHECK(f.g2.entities.label(seeds[2].target.value) == "z");
  }
  SUBCASE("unknown g2 label names the line and label") {
    write_file(f.dir / "seeds.tsv", "a\tx\nb\tq\n");
    CHECK_THROWS_WITH_AS(load_seeds(f.dir / "seeds.tsv", f.g1, f.g2), doctest::Contains(":2: unknown g2 label 'q'"),
                         ParseError);
  }
  SUBCASE("unknown g1 label") {
    write_file(f.dir / "seeds.tsv", "q\tx\n");
    CHECK_THROWS_WITH_AS(load_seeds(f.dir / "seeds.tsv", f.g1, f.g2), doctest::Contains("unknown g1 label 'q'"),
                         ParseError);
  }
  SUBCASE("repeated g1 entity") {
    write_file(f.dir / "seeds.tsv", "a\tx\na\ty\n");
    CHECK_THROWS_WITH_AS(load_seeds(f.dir / "seeds.tsv", f.g1, f.g2), doctest::Contains("non-injective seed set"),
                         ConfigError);
  }
  SUBCASE("repeated g2 entity") {
    write_file(f.dir / "seeds.tsv", "a\tx\nb\tx\n");
    CHECK_THROWS_AS(load_seeds(f.dir / "seeds.tsv", f.g1, f.g2), ConfigError);
  }
}

namespace {

std::vector<SeedPair> identity_seeds(int n) {
  std::vector<SeedPair> s;
  for (int i = 0; i < n; ++i) s.push_back({EntityId(i), EntityId(n - 1 - i)});
  return s;
}

}  // namespace

TEST_CASE("split sizes") {
  const auto ten = identity_seeds(10);
  const auto a = split_seeds(ten, 0.3, 5);
  CHECK(a.train.size() == 3);
  CHECK(a.test.size() == 7);

  const auto hundred = identity_seeds(100);
  const auto b = split_seeds(hundred, 0.1, 5);
  CHECK(b.train.size() == 10);
  CHECK(b.test.size() == 90);
}

TEST_CASE("split is deterministic under its seed") {
  const auto ten = identity_seeds(10);
  const auto a = split_seeds(ten, 0.5, 42);
  const auto b = split_seeds(ten, 0.5, 42);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
}

TEST_CASE("split rejects bad ratios and tiny seed sets") {
  const auto ten = identity_seeds(10);
  CHECK_THROWS_AS(split_seeds(ten, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(split_seeds(ten, 1.0, 1), ConfigError);
  CHECK_THROWS_AS(split_seeds(ten, -0.2, 1), ConfigError);
  CHECK_THROWS_AS(split_seeds(identity_seeds(1), 0.5, 1), ConfigError);
}

TEST_CASE("split partitions the seeds for many ratios and rng seeds") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> size(2, 60);
  std::uniform_real_distribution<double> ratio(0.01, 0.99);
  for (int trial = 0; trial < 300; ++trial) {
    const auto seeds = identity_seeds(size(rng));
    const double r = ratio(rng);
    const auto split = split_seeds(seeds, r, rng());
    CHECK(split.train.size() == static_cast<std::size_t>(std::llround(r * static_cast<double>(seeds.size()))));
    std::set<std::int32_t> train;
    for (const auto& s : split.train) train.insert(s.source.value);
    std::set<std::int32_t> all = train;
    for (const auto& s : split.test) {
      CHECK(train.count(s.source.value) == 0);
      all.insert(s.source.value);
    }
    CHECK(all.size() == seeds.size());
    CHECK(split.train.size() + split.test.size() == seeds.size());
  }
}
