#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "gfm/graph.hpp"

using namespace gfm;

TEST_CASE("duplicates and self-loops are dropped and counted") {
  auto dir = fixture::temp_dir("graph_dedup");
  fixture::write_text(dir / "e.txt", "0 1\n1 2\n0 1\n# comment\n2 2\n1 0\n");
  auto loaded = load_edge_list((dir / "e.txt").string());
  CHECK(loaded.graph.node_count() == 3);
  CHECK(loaded.graph.edge_count() == 2);
  CHECK(loaded.counts.duplicates_dropped == 2);
  CHECK(loaded.counts.self_loops_dropped == 1);
}

TEST_CASE("empty and malformed edge files are rejected") {
  auto dir = fixture::temp_dir("graph_errors");
  fixture::write_text(dir / "empty.txt", "# nothing\n");
  CHECK_THROWS_WITH_AS(load_edge_list((dir / "empty.txt").string()), doctest::Contains("empty graph"), DataError);

  fixture::write_text(dir / "bad.txt", "0 1\n1 x\n");
  try {
    load_edge_list((dir / "bad.txt").string());
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  fixture::write_text(dir / "three.txt", "0 1 2\n");
  CHECK_THROWS_AS(load_edge_list((dir / "three.txt").string()), ParseError);
}

TEST_CASE("arbitrary ids are remapped in ascending order and round-trip") {
  auto dir = fixture::temp_dir("graph_ids");
  fixture::write_text(dir / "e.txt", "100 7\n7 -3\n");
  auto g = load_edge_list((dir / "e.txt").string()).graph;
  REQUIRE(g.node_count() == 3);
  CHECK(std::vector<std::int64_t>(g.original_ids().begin(), g.original_ids().end()) ==
        std::vector<std::int64_t>{-3, 7, 100});
  CHECK(g.has_edge(0, 1));
  CHECK(g.has_edge(1, 2));
  CHECK_FALSE(g.has_edge(0, 2));

  save_edge_list(g, (dir / "out.txt").string());
  auto again = load_edge_list((dir / "out.txt").string()).graph;
  save_edge_list(again, (dir / "out2.txt").string());
  CHECK(fixture::read_text(dir / "out.txt") == fixture::read_text(dir / "out2.txt"));
}

TEST_CASE("canonical files survive load and save byte for byte") {
  auto dir = fixture::temp_dir("graph_roundtrip");
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto g = fixture::random_graph(seed, 60);
    if (g.edge_count() == 0) continue;
    save_edge_list(g, (dir / "a.txt").string());
    auto loaded = load_edge_list((dir / "a.txt").string()).graph;
    save_edge_list(loaded, (dir / "b.txt").string());
    CHECK(fixture::read_text(dir / "a.txt") == fixture::read_text(dir / "b.txt"));
  }
}

TEST_CASE("CSR invariants hold on random graphs") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto g = fixture::random_graph(seed);
    std::size_t total = 0;
    for (NodeId u = 0; u < g.node_count(); ++u) {
      auto nb = g.neighbors(u);
      total += nb.size();
      CHECK(std::is_sorted(nb.begin(), nb.end()));
      CHECK(std::adjacent_find(nb.begin(), nb.end()) == nb.end());
      for (NodeId v : nb) {
        CHECK(v != u);
        CHECK(g.has_edge(v, u));
      }
    }
    CHECK(total == 2 * g.edge_count());
  }
}

TEST_CASE("out of range edges are rejected") {
  std::vector<std::pair<NodeId, NodeId>> e{{0, 5}};
  CHECK_THROWS_AS(Graph::from_edges(3, e), DataError);
}

TEST_CASE("feature, label and split dimensions are checked") {
  auto g = fixture::path(3);
  CHECK_THROWS_AS(g.with_features(Matrix::Zero(2, 4)), DimensionError);
  CHECK_THROWS_AS(g.with_labels(LabelMatrix::Zero(4, 1)), DimensionError);
  CHECK_THROWS_AS(g.with_split({SplitTag::train}), DimensionError);

  auto dir = fixture::temp_dir("graph_feat");
  fixture::write_text(dir / "e.txt", "0 1\n1 2\n");
  fixture::write_text(dir / "x.txt", "1 2\n3 4\n");
  CHECK_THROWS_AS(load_edge_list((dir / "e.txt").string(), (dir / "x.txt").string()), DimensionError);
  fixture::write_text(dir / "split.txt", "train\ntest\n");
  CHECK_THROWS_AS(load_split((dir / "split.txt").string(), 3), DimensionError);
}

TEST_CASE("SBM with certain probabilities gives disjoint cliques") {
  std::vector<std::size_t> blocks{5, 5};
  auto g = generate_sbm(blocks, 1.0, 0.0, 7);
  CHECK(g.node_count() == 10);
  CHECK(g.edge_count() == 20);
  REQUIRE(g.labels());
  CHECK(g.labels()->cols() == 2);
  for (Eigen::Index i = 0; i < 10; ++i) {
    CHECK((*g.labels())(i, i < 5 ? 0 : 1) == 1);
    CHECK((*g.labels())(i, i < 5 ? 1 : 0) == 0);
  }
  std::vector<std::size_t> one{1};
  auto single = generate_sbm(one, 0.5, 0.1, 1);
  CHECK(single.node_count() == 1);
  CHECK(single.edge_count() == 0);
}

TEST_CASE("SBM edge count lies within three standard deviations") {
  std::vector<std::size_t> blocks{50, 50};
  auto g = generate_sbm(blocks, 0.3, 0.01, 42);
  const double in_pairs = 2.0 * 50 * 49 / 2, out_pairs = 2500;
  const double mean = 0.3 * in_pairs + 0.01 * out_pairs;
  const double sd = std::sqrt(0.3 * 0.7 * in_pairs + 0.01 * 0.99 * out_pairs);
  CHECK(mean == doctest::Approx(760));
  CHECK(std::abs(static_cast<double>(g.edge_count()) - mean) <= 3 * sd);
  CHECK(generate_sbm(blocks, 0.3, 0.01, 42).edges() == g.edges());
}

TEST_CASE("SBM rejects p_in below p_out") {
  std::vector<std::size_t> blocks{5, 5};
  CHECK_THROWS_AS(generate_sbm(blocks, 0.1, 0.2, 1), ConfigError);
}

TEST_CASE("random split takes exact counts") {
  auto g = generate_gnp(100, 0.05, 3);
  auto s = make_split(g, SplitSpec{});
  CHECK(s.nodes_in(SplitTag::train).size() == 80);
  CHECK(s.nodes_in(SplitTag::valid).size() == 10);
  CHECK(s.nodes_in(SplitTag::test).size() == 10);

  SplitSpec odd;
  odd.train = 0.5;
  odd.valid = 0.25;
  odd.test = 0.25;
  auto s7 = make_split(generate_gnp(7, 0.5, 1), odd);
  const auto a = s7.nodes_in(SplitTag::train).size(), b = s7.nodes_in(SplitTag::valid).size(),
             c = s7.nodes_in(SplitTag::test).size();
  CHECK(a + b + c == 7);
  // Floors 3, 1, 1; the two leftover nodes go to the largest fractional parts.
  CHECK(a == 3);
  CHECK(b == 2);
  CHECK(c == 2);

  SplitSpec bad;
  bad.train = 0.7;
  CHECK_THROWS_AS(make_split(g, bad), ConfigError);
}

TEST_CASE("disjoint class split keeps test classes out of train") {
  std::vector<std::size_t> blocks{10, 10, 10};
  auto g = generate_sbm(blocks, 0.5, 0.1, 9);
  SplitSpec spec;
  spec.mode = SplitSpec::Mode::disjoint_label_classes;
  spec.train_classes = {0, 1};
  spec.test_classes = {2};
  auto s = make_split(g, spec);
  for (NodeId u : s.nodes_in(SplitTag::train)) CHECK((*g.labels())(u, 2) == 0);
  CHECK(s.nodes_in(SplitTag::test).size() == 10);

  SplitSpec twice = spec;
  twice.valid_classes = {1};
  CHECK_THROWS_AS(make_split(g, twice), ConfigError);
}

TEST_CASE("provided split must match node count") {
  SplitSpec spec;
  spec.mode = SplitSpec::Mode::provided;
  spec.provided = {SplitTag::train, SplitTag::test};
  CHECK_THROWS(make_split(fixture::path(3), spec));
}

TEST_CASE("disjoint union offsets node ids") {
  std::vector<Graph> parts{fixture::clique(3), fixture::path(2)};
  auto u = disjoint_union(parts);
  CHECK(u.node_count() == 5);
  CHECK(u.edge_count() == 4);
  CHECK(u.has_edge(3, 4));
  CHECK_FALSE(u.has_edge(2, 3));
}

TEST_CASE("topology hash ignores attributes and input order") {
  std::vector<std::pair<NodeId, NodeId>> a{{0, 1}, {1, 2}}, b{{2, 1}, {1, 0}};
  auto ga = Graph::from_edges(3, a), gb = Graph::from_edges(3, b);
  CHECK(ga.topology_hash() == gb.topology_hash());
  CHECK(ga.with_features(Matrix::Ones(3, 2)).topology_hash() == ga.topology_hash());
  CHECK(Graph::from_edges(4, a).topology_hash() != ga.topology_hash());
}
