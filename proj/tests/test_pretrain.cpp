#include <doctest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "gfm/hash.hpp"
#include "gfm/pretrain.hpp"
#include "gfm/prompt.hpp"
#include "oracles.hpp"

using namespace gfm;

namespace {

PretrainGraph sbm_graph(const std::string& id, std::uint64_t seed, std::size_t block = 20) {
  std::vector<std::size_t> blocks{block, block};
  Graph g = generate_sbm(blocks, 0.4, 0.05, seed);
  auto table = compute_profiles(g);
  Matrix ctx = HashedEncoder(42).encode_all(render_prompts(table));
  return {id, g, ctx};
}

ModelConfig tiny() {
  ModelConfig c;
  c.hidden_dim = 16;
  c.sage_hidden = 12;
  c.embed_dim = 8;
  return c;
}

PretrainConfig quick() {
  PretrainConfig c;
  c.epochs = 2;
  c.steps_per_epoch = 3;
  c.anchor_batch = 16;
  c.topk = 8;
  c.lr = 1e-3;
  return c;
}

}  // namespace

TEST_CASE("config parsing accepts known keys and rejects unknown ones") {
  auto c = parse_pretrain_config("# comment\nepochs = 3\ntemperature=0.2\n\nseed=7\n");
  CHECK(c.epochs == 3);
  CHECK(c.temperature == 0.2);
  CHECK(c.seed == 7);
  CHECK(c.steps_per_epoch == 128);
  CHECK_THROWS_WITH_AS(parse_pretrain_config("epoch=3\n"), doctest::Contains("temperature"), ConfigError);
  CHECK_THROWS_AS(parse_pretrain_config("temperature=0\n"), ConfigError);
  CHECK_THROWS_AS(parse_pretrain_config("epochs=abc\n"), ConfigError);
  auto kv = to_key_values(PretrainConfig{});
  CHECK(kv.at("lr") == "1e-05");
  PretrainConfig round;
  for (const auto& [k, v] : kv) set_pretrain_option(round, k, v);
  CHECK(to_key_values(round) == kv);
}

TEST_CASE("defaults follow the published training recipe") {
  PretrainConfig c;
  CHECK(c.epochs == 250);
  CHECK(c.steps_per_epoch == 128);
  CHECK(c.anchor_batch == 1024);
  CHECK(c.temperature == 0.1);
  CHECK(c.smoothing == 5e-3);
  CHECK(c.restart == 0.15);
  CHECK(c.ppr_iters == 100);
  CHECK(c.topk == 96);
  CHECK(c.neg_samples == 1024);
  CHECK(c.large_graph_threshold == 20000);
  CHECK(c.lr == 1e-5);
  CHECK(c.weight_decay == 5e-4);
  CHECK(c.seed == 42);
}

TEST_CASE("PPR matches dense power iteration") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    auto g = fixture::random_graph(seed, 60);
    auto a = oracle::adjacency(g);
    for (NodeId anchor = 0; anchor < g.node_count(); anchor += 7) {
      auto r = ppr_scores(g, anchor);
      auto dense = oracle::ppr(a, anchor, 0.15, 100);
      double total = 0;
      for (NodeId u = 0; u < g.node_count(); ++u) {
        CHECK(std::abs(r[u] - dense[u]) < 1e-9);
        total += r[u];
      }
      CHECK(std::abs(total - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("PPR top-k excludes the anchor and breaks ties by id") {
  auto s = fixture::star(5);
  auto top = ppr_topk(s, 0, 0.15, 100, 3);
  REQUIRE(top.size() == 3);
  CHECK(top[0].node == 1);
  CHECK(top[1].node == 2);
  CHECK(top[2].node == 3);
  CHECK(top[0].score == top[2].score);
  auto index = build_ppr_index(s, 0.15, 100, 10);
  CHECK(index.width == 5);
  for (NodeId a = 0; a < 6; ++a) {
    for (NodeId p : index.positives(a)) CHECK(p != a);
  }
}

TEST_CASE("PPR index is independent of the thread count and caches to disk") {
  auto g = fixture::random_graph(4, 120);
  auto one = build_ppr_index(g, 0.15, 50, 10, 1);
  auto many = build_ppr_index(g, 0.15, 50, 10, 4);
  CHECK(one.nodes == many.nodes);
  CHECK(one.scores == many.scores);

  auto dir = fixture::temp_dir("ppr_cache");
  const auto key = ppr_cache_key(g, 0.15, 50, 10);
  save_ppr_index(one, key, (dir / "p.bin").string());
  auto back = load_ppr_index((dir / "p.bin").string(), key);
  REQUIRE(back);
  CHECK(back->nodes == one.nodes);
  CHECK_FALSE(load_ppr_index((dir / "p.bin").string(), key + 1));
  CHECK_FALSE(load_ppr_index((dir / "absent.bin").string(), key));
  CHECK(key != ppr_cache_key(g, 0.2, 50, 10));

  PretrainConfig cfg;
  cfg.ppr_iters = 50;
  cfg.topk = 10;
  auto cached = cached_ppr_index(g, cfg, (dir / "c").string());
  auto again = cached_ppr_index(g, cfg, (dir / "c").string());
  CHECK(cached.nodes == again.nodes);
  CHECK(std::filesystem::exists(dir / "c" / ("ppr_" + to_hex(key) + ".bin")));
}

TEST_CASE("InfoNCE reduces to log of the bank size for uniform similarities") {
  const std::vector<NodeId> anchors{0, 3, 5}, positives{1, 2, 6};
  Matrix zero = Matrix::Zero(7, 4);
  CHECK(std::abs(infonce_symmetric(zero, zero, anchors, positives, 0.1) - std::log(7.0)) < 1e-9);
}

TEST_CASE("InfoNCE closed form with four candidates") {
  Matrix g = Matrix::Zero(4, 2), z = Matrix::Zero(4, 2);
  g.col(0) << 1, -1, -1, -1;
  z.col(0) << -1, 1, -1, -1;
  const std::vector<NodeId> a{0}, p{1};
  const double expected = std::log1p(3.0 * std::exp(-20.0));
  CHECK(std::abs(infonce_symmetric(g, z, a, p, 0.1) - expected) < 1e-12);
}

TEST_CASE("InfoNCE is symmetric under swapping streams and roles") {
  Rng rng(9);
  Matrix g = oracle::random_matrix(rng, 10, 5), z = oracle::random_matrix(rng, 10, 5);
  const std::vector<NodeId> a{0, 4, 7, 9}, p{3, 1, 8, 2};
  CHECK(infonce_symmetric(g, z, a, p, 0.1) == infonce_symmetric(z, g, p, a, 0.1));
}

TEST_CASE("sampled candidates always include the pair's target") {
  Matrix g = Matrix::Zero(6, 2), z = Matrix::Zero(6, 2);
  const std::vector<NodeId> a{0}, p{5}, cands{1, 2};
  // Bank is {1, 2} plus the target, so three uniform logits.
  CHECK(std::abs(infonce_symmetric(g, z, a, p, 0.1, cands) - std::log(3.0)) < 1e-12);
}

TEST_CASE("Laplacian smoothing matches a direct edge sum") {
  auto graph = fixture::random_graph(6, 40);
  Rng rng(2);
  Matrix g = oracle::random_matrix(rng, static_cast<Eigen::Index>(graph.node_count()), 3);
  double direct = 0;
  for (auto [u, v] : graph.edges()) direct += (g.row(u) - g.row(v)).squaredNorm();
  direct *= 0.005 / static_cast<double>(graph.edge_count());
  CHECK(std::abs(laplacian_smoothing(g, graph, 0.005) - direct) < 1e-12);
  CHECK(laplacian_smoothing(g.topRows(1), fixture::clique(1), 0.005) == 0.0);
}

TEST_CASE("pretraining is deterministic and resumable") {
  std::vector<PretrainGraph> graphs{sbm_graph("a", 1), sbm_graph("b", 2)};
  auto cfg = quick();
  std::vector<std::uint64_t> seen;
  auto r1 = pretrain(graphs, cfg, std::nullopt, {}, [&](const LossRecord& r) { seen.push_back(r.step); }, tiny());
  auto r2 = pretrain(graphs, cfg, std::nullopt, {}, {}, tiny());
  CHECK(seen.size() == 6);
  REQUIRE(r1.history.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) CHECK(r1.history[i].loss.total == r2.history[i].loss.total);
  CHECK(backbone_checksum(r1.last) == backbone_checksum(r2.last));
  CHECK(r1.last.adapters.size() == 2);
  CHECK(r1.last.step == 6);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& h : r1.history) best = std::min(best, h.loss.total);
  CHECK(r1.best_loss == best);

  auto zero = cfg;
  zero.epochs = 0;
  auto same = pretrain(graphs, zero, r1.last, {}, {}, tiny());
  CHECK(backbone_checksum(same.last) == backbone_checksum(r1.last));

  // Three steps then three more equals six in one go.
  auto half = cfg;
  half.epochs = 1;
  auto first = pretrain(graphs, half, std::nullopt, {}, {}, tiny());
  auto second = pretrain(graphs, half, first.last, {}, {}, tiny());
  CHECK(backbone_checksum(second.last) == backbone_checksum(r1.last));
}

TEST_CASE("non-finite inputs raise a numeric error") {
  auto data = sbm_graph("bad", 3);
  data.context(0, 0) = std::numeric_limits<double>::quiet_NaN();
  std::vector<PretrainGraph> graphs{data};
  CHECK_THROWS_AS(pretrain(graphs, quick(), std::nullopt, {}, {}, tiny()), NumericError);
}

TEST_CASE("loss history file has one row per step") {
  std::vector<LossRecord> h{{1, "a", {1.0, 0.5, 1.5}}, {2, "b", {2.0, 0.25, 2.25}}};
  auto dir = fixture::temp_dir("loss_hist");
  write_loss_history(h, (dir / "h.tsv").string());
  CHECK(fixture::read_text(dir / "h.tsv") == "step\tgraph_id\tnce\tsmooth\ttotal\n1\ta\t1\t0.5\t1.5\n2\tb\t2\t0.25\t2.25\n");
}
