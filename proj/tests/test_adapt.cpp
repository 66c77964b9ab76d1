#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "gfm/adapt.hpp"
#include "gfm/prompt.hpp"
#include "oracles.hpp"

using namespace gfm;

namespace {

ModelConfig tiny() {
  ModelConfig c;
  c.hidden_dim = 16;
  c.sage_hidden = 12;
  c.embed_dim = 8;
  return c;
}

Graph labelled_sbm(std::uint64_t seed, std::size_t block = 30) {
  std::vector<std::size_t> blocks{block, block};
  Graph g = generate_sbm(blocks, 0.4, 0.03, seed);
  return make_split(g, SplitSpec{.seed = seed});
}

Matrix context_for(const Graph& g) { return HashedEncoder(42).encode_all(render_prompts(compute_profiles(g))); }

/// Embeddings where column 0 carries the label signal with noise.
Matrix separable(const LabelMatrix& labels, double noise, std::uint64_t seed) {
  Rng rng(seed);
  Matrix e = oracle::random_matrix(rng, labels.rows(), 4);
  for (Eigen::Index i = 0; i < labels.rows(); ++i) e(i, 0) = (labels(i, 0) ? 1.0 : -1.0) + noise * e(i, 0);
  return e;
}

}  // namespace

TEST_CASE("adaptation defaults and option parsing") {
  AdaptConfig c;
  CHECK(c.tune_steps == 2000);
  CHECK(c.lr_backbone == 1e-5);
  CHECK(c.lr_projection == 1e-5);
  CHECK(c.lr_adapter == 1e-4);
  CHECK(c.lr_head == 1e-3);
  CHECK(c.k_grid == std::vector<std::size_t>{1, 5, 10, 20});
  CHECK(set_adapt_option(c, "k_grid", "3,5,7,10,15,20"));
  CHECK(c.k_grid == std::vector<std::size_t>{3, 5, 7, 10, 15, 20});
  CHECK_FALSE(set_adapt_option(c, "epochs", "3"));
  CHECK_THROWS_AS(set_adapt_option(c, "tune_steps", "-1"), ConfigError);
  AdaptConfig round;
  for (const auto& [k, v] : to_key_values(c)) set_adapt_option(round, k, v);
  CHECK(to_key_values(round) == to_key_values(c));
}

TEST_CASE("new adapters start from the mean of the pretrained ones") {
  auto cfg = tiny();
  auto model = init_model(cfg, 1);
  CHECK_THROWS_AS(init_adapter_from_mean(model, "t", 0, 1), ConfigError);
  model.adapters.emplace("a", make_adapter("a", 3, cfg, 2));
  model.adapters.emplace("b", make_adapter("b", 0, cfg, 3));
  model.adapters.at("a").bias.value.setConstant(1.0);
  auto fresh = init_adapter_from_mean(model, "t", 2, 4);
  CHECK(fresh.weight.value.rows() == 2 + 384);
  CHECK(fresh.weight.name.find("t") != std::string::npos);
  const Matrix expected = 0.5 * (model.adapters.at("a").weight.value.bottomRows(384) +
                                 model.adapters.at("b").weight.value.bottomRows(384));
  CHECK((fresh.weight.value.bottomRows(384) - expected).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(fresh.bias.value(0, 0) == 0.5);
}

TEST_CASE("unlabeled tuning changes only the adapter") {
  auto cfg = tiny();
  auto model = init_model(cfg, 1);
  model.adapters.emplace("a", make_adapter("a", 0, cfg, 2));
  Graph g = labelled_sbm(5);
  PretrainGraph data{"t", g, context_for(g)};
  PretrainConfig loss;
  loss.anchor_batch = 32;
  loss.topk = 8;
  auto ppr = build_ppr_index(g, loss.restart, loss.ppr_iters, loss.topk);
  auto adapter = init_adapter_from_mean(model, "t", 0, 3);
  const auto before = backbone_checksum(model);
  const Matrix w0 = adapter.weight.value;
  auto result = tune_adapter_unlabeled(model, adapter, data, ppr, loss, 5, 1e-3, 42);
  CHECK(backbone_checksum(model) == before);
  CHECK(adapter.weight.value != w0);
  CHECK(result.history.size() == 5);
  CHECK(std::isfinite(result.final.total));
}

TEST_CASE("logistic probe separates an easy signal") {
  Graph g = labelled_sbm(3, 50);
  const auto& labels = *g.labels();
  Matrix e = separable(labels, 0.3, 1);
  auto r = zero_shot_probe(e, labels, *g.split(), AdaptConfig{});
  REQUIRE(r.report.mean_auc);
  CHECK(*r.report.mean_auc > 0.95);
  CHECK(r.report.labels.size() == 2);
  CHECK(r.report.macro_roc);
  CHECK(r.probe.predict(e).rows() == e.rows());
}

TEST_CASE("labels with a single class are skipped") {
  Graph g = labelled_sbm(4);
  LabelMatrix labels = *g.labels();
  labels.col(1).setZero();
  auto r = zero_shot_probe(separable(labels, 0.3, 2), labels, *g.split(), AdaptConfig{});
  CHECK(r.report.labels[1].valid == false);
  CHECK_FALSE(r.report.labels[1].auc);
  CHECK(r.report.labels[0].auc);
}

TEST_CASE("few-shot curve has one row per K") {
  Graph g = labelled_sbm(6, 50);
  const auto& labels = *g.labels();
  AdaptConfig cfg;
  cfg.few_shot_seeds = 3;
  auto rows = few_shot_curve(separable(labels, 3.0, 3), labels, *g.split(), cfg);
  REQUIRE(rows.size() == 4);
  for (const auto& r : rows) {
    CHECK(r.per_seed.size() == 3);
    CHECK(r.mean);
  }
  CHECK(rows[0].k == 1);
  CHECK(rows[3].k == 20);
  auto again = few_shot_curve(separable(labels, 3.0, 3), labels, *g.split(), cfg);
  CHECK(*again[2].mean == *rows[2].mean);
}

TEST_CASE("BCE with logits matches the scalar formula") {
  nn::Tape t;
  Matrix logits(2, 2);
  logits << 0.5, -2.0, 3.0, 0.0;
  LabelMatrix y(2, 2);
  y << 1, 0, 0, 1;
  const std::vector<NodeId> rows{0, 1};
  auto v = bce_with_logits(t, t.constant(logits), y, rows, {true, true});
  auto bce = [](double x, int label) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0) - x * label; };
  const double expected = (bce(0.5, 1) + bce(-2.0, 0) + bce(3.0, 0) + bce(0.0, 1)) / 4.0;
  CHECK(t.value(v)(0, 0) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("two-stage fine-tuning trains and restores the best epoch") {
  auto cfg = tiny();
  auto model = init_model(cfg, 1);
  model.adapters.emplace("a", make_adapter("a", 0, cfg, 2));
  Graph g = labelled_sbm(7);
  auto adapter = init_adapter_from_mean(model, "t", 0, 3);
  AdaptConfig ac;
  ac.stage1_epochs = 4;
  ac.stage2_epochs = 4;
  auto r = finetune_two_stage(model, adapter, "t", g, context_for(g), ac);
  CHECK(r.report.epochs.size() == 8);
  CHECK(r.report.epochs[0].stage == 1);
  CHECK(r.report.epochs[7].stage == 2);
  CHECK(r.report.best_valid_auc);
  CHECK(r.report.mean_auc);
  CHECK(r.model.adapters.count("t") == 1);
  CHECK(r.head.weight.value.rows() == 16);
  auto again = finetune_two_stage(model, adapter, "t", g, context_for(g), ac);
  CHECK(backbone_checksum(again.model) == backbone_checksum(r.model));
}

TEST_CASE("report files") {
  Graph g = labelled_sbm(3, 50);
  auto r = zero_shot_probe(separable(*g.labels(), 0.3, 1), *g.labels(), *g.split(), AdaptConfig{});
  auto dir = fixture::temp_dir("adapt_report");
  write_report(r.report, dir.string());
  CHECK(std::filesystem::exists(dir / "report.json"));
  CHECK(std::filesystem::exists(dir / "per_label.tsv"));
  CHECK(std::filesystem::exists(dir / "roc.tsv"));
  CHECK(fixture::read_text(dir / "per_label.tsv").rfind("label\tvalid\troc_auc", 0) == 0);
  CHECK(report_json(r.report).find("\"mean_roc_auc\"") != std::string::npos);
}
