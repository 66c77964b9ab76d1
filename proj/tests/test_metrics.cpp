#include <doctest.h>

#include <cmath>
#include <limits>

#include "gfm/metrics.hpp"
#include "oracles.hpp"

using namespace gfm;

namespace {

struct Scored {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
};

/// Scores drawn from a small value set so that ties are common.
Scored tied_scores(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  Scored s;
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<std::uint8_t>(rng.bernoulli(0.4));
    s.labels.push_back(y);
    s.scores.push_back(static_cast<double>(rng.below(7)) + (y ? 1.0 : 0.0));
  }
  s.labels[0] = 1;
  s.labels[1] = 0;
  return s;
}

}  // namespace

TEST_CASE("midranks average tied positions") {
  const std::vector<double> v{3, 1, 3, 2};
  CHECK(midranks(v) == std::vector<double>{3.5, 1, 3.5, 2});
}

TEST_CASE("roc_auc matches pair counting with ties") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    auto s = tied_scores(seed, 5 + seed * 7);
    auto auc = roc_auc(s.scores, s.labels);
    REQUIRE(auc);
    CHECK(std::abs(*auc - oracle::pair_auc(s.scores, s.labels)) < 1e-12);
  }
  const std::vector<double> sc{0.1, 0.2};
  const std::vector<std::uint8_t> same{1, 1};
  CHECK_FALSE(roc_auc(sc, same));
}

TEST_CASE("mean over valid labels ignores missing values") {
  std::vector<std::optional<double>> v{0.5, std::nullopt, 1.0};
  CHECK(*mean_valid(v) == 0.75);
  std::vector<std::optional<double>> none{std::nullopt};
  CHECK_FALSE(mean_valid(none));
}

TEST_CASE("gridded ROC curves are monotone and reach the corners") {
  auto s = tied_scores(3, 200);
  auto curve = roc_curve(s.scores, s.labels);
  REQUIRE(curve);
  CHECK(curve->fpr.size() == kRocGridSize);
  CHECK(curve->fpr.front() == 0.0);
  CHECK(curve->fpr.back() == 1.0);
  CHECK(curve->tpr.back() == 1.0);
  for (std::size_t i = 1; i < curve->tpr.size(); ++i) CHECK(curve->tpr[i] >= curve->tpr[i - 1]);
  CHECK(curve->auc == doctest::Approx(trapezoid_auc(curve->fpr, curve->tpr)));

  // Perfect separation gives the unit square.
  const std::vector<double> sc{0.9, 0.8, 0.2, 0.1};
  const std::vector<std::uint8_t> y{1, 1, 0, 0};
  auto perfect = roc_curve(sc, y);
  CHECK(perfect->auc == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<RocCurve> both{*perfect, *curve};
  auto macro = macro_roc(both);
  CHECK(macro.tpr[500] == doctest::Approx(0.5 * (1.0 + curve->tpr[500])));
  CHECK_THROWS_AS(macro_roc(std::span<const RocCurve>{}), DataError);
}

TEST_CASE("F1 threshold tuning matches an exhaustive scan") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto s = tied_scores(seed, 40);
    const double t = tune_f1_threshold(s.scores, s.labels);
    double best = -1;
    double best_t = 0;
    std::vector<double> candidates = s.scores;
    std::sort(candidates.begin(), candidates.end());
    for (double c : candidates) {
      const double f = f1_at(s.scores, s.labels, c);
      if (f > best + 1e-15) {
        best = f;
        best_t = c;
      }
    }
    CHECK(f1_at(s.scores, s.labels, t) == doctest::Approx(best).epsilon(1e-15));
    CHECK(t == best_t);
  }
  const std::vector<double> sc{0.3, 0.7};
  const std::vector<std::uint8_t> none{0, 0};
  CHECK(tune_f1_threshold(sc, none) > 0.7);
  CHECK(accuracy_at(sc, none, tune_f1_threshold(sc, none)) == 1.0);
}

TEST_CASE("accuracy averages per-label accuracies over selected labels") {
  Matrix scores(4, 2);
  scores << 0.9, 0.1, 0.8, 0.2, 0.2, 0.7, 0.1, 0.6;
  LabelMatrix labels(4, 2);
  labels << 1, 0, 1, 0, 0, 1, 0, 0;
  const std::vector<double> t{0.5, 0.55};
  CHECK(accuracy_at_thresholds(scores, labels, t) == doctest::Approx((1.0 + 0.75) / 2));
  const bool only_second[] = {false, true};
  CHECK(accuracy_at_thresholds(scores, labels, t, only_second) == doctest::Approx(0.75));
}

TEST_CASE("Spearman matches the naive rank formula") {
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> x, y;
    for (int i = 0; i < 30; ++i) {
      x.push_back(static_cast<double>(rng.below(6)));
      y.push_back(x.back() * 0.5 + static_cast<double>(rng.below(4)));
    }
    auto r = spearman(x, y);
    CHECK_FALSE(r.degenerate);
    CHECK(std::abs(r.rho - oracle::spearman(x, y)) < 1e-12);
  }
  const std::vector<double> flat{1, 1, 1}, any{1, 2, 3};
  CHECK(spearman(flat, any).degenerate);
}

TEST_CASE("cosine k-NN matches brute force") {
  Rng rng(7);
  Matrix e = oracle::random_matrix(rng, 40, 5);
  e.row(3) = e.row(8);  // exact tie in distance for everyone
  auto knn = cosine_knn(e, 6);
  for (Eigen::Index i = 0; i < 40; ++i) {
    std::vector<std::pair<double, NodeId>> all;
    for (Eigen::Index j = 0; j < 40; ++j) {
      if (j == i) continue;
      const double c = e.row(i).dot(e.row(j)) / (e.row(i).norm() * e.row(j).norm());
      all.emplace_back(1.0 - c, static_cast<NodeId>(j));
    }
    std::sort(all.begin(), all.end(), [](auto a, auto b) {
      return std::abs(a.first - b.first) > 1e-12 ? a.first < b.first : a.second < b.second;
    });
    for (std::size_t t = 0; t < 6; ++t) {
      CHECK(knn.neighbors(static_cast<std::size_t>(i))[t] == all[t].second);
      CHECK(std::abs(knn.distances(static_cast<std::size_t>(i))[t] - all[t].first) < 1e-12);
    }
  }
  CHECK(cosine_knn(e, 100).k == 39);
}

TEST_CASE("local density is the inverse mean neighbour distance") {
  Rng rng(8);
  Matrix e = oracle::random_matrix(rng, 30, 4);
  auto knn = cosine_knn(e, 15);
  auto dens = local_density(e, 15);
  for (std::size_t i = 0; i < 30; ++i) {
    double mean = 0;
    for (double d : knn.distances(i)) mean += d / 15.0;
    CHECK(dens[i] == doctest::Approx(1.0 / mean).epsilon(1e-12));
  }
  Matrix same = Matrix::Ones(5, 3);
  CHECK(std::isinf(local_density(same, 2)[0]));
}

TEST_CASE("enrichment at k = N - 1 equals the leave-one-out prevalence") {
  Rng rng(11);
  Matrix e = oracle::random_matrix(rng, 50, 6);
  std::vector<std::uint8_t> label(50);
  std::size_t pos = 0;
  for (auto& l : label) pos += (l = static_cast<std::uint8_t>(rng.bernoulli(0.3)));
  const std::size_t ks[] = {49};
  auto v = same_label_enrichment(e, label, ks);
  CHECK(std::abs(v[0] - static_cast<double>(pos - 1) / 49.0) < 1e-12);
  std::vector<std::uint8_t> lonely(50, 0);
  lonely[0] = 1;
  CHECK_THROWS_AS(same_label_enrichment(e, lonely, ks), DataError);
}

TEST_CASE("stratified means recombine to the overall mean") {
  Rng rng(12);
  std::vector<std::optional<double>> auc;
  std::vector<std::string> strata;
  const char* names[] = {"low", "mid", "high"};
  for (int i = 0; i < 40; ++i) {
    auc.push_back(i % 7 == 0 ? std::nullopt : std::optional<double>(rng.uniform()));
    strata.emplace_back(names[rng.below(3)]);
  }
  const std::vector<std::string> all{"high", "mid", "low", "empty"};
  auto out = stratified_auc(auc, strata, all);
  REQUIRE(out.size() == 4);
  CHECK(out[3].stratum == "empty");
  CHECK_FALSE(out[3].mean);
  double weighted = 0;
  std::size_t count = 0;
  for (const auto& s : out) {
    if (!s.mean) continue;
    weighted += *s.mean * static_cast<double>(s.count);
    count += s.count;
  }
  CHECK(std::abs(weighted / static_cast<double>(count) - *mean_valid(auc)) < 1e-12);
}

TEST_CASE("average linkage order") {
  Matrix pts(4, 1);
  pts << 0, 10, 1, 11;
  CHECK(average_linkage_order(pts) == std::vector<std::size_t>{0, 2, 1, 3});
  Matrix three(3, 1);
  three << 0, 1, 5;
  CHECK(average_linkage_order(three) == std::vector<std::size_t>{2, 0, 1});
}

TEST_CASE("co-enrichment fractions and ratios") {
  // Two tight groups; label 0 on the first, label 1 on the second.
  Matrix e(6, 2);
  e << 1, 0.01, 1, 0.02, 1, 0.03, 0.01, 1, 0.02, 1, 0.03, 1;
  LabelMatrix labels = LabelMatrix::Zero(6, 2);
  for (int i = 0; i < 3; ++i) {
    labels(i, 0) = 1;
    labels(i + 3, 1) = 1;
  }
  const std::size_t anchors[] = {0, 1};
  auto frac = co_enrichment(e, labels, anchors, 2, false);
  CHECK(frac.values(0, 0) == 1.0);
  CHECK(frac.values(0, 1) == 0.0);
  auto ratio = co_enrichment(e, labels, anchors, 2, true);
  CHECK(ratio.values(1, 1) == doctest::Approx(2.0));
  CHECK(ratio.ordered().rows() == 2);
}
