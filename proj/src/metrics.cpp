#include "gfm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

namespace gfm {

namespace {

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                         std::to_string(b) + ")");
  }
}

// Indices sorted by descending score, ties by index.
std::vector<std::size_t> order_descending(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

}  // namespace

std::vector<double> midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && values[idx[j]] == values[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) ranks[idx[t]] = r;
    i = j;
  }
  return ranks;
}

std::optional<double> roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  require_same_length(scores.size(), labels.size(), "roc_auc");
  std::size_t pos = 0;
  for (auto l : labels) pos += l ? 1 : 0;
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) return std::nullopt;
  const auto ranks = midranks(scores);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) rank_sum += ranks[i];
  }
  const double p = static_cast<double>(pos), q = static_cast<double>(neg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

std::optional<double> mean_valid(std::span<const std::optional<double>> values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::vector<double> roc_grid(std::size_t points) {
  if (points < 2) throw ConfigError("ROC grid needs at least two points");
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i) grid[i] = static_cast<double>(i) / static_cast<double>(points - 1);
  return grid;
}

double trapezoid_auc(std::span<const double> fpr, std::span<const double> tpr) {
  require_same_length(fpr.size(), tpr.size(), "trapezoid_auc");
  double area = 0.0;
  for (std::size_t i = 1; i < fpr.size(); ++i) area += (fpr[i] - fpr[i - 1]) * 0.5 * (tpr[i] + tpr[i - 1]);
  return area;
}

std::optional<RocCurve> roc_curve(std::span<const double> scores, std::span<const std::uint8_t> labels,
                                  std::size_t points) {
  require_same_length(scores.size(), labels.size(), "roc_curve");
  std::size_t pos = 0;
  for (auto l : labels) pos += l ? 1 : 0;
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) return std::nullopt;

  // Empirical operating points as integer (fp, tp) counts.
  std::vector<std::pair<std::size_t, std::size_t>> pts{{0, 0}};
  const auto idx = order_descending(scores);
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] ? tp : fp) += 1;
      ++j;
    }
    pts.emplace_back(fp, tp);
    i = j;
  }

  RocCurve curve;
  curve.fpr = roc_grid(points);
  curve.tpr.resize(points);
  std::size_t cursor = 0;
  const std::size_t denom = points - 1;
  for (std::size_t g = 0; g < points; ++g) {
    // fp / neg <= g / denom, compared exactly in integers.
    while (cursor + 1 < pts.size() && pts[cursor + 1].first * denom <= g * neg) ++cursor;
    curve.tpr[g] = static_cast<double>(pts[cursor].second) / static_cast<double>(pos);
  }
  curve.auc = trapezoid_auc(curve.fpr, curve.tpr);
  return curve;
}

RocCurve macro_roc(std::span<const RocCurve> curves) {
  if (curves.empty()) throw DataError("macro_roc: no valid curves");
  RocCurve out;
  out.fpr = curves.front().fpr;
  out.tpr.assign(out.fpr.size(), 0.0);
  for (const RocCurve& c : curves) {
    if (c.fpr != out.fpr || c.tpr.size() != out.fpr.size()) throw DataError("macro_roc: curves use different grids");
    for (std::size_t i = 0; i < c.tpr.size(); ++i) out.tpr[i] += c.tpr[i];
  }
  for (double& v : out.tpr) v /= static_cast<double>(curves.size());
  out.auc = trapezoid_auc(out.fpr, out.tpr);
  return out;
}

double f1_at(std::span<const double> scores, std::span<const std::uint8_t> labels, double threshold) {
  require_same_length(scores.size(), labels.size(), "f1_at");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (pred && labels[i]) ++tp;
    else if (pred) ++fp;
    else if (labels[i]) ++fn;
  }
  if (tp == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

double accuracy_at(std::span<const double> scores, std::span<const std::uint8_t> labels, double threshold) {
  require_same_length(scores.size(), labels.size(), "accuracy_at");
  if (scores.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if ((scores[i] >= threshold) == (labels[i] != 0)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

double tune_f1_threshold(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  require_same_length(scores.size(), labels.size(), "tune_f1_threshold");
  if (scores.empty()) throw DataError("tune_f1_threshold: no scores");
  std::size_t pos = 0;
  for (auto l : labels) pos += l ? 1 : 0;
  const double top = *std::max_element(scores.begin(), scores.end());
  if (pos == 0) return std::nextafter(top, std::numeric_limits<double>::infinity());

  const auto idx = order_descending(scores);
  std::size_t tp = 0, fp = 0;
  // Best F1 kept as the exact fraction 2tp / (2tp + fp + fn).
  std::size_t best_num = 0, best_den = 1;
  double best = std::nextafter(top, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] ? tp : fp) += 1;
      ++j;
    }
    const std::size_t num = 2 * tp, den = 2 * tp + fp + (pos - tp);
    // Later candidates are smaller thresholds, so ">=" favours them on ties.
    if (num * best_den >= best_num * den) {
      best_num = num;
      best_den = den;
      best = scores[idx[i]];
    }
    i = j;
  }
  return best;
}

double accuracy_at_thresholds(const Matrix& scores, const LabelMatrix& labels, std::span<const double> thresholds,
                              std::span<const bool> include) {
  if (scores.rows() != labels.rows() || scores.cols() != labels.cols()) {
    throw DimensionError("accuracy_at_thresholds: score and label shapes differ");
  }
  require_same_length(thresholds.size(), static_cast<std::size_t>(scores.cols()), "accuracy_at_thresholds");
  if (!include.empty()) require_same_length(include.size(), thresholds.size(), "accuracy_at_thresholds");
  double sum = 0.0;
  std::size_t n = 0;
  std::vector<double> s(scores.rows());
  std::vector<std::uint8_t> y(scores.rows());
  for (Eigen::Index c = 0; c < scores.cols(); ++c) {
    if (!include.empty() && !include[c]) continue;
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
      s[r] = scores(r, c);
      y[r] = labels(r, c);
    }
    sum += accuracy_at(s, y, thresholds[c]);
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

Spearman spearman(std::span<const double> x, std::span<const double> y) {
  require_same_length(x.size(), y.size(), "spearman");
  const auto rx = midranks(x), ry = midranks(y);
  const double n = static_cast<double>(x.size());
  if (x.size() < 2) return {0.0, true};
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return {0.0, true};
  return {sxy / std::sqrt(sxx * syy), false};
}

Knn cosine_knn(const Matrix& embeddings, std::size_t k) {
  const std::size_t n = static_cast<std::size_t>(embeddings.rows());
  if (n < 2) throw DataError("k-NN needs at least two nodes");
  if (k == 0) throw ConfigError("k must be positive");
  k = std::min(k, n - 1);
  Matrix unit = embeddings;
  for (Eigen::Index i = 0; i < unit.rows(); ++i) {
    const double norm = unit.row(i).norm();
    if (norm > 0.0) unit.row(i) /= norm;
  }
  Knn out;
  out.k = k;
  out.index.resize(n * k);
  out.distance.resize(n * k);
  constexpr Eigen::Index kBlock = 256;
  std::vector<std::pair<double, NodeId>> cand(n - 1);
  for (Eigen::Index start = 0; start < static_cast<Eigen::Index>(n); start += kBlock) {
    const Eigen::Index rows = std::min<Eigen::Index>(kBlock, static_cast<Eigen::Index>(n) - start);
    Matrix sim(rows, static_cast<Eigen::Index>(n));
    sim.noalias() = unit.middleRows(start, rows) * unit.transpose();
    for (Eigen::Index r = 0; r < rows; ++r) {
      const std::size_t i = static_cast<std::size_t>(start + r);
      std::size_t c = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) cand[c++] = {1.0 - sim(r, static_cast<Eigen::Index>(j)), static_cast<NodeId>(j)};
      }
      std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
      for (std::size_t t = 0; t < k; ++t) {
        out.distance[i * k + t] = cand[t].first;
        out.index[i * k + t] = cand[t].second;
      }
    }
  }
  return out;
}

std::vector<double> local_density(const Matrix& embeddings, std::size_t k) {
  const Knn knn = cosine_knn(embeddings, k);
  std::vector<double> density(static_cast<std::size_t>(embeddings.rows()));
  for (std::size_t i = 0; i < density.size(); ++i) {
    const auto d = knn.distances(i);
    const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
    density[i] = mean > 0.0 ? 1.0 / mean : std::numeric_limits<double>::infinity();
  }
  return density;
}

Spearman density_multifunctionality_spearman(const Matrix& embeddings, std::span<const double> label_counts,
                                             std::size_t k) {
  require_same_length(label_counts.size(), static_cast<std::size_t>(embeddings.rows()),
                      "density_multifunctionality_spearman");
  if (static_cast<std::size_t>(embeddings.rows()) <= k) {
    throw DataError("density analysis needs more than k = " + std::to_string(k) + " nodes");
  }
  const auto density = local_density(embeddings, k);
  return spearman(label_counts, density);
}

std::vector<double> same_label_enrichment(const Matrix& embeddings, std::span<const std::uint8_t> label,
                                          std::span<const std::size_t> k_grid) {
  const std::size_t n = static_cast<std::size_t>(embeddings.rows());
  require_same_length(label.size(), n, "same_label_enrichment");
  std::vector<std::size_t> positives;
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i]) positives.push_back(i);
  }
  if (positives.size() < 2) throw DataError("same-label enrichment needs at least two positive nodes");
  if (k_grid.empty()) return {};
  std::size_t kmax = 0;
  for (std::size_t k : k_grid) {
    if (k == 0) throw ConfigError("k must be positive");
    kmax = std::max(kmax, k);
  }
  const Knn knn = cosine_knn(embeddings, kmax);
  std::vector<double> out;
  for (std::size_t k : k_grid) {
    k = std::min(k, knn.k);
    double sum = 0.0;
    for (std::size_t p : positives) {
      const auto nb = knn.neighbors(p);
      std::size_t hits = 0;
      for (std::size_t t = 0; t < k; ++t) hits += label[nb[t]] ? 1 : 0;
      sum += static_cast<double>(hits) / static_cast<double>(k);
    }
    out.push_back(sum / static_cast<double>(positives.size()));
  }
  return out;
}

Matrix CoEnrichment::ordered() const {
  Matrix m(values.rows(), values.cols());
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (std::size_t j = 0; j < order.size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          values(static_cast<Eigen::Index>(order[i]), static_cast<Eigen::Index>(order[j]));
    }
  }
  return m;
}

std::vector<std::size_t> average_linkage_order(const Matrix& m) {
  const std::size_t p = static_cast<std::size_t>(m.rows());
  if (p == 0) return {};
  Matrix leaf(p, p);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      leaf(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          (m.row(static_cast<Eigen::Index>(i)) - m.row(static_cast<Eigen::Index>(j))).norm();
    }
  }
  struct Cluster {
    std::vector<std::size_t> members;
    std::size_t left = 0, right = 0;
    bool is_leaf = true;
  };
  std::vector<Cluster> clusters;
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < p; ++i) {
    clusters.push_back({{i}, 0, 0, true});
    active.push_back(i);
  }
  auto linkage = [&](const Cluster& a, const Cluster& b) {
    double s = 0.0;
    for (std::size_t x : a.members) {
      for (std::size_t y : b.members) s += leaf(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
    }
    return s / static_cast<double>(a.members.size() * b.members.size());
  };
  while (active.size() > 1) {
    std::size_t bi = 0, bj = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < active.size(); ++i) {
      for (std::size_t j = i + 1; j < active.size(); ++j) {
        const double d = linkage(clusters[active[i]], clusters[active[j]]);
        if (d < best) {
          best = d;
          bi = i;
          bj = j;
        }
      }
    }
    Cluster merged;
    merged.is_leaf = false;
    merged.left = active[bi];
    merged.right = active[bj];
    merged.members = clusters[merged.left].members;
    merged.members.insert(merged.members.end(), clusters[merged.right].members.begin(),
                          clusters[merged.right].members.end());
    clusters.push_back(std::move(merged));
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
    active[bi] = clusters.size() - 1;
  }
  std::vector<std::size_t> order;
  std::vector<std::size_t> stack{active.front()};
  while (!stack.empty()) {
    const std::size_t c = stack.back();
    stack.pop_back();
    if (clusters[c].is_leaf) {
      order.push_back(clusters[c].members.front());
      continue;
    }
    std::size_t first = clusters[c].left, second = clusters[c].right;
    const std::size_t sf = clusters[first].members.size(), ss = clusters[second].members.size();
    if (ss < sf || (ss == sf && second < first)) std::swap(first, second);
    stack.push_back(second);
    stack.push_back(first);
  }
  return order;
}

CoEnrichment co_enrichment(const Matrix& embeddings, const LabelMatrix& labels, std::span<const std::size_t> anchors,
                           std::size_t k, bool ratio) {
  const std::size_t n = static_cast<std::size_t>(embeddings.rows());
  if (static_cast<std::size_t>(labels.rows()) != n) throw DimensionError("co_enrichment: label rows differ from embeddings");
  if (anchors.empty()) throw DataError("co_enrichment: no anchor labels");
  const std::size_t p = anchors.size();
  std::vector<std::size_t> counts(p, 0);
  for (std::size_t a = 0; a < p; ++a) {
    if (anchors[a] >= static_cast<std::size_t>(labels.cols())) throw DimensionError("co_enrichment: anchor label out of range");
    for (std::size_t i = 0; i < n; ++i) counts[a] += labels(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(anchors[a])) ? 1 : 0;
    if (counts[a] == 0) throw DataError("co_enrichment: label " + std::to_string(anchors[a]) + " has no positive node");
  }
  const Knn knn = cosine_knn(embeddings, k);
  CoEnrichment out;
  out.anchors.assign(anchors.begin(), anchors.end());
  out.ratio = ratio;
  out.values = Matrix::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  auto has = [&](std::size_t node, std::size_t a) {
    return labels(static_cast<Eigen::Index>(node), static_cast<Eigen::Index>(anchors[a])) != 0;
  };
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> frac(p, 0.0);
    for (NodeId j : knn.neighbors(i)) {
      for (std::size_t b = 0; b < p; ++b) frac[b] += has(j, b) ? 1.0 : 0.0;
    }
    for (std::size_t a = 0; a < p; ++a) {
      if (!has(i, a)) continue;
      for (std::size_t b = 0; b < p; ++b) {
        out.values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) += frac[b] / static_cast<double>(knn.k);
      }
    }
  }
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = 0; b < p; ++b) {
      double& v = out.values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
      v /= static_cast<double>(counts[a]);
      if (ratio) v /= static_cast<double>(counts[b]) / static_cast<double>(n);
    }
  }
  const Matrix sym = 0.5 * (out.values + out.values.transpose());
  out.order = average_linkage_order(sym);
  return out;
}

std::vector<StratumMean> stratified_auc(std::span<const std::optional<double>> per_label_auc,
                                        std::span<const std::string> strata,
                                        std::span<const std::string> all_strata) {
  require_same_length(per_label_auc.size(), strata.size(), "stratified_auc");
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (std::size_t i = 0; i < strata.size(); ++i) {
    auto& slot = acc[strata[i]];
    if (per_label_auc[i]) {
      slot.first += *per_label_auc[i];
      ++slot.second;
    }
  }
  std::vector<StratumMean> out;
  std::set<std::string> seen;
  auto emit = [&](const std::string& name) {
    if (!seen.insert(name).second) return;
    StratumMean m{name, 0, std::nullopt};
    if (auto it = acc.find(name); it != acc.end() && it->second.second > 0) {
      m.count = it->second.second;
      m.mean = it->second.first / static_cast<double>(m.count);
    }
    out.push_back(m);
  };
  for (const auto& s : all_strata) emit(s);
  for (const auto& [name, _] : acc) emit(name);
  return out;
}

}  // namespace gfm
