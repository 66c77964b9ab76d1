#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gfm/types.hpp"

namespace gfm {

// ---------------------------------------------------------------------------
// Ranking metrics

/// Average ranks (1-based) with ties sharing the mean of their positions.
std::vector<double> midranks(std::span<const double> values);

/// Mann-Whitney AUC with midrank ties; nullopt unless both classes occur.
std::optional<double> roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Unweighted mean over the labels that have a value.
std::optional<double> mean_valid(std::span<const std::optional<double>> values);

inline constexpr std::size_t kRocGridSize = 1001;

struct RocCurve {
  std::vector<double> fpr;  // uniform grid on [0, 1]
  std::vector<double> tpr;
  double auc = 0.0;  // trapezoidal area under the gridded curve
};

std::vector<double> roc_grid(std::size_t points = kRocGridSize);

/// Empirical ROC curve resampled onto the grid. The empirical curve is
/// treated as a right-continuous step function: TPR(x) is the largest TPR
/// reached at any threshold whose FPR is <= x.
std::optional<RocCurve> roc_curve(std::span<const double> scores, std::span<const std::uint8_t> labels,
                                  std::size_t points = kRocGridSize);

/// Pointwise mean of gridded curves. Throws DataError for an empty list or
/// curves on different grids.
RocCurve macro_roc(std::span<const RocCurve> curves);

double trapezoid_auc(std::span<const double> fpr, std::span<const double> tpr);

// ---------------------------------------------------------------------------
// Thresholds

/// Threshold maximising F1 of (score >= threshold) against the labels,
/// scanning every distinct score; ties go to the smallest threshold. Without
/// positives the threshold sits just above the largest score.
double tune_f1_threshold(std::span<const double> scores, std::span<const std::uint8_t> labels);

double f1_at(std::span<const double> scores, std::span<const std::uint8_t> labels, double threshold);
double accuracy_at(std::span<const double> scores, std::span<const std::uint8_t> labels, double threshold);

/// Mean over the selected labels (all when `include` is empty) of per-label
/// accuracy at that label's threshold. Columns of `scores` are labels.
double accuracy_at_thresholds(const Matrix& scores, const LabelMatrix& labels,
                              std::span<const double> thresholds, std::span<const bool> include = {});

// ---------------------------------------------------------------------------
// Correlation

struct Spearman {
  double rho = 0.0;
  bool degenerate = false;  // one of the inputs has all-equal ranks
};

Spearman spearman(std::span<const double> x, std::span<const double> y);

// ---------------------------------------------------------------------------
// Embedding neighbourhoods

/// Exact cosine k-nearest neighbours, self excluded, ties at equal distance
/// broken by node id. Rows with zero norm have cosine 0 to everything.
struct Knn {
  std::size_t k = 0;
  std::vector<NodeId> index;     // N x k, row-major
  std::vector<double> distance;  // cosine distance, N x k

  std::span<const NodeId> neighbors(std::size_t node) const { return {index.data() + node * k, k}; }
  std::span<const double> distances(std::size_t node) const { return {distance.data() + node * k, k}; }
};

Knn cosine_knn(const Matrix& embeddings, std::size_t k);

/// 1 / mean cosine distance to the k nearest neighbours (infinite when every
/// neighbour coincides with the node).
std::vector<double> local_density(const Matrix& embeddings, std::size_t k = 15);

Spearman density_multifunctionality_spearman(const Matrix& embeddings, std::span<const double> label_counts,
                                             std::size_t k = 15);

/// For each k in the grid (clamped to N - 1), the mean over positive nodes of
/// the fraction of their k nearest neighbours that are also positive.
std::vector<double> same_label_enrichment(const Matrix& embeddings, std::span<const std::uint8_t> label,
                                          std::span<const std::size_t> k_grid);

struct CoEnrichment {
  std::vector<std::size_t> anchors;  // label column per row/column, input order
  Matrix values;                     // P x P, input order
  std::vector<std::size_t> order;    // dendrogram leaf order (indices into anchors)
  bool ratio = false;

  Matrix ordered() const;
};

CoEnrichment co_enrichment(const Matrix& embeddings, const LabelMatrix& labels,
                           std::span<const std::size_t> anchors, std::size_t k, bool ratio);

/// Leaf order of an average-linkage clustering of the rows of `m` under
/// Euclidean distance. Closest pairs merge first (ties: lowest cluster ids);
/// the traversal visits the smaller subtree first.
std::vector<std::size_t> average_linkage_order(const Matrix& m);

// ---------------------------------------------------------------------------
// Stratified AUC

struct StratumMean {
  std::string stratum;
  std::size_t count = 0;
  std::optional<double> mean;  // absent when no valid label falls in the stratum
};

/// Unweighted mean AUC per stratum; labels without an AUC are ignored.
/// Strata named in `all_strata` but empty are reported as absent. Output
/// follows `all_strata` followed by any remaining strata in sorted order.
std::vector<StratumMean> stratified_auc(std::span<const std::optional<double>> per_label_auc,
                                        std::span<const std::string> strata,
                                        std::span<const std::string> all_strata = {});

}  // namespace gfm
