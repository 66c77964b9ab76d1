#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gfm/graph.hpp"
#include "gfm/metrics.hpp"
#include "gfm/model.hpp"
#include "gfm/pretrain.hpp"

namespace gfm {

struct AdaptConfig {
  std::uint64_t tune_steps = 2000;
  double tune_lr = 1e-4;

  // Logistic probe: full-batch gradient descent on standardised embeddings.
  std::size_t probe_iters = 500;
  double probe_lr = 0.5;
  double probe_l2 = 1e-4;

  // Two-stage fine-tuning, one full-graph step per epoch.
  std::uint64_t stage1_epochs = 50;
  std::uint64_t stage2_epochs = 50;
  std::uint64_t patience = 20;
  double lr_backbone = 1e-5;
  double lr_projection = 1e-5;
  double lr_adapter = 1e-4;
  double lr_head = 1e-3;
  double weight_decay = 5e-4;

  std::vector<std::size_t> k_grid = {1, 5, 10, 20};
  std::size_t few_shot_seeds = 5;
  std::uint64_t seed = 42;
};

std::vector<std::string> adapt_config_keys();
/// Returns false when `key` is not an adaptation key.
bool set_adapt_option(AdaptConfig& config, const std::string& key, const std::string& value);
std::map<std::string, std::string> to_key_values(const AdaptConfig& config);

// ---------------------------------------------------------------------------
// Adapter initialisation and unlabeled tuning

/// New adapter for `graph_id`: context rows and bias are the elementwise mean
/// over every adapter in `model`; the `feature_dim` raw-feature rows are
/// drawn fresh (uniform, fan-in scaled) from `seed`.
Adapter init_adapter_from_mean(const ModelState& model, const std::string& graph_id, std::size_t feature_dim,
                               std::uint64_t seed);

struct TuneResult {
  StepLoss initial;  // eval-mode loss on a fixed batch before tuning
  StepLoss final;    // same batch after tuning
  std::vector<LossRecord> history;
};

/// Updates only `adapter` for `steps` contrastive steps on the target graph.
/// The backbone and text projection are checked bitwise unchanged.
TuneResult tune_adapter_unlabeled(ModelState& model, Adapter& adapter, const PretrainGraph& data,
                                  const PprIndex& ppr, const PretrainConfig& loss_config, std::uint64_t steps,
                                  double lr, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Probes

struct ProbeModel {
  std::vector<bool> valid;     // label had both classes in the fitting set
  Matrix weights;              // D x L, on standardised inputs
  RowVector bias;              // 1 x L
  RowVector mean, scale;       // standardisation, 1 x D
  std::vector<double> thresholds;  // tuned on validation; NaN when not tuned

  /// Sigmoid probabilities, N x L.
  Matrix predict(const Matrix& embeddings) const;
};

struct Standardizer {
  RowVector mean, scale;
};

/// Column means and standard deviations of the given rows (scale 1 for
/// constant columns).
Standardizer fit_standardizer(const Matrix& x, std::span<const NodeId> rows);

/// One-vs-rest L2-regularised logistic regression on `rows`. Labels with a
/// single class among `rows` are marked invalid.
ProbeModel fit_probe(const Matrix& embeddings, const LabelMatrix& labels, std::span<const NodeId> rows,
                     const Standardizer& standardizer, const AdaptConfig& config);

struct LabelResult {
  std::size_t label = 0;
  bool valid = false;
  std::string note;
  std::optional<double> auc;
  std::optional<double> threshold;
  std::optional<double> accuracy;
};

struct EpochLog {
  int stage = 0;
  std::uint64_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> valid_auc;
};

struct FewShotRow {
  std::size_t k = 0;
  std::optional<double> mean;
  double sd = 0.0;
  std::size_t n_valid_labels = 0;
  std::size_t skipped_labels = 0;
  std::vector<std::optional<double>> per_seed;
};

struct EvalReport {
  std::string mode;
  std::uint64_t seed = 0;
  std::vector<LabelResult> labels;
  std::optional<double> mean_auc;
  std::optional<double> mean_accuracy;
  std::optional<RocCurve> macro_roc;
  std::vector<EpochLog> epochs;
  std::optional<double> best_valid_auc;
  std::optional<int> best_stage;
  std::optional<std::uint64_t> best_epoch;
  std::vector<FewShotRow> few_shot;
  std::map<std::string, std::string> config;
};

/// Scores test nodes with `probabilities`, tuning thresholds on validation.
/// Fills per-label results, mean AUC, mean accuracy and the macro ROC curve.
void evaluate_scores(const Matrix& probabilities, const LabelMatrix& labels, const std::vector<SplitTag>& split,
                     const std::vector<bool>& fit_valid, EvalReport& report);

struct ProbeResult {
  ProbeModel probe;
  EvalReport report;
};

/// Fits on the train split, tunes thresholds on valid, reports test metrics.
ProbeResult zero_shot_probe(const Matrix& embeddings, const LabelMatrix& labels, const std::vector<SplitTag>& split,
                            const AdaptConfig& config);

/// K positives and K negatives per label from the train split for each seed
/// (seed + i, i < few_shot_seeds), test ROC-AUC averaged over valid labels.
std::vector<FewShotRow> few_shot_curve(const Matrix& embeddings, const LabelMatrix& labels,
                                       const std::vector<SplitTag>& split, const AdaptConfig& config);

// ---------------------------------------------------------------------------
// Fine-tuning

struct ClassifierHead {
  nn::Parameter weight;  // 2 embed_dim x L
  nn::Parameter bias;    // 1 x L
};

ClassifierHead make_head(std::size_t input_dim, std::size_t labels, std::uint64_t seed);

/// Mean binary cross-entropy with logits over the given rows and the label
/// columns flagged in `columns`.
nn::Var bce_with_logits(nn::Tape& t, nn::Var logits, const LabelMatrix& labels, std::span<const NodeId> rows,
                        const std::vector<bool>& columns);

struct FinetuneResult {
  ModelState model;  // best-validation parameters, adapter stored under the graph id
  ClassifierHead head;
  EvalReport report;
};

/// Stage 1 trains the adapter and a fresh head with the backbone and text
/// projection frozen; stage 2 trains everything with per-group learning
/// rates. The best validation mean ROC-AUC checkpoint is restored before
/// test evaluation.
FinetuneResult finetune_two_stage(const ModelState& model, const Adapter& adapter, const std::string& graph_id,
                                  const Graph& graph, const Matrix& context, const AdaptConfig& config);

// ---------------------------------------------------------------------------
// Reports

std::string report_json(const EvalReport& report);
/// report.json, per_label.tsv, and when present few_shot.tsv, epochs.tsv, roc.tsv.
void write_report(const EvalReport& report, const std::string& dir);

}  // namespace gfm
