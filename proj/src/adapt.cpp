#include "gfm/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "gfm/random.hpp"
#include "gfm/text.hpp"

namespace gfm {

// ---------------------------------------------------------------------------
// Config

std::vector<std::string> adapt_config_keys() {
  return {"tune_steps",    "tune_lr",       "probe_iters",   "probe_lr",   "probe_l2",
          "stage1_epochs", "stage2_epochs", "patience",      "lr_backbone", "lr_projection",
          "lr_adapter",    "lr_head",       "finetune_weight_decay", "k_grid", "few_shot_seeds"};
}

bool set_adapt_option(AdaptConfig& c, const std::string& key, const std::string& value) {
  if (key == "tune_steps") c.tune_steps = parse_number<std::uint64_t>(key, value);
  else if (key == "tune_lr") c.tune_lr = parse_number<double>(key, value);
  else if (key == "probe_iters") c.probe_iters = parse_number<std::size_t>(key, value);
  else if (key == "probe_lr") c.probe_lr = parse_number<double>(key, value);
  else if (key == "probe_l2") c.probe_l2 = parse_number<double>(key, value);
  else if (key == "stage1_epochs") c.stage1_epochs = parse_number<std::uint64_t>(key, value);
  else if (key == "stage2_epochs") c.stage2_epochs = parse_number<std::uint64_t>(key, value);
  else if (key == "patience") c.patience = parse_number<std::uint64_t>(key, value);
  else if (key == "lr_backbone") c.lr_backbone = parse_number<double>(key, value);
  else if (key == "lr_projection") c.lr_projection = parse_number<double>(key, value);
  else if (key == "lr_adapter") c.lr_adapter = parse_number<double>(key, value);
  else if (key == "lr_head") c.lr_head = parse_number<double>(key, value);
  else if (key == "finetune_weight_decay") c.weight_decay = parse_number<double>(key, value);
  else if (key == "k_grid") c.k_grid = parse_list<std::size_t>(key, value);
  else if (key == "few_shot_seeds") c.few_shot_seeds = parse_number<std::size_t>(key, value);
  else return false;

  for (double lr : {c.tune_lr, c.probe_lr, c.lr_backbone, c.lr_projection, c.lr_adapter, c.lr_head}) {
    if (!(lr > 0.0)) throw ConfigError("'" + key + "': learning rates must be positive");
  }
  if (c.probe_l2 < 0.0 || c.weight_decay < 0.0) throw ConfigError("'" + key + "' must be non-negative");
  if (c.probe_iters == 0 || c.patience == 0 || c.few_shot_seeds == 0) {
    throw ConfigError("'" + key + "' must be positive");
  }
  for (std::size_t k : c.k_grid) {
    if (k == 0) throw ConfigError("k_grid entries must be positive");
  }
  return true;
}

std::map<std::string, std::string> to_key_values(const AdaptConfig& c) {
  return {
      {"tune_steps", std::to_string(c.tune_steps)},
      {"tune_lr", format_double(c.tune_lr)},
      {"probe_iters", std::to_string(c.probe_iters)},
      {"probe_lr", format_double(c.probe_lr)},
      {"probe_l2", format_double(c.probe_l2)},
      {"stage1_epochs", std::to_string(c.stage1_epochs)},
      {"stage2_epochs", std::to_string(c.stage2_epochs)},
      {"patience", std::to_string(c.patience)},
      {"lr_backbone", format_double(c.lr_backbone)},
      {"lr_projection", format_double(c.lr_projection)},
      {"lr_adapter", format_double(c.lr_adapter)},
      {"lr_head", format_double(c.lr_head)},
      {"finetune_weight_decay", format_double(c.weight_decay)},
      {"k_grid", join(c.k_grid)},
      {"few_shot_seeds", std::to_string(c.few_shot_seeds)},
      {"seed", std::to_string(c.seed)},
  };
}

// ---------------------------------------------------------------------------
// Adapter

Adapter init_adapter_from_mean(const ModelState& model, const std::string& graph_id, std::size_t feature_dim,
                               std::uint64_t seed) {
  if (model.adapters.empty()) throw ConfigError("the checkpoint holds no pretrained adapter to average");
  Adapter out = make_adapter(graph_id, feature_dim, model.config, seed);
  const Eigen::Index ctx = static_cast<Eigen::Index>(model.config.context_dim);
  Matrix ctx_sum = Matrix::Zero(ctx, out.weight.value.cols());
  Matrix bias_sum = Matrix::Zero(out.bias.value.rows(), out.bias.value.cols());
  for (const auto& [id, a] : model.adapters) {
    if (a.weight.value.cols() != out.weight.value.cols() || a.weight.value.rows() < ctx) {
      throw DimensionError("adapter '" + id + "' does not match the model's hidden width");
    }
    ctx_sum += a.weight.value.bottomRows(ctx);
    if (bias_sum.size() > 0) bias_sum += a.bias.value;
  }
  const double count = static_cast<double>(model.adapters.size());
  out.weight.value.bottomRows(ctx) = ctx_sum / count;
  if (bias_sum.size() > 0) out.bias.value = bias_sum / count;
  return out;
}

TuneResult tune_adapter_unlabeled(ModelState& model, Adapter& adapter, const PretrainGraph& data,
                                  const PprIndex& ppr, const PretrainConfig& loss_config, std::uint64_t steps,
                                  double lr, std::uint64_t seed) {
  const std::uint64_t frozen = backbone_checksum(model);
  nn::Adam opt(nn::AdamOptions{lr, loss_config.weight_decay});
  const TrainMask adapter_only{true, false, false};
  const TrainMask none{false, false, false};
  const std::uint64_t probe_seed = derive_seed(seed, 0xe7a1);

  TuneResult result;
  result.initial = contrastive_step(model, adapter, data, ppr, loss_config, probe_seed, false, none, false);
  for (std::uint64_t s = 0; s < steps; ++s) {
    const StepLoss loss = contrastive_step(model, adapter, data, ppr, loss_config, derive_seed(seed, s, 2), true,
                                           adapter_only, true);
    if (!std::isfinite(loss.total)) {
      throw NumericError("non-finite loss at adapter tuning step " + std::to_string(s) + " on graph '" + data.id +
                         "' (nce=" + format_double(loss.nce) + ", smooth=" + format_double(loss.smooth) + ")");
    }
    result.history.push_back({s, data.id, loss});
    opt.step(adapter.weight, lr);
    if (adapter.bias.value.size() > 0) opt.step(adapter.bias, lr);
  }
  result.final = contrastive_step(model, adapter, data, ppr, loss_config, probe_seed, false, none, false);
  if (backbone_checksum(model) != frozen) throw Error("backbone changed while tuning an adapter");
  return result;
}

// ---------------------------------------------------------------------------
// Probes

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

std::vector<NodeId> rows_with(const std::vector<SplitTag>& split, SplitTag tag) {
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == tag) out.push_back(static_cast<NodeId>(i));
  }
  return out;
}

std::vector<double> column(const Matrix& m, Eigen::Index c, std::span<const NodeId> rows) {
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = m(rows[i], c);
  return out;
}

std::vector<std::uint8_t> column(const LabelMatrix& m, Eigen::Index c, std::span<const NodeId> rows) {
  std::vector<std::uint8_t> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = m(rows[i], c);
  return out;
}

bool both_classes(const LabelMatrix& labels, Eigen::Index c, std::span<const NodeId> rows) {
  bool pos = false, neg = false;
  for (NodeId r : rows) (labels(r, c) ? pos : neg) = true;
  return pos && neg;
}

void check_split(const Matrix& embeddings, const LabelMatrix& labels, const std::vector<SplitTag>& split) {
  if (labels.rows() != embeddings.rows() || split.size() != static_cast<std::size_t>(embeddings.rows())) {
    throw DimensionError("embeddings, labels and split must have the same number of rows (" +
                         std::to_string(embeddings.rows()) + ", " + std::to_string(labels.rows()) + ", " +
                         std::to_string(split.size()) + ")");
  }
}

// Decision scores (logits) of a fitted probe.
Matrix probe_logits(const ProbeModel& p, const Matrix& embeddings) {
  Matrix x = (embeddings.rowwise() - p.mean).array().rowwise() / p.scale.array();
  Matrix z = x * p.weights;
  z.rowwise() += p.bias;
  return z;
}

}  // namespace

Matrix ProbeModel::predict(const Matrix& embeddings) const {
  return probe_logits(*this, embeddings).unaryExpr([](double v) { return sigmoid(v); });
}

Standardizer fit_standardizer(const Matrix& x, std::span<const NodeId> rows) {
  if (rows.empty()) throw DataError("cannot standardise over an empty row set");
  Standardizer s;
  s.mean = RowVector::Zero(x.cols());
  for (NodeId r : rows) s.mean += x.row(r);
  s.mean /= static_cast<double>(rows.size());
  RowVector var = RowVector::Zero(x.cols());
  for (NodeId r : rows) var += (x.row(r) - s.mean).array().square().matrix();
  var /= static_cast<double>(rows.size());
  s.scale = var.array().sqrt().matrix();
  for (Eigen::Index j = 0; j < s.scale.size(); ++j) {
    if (!(s.scale[j] > 1e-12)) s.scale[j] = 1.0;
  }
  return s;
}

ProbeModel fit_probe(const Matrix& embeddings, const LabelMatrix& labels, std::span<const NodeId> rows,
                     const Standardizer& st, const AdaptConfig& config) {
  if (rows.empty()) throw DataError("probe fitting set is empty");
  const Eigen::Index d = embeddings.cols(), l = labels.cols();
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  ProbeModel p;
  p.mean = st.mean;
  p.scale = st.scale;
  p.valid.resize(static_cast<std::size_t>(l));
  p.thresholds.assign(static_cast<std::size_t>(l), std::numeric_limits<double>::quiet_NaN());
  p.weights = Matrix::Zero(d, l);
  p.bias = RowVector::Zero(l);

  Matrix x(n, d), y(n, l);
  for (Eigen::Index i = 0; i < n; ++i) {
    x.row(i) = (embeddings.row(rows[i]) - st.mean).array() / st.scale.array();
    for (Eigen::Index c = 0; c < l; ++c) y(i, c) = labels(rows[i], c);
  }
  for (Eigen::Index c = 0; c < l; ++c) p.valid[c] = both_classes(labels, c, rows);

  const double inv_n = 1.0 / static_cast<double>(n);
  Matrix z(n, l), g(d, l);
  for (std::size_t it = 0; it < config.probe_iters; ++it) {
    z.noalias() = x * p.weights;
    z.rowwise() += p.bias;
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = sigmoid(z.data()[i]) - y.data()[i];
    g.noalias() = x.transpose() * z;
    g *= inv_n;
    g += config.probe_l2 * p.weights;
    p.weights -= config.probe_lr * g;
    p.bias -= config.probe_lr * inv_n * z.colwise().sum();
  }
  for (Eigen::Index c = 0; c < l; ++c) {
    if (!p.valid[c]) {
      p.weights.col(c).setZero();
      p.bias[c] = 0.0;
    }
  }
  return p;
}

void evaluate_scores(const Matrix& scores, const LabelMatrix& labels, const std::vector<SplitTag>& split,
                     const std::vector<bool>& fit_valid, EvalReport& report) {
  check_split(scores, labels, split);
  const auto valid_rows = rows_with(split, SplitTag::valid);
  const auto test_rows = rows_with(split, SplitTag::test);
  if (test_rows.empty()) throw DataError("the test split is empty");
  report.labels.clear();
  std::vector<RocCurve> curves;
  std::vector<std::optional<double>> aucs, accs;
  for (Eigen::Index c = 0; c < labels.cols(); ++c) {
    LabelResult r;
    r.label = static_cast<std::size_t>(c);
    if (!fit_valid[c]) {
      r.note = "single class in training data";
    } else {
      const auto ts = column(scores, c, test_rows);
      const auto ty = column(labels, c, test_rows);
      r.auc = roc_auc(ts, ty);
      if (!r.auc) {
        r.note = "single class in test split";
      } else {
        r.valid = true;
        if (!valid_rows.empty()) {
          r.threshold = tune_f1_threshold(column(scores, c, valid_rows), column(labels, c, valid_rows));
          r.accuracy = accuracy_at(ts, ty, *r.threshold);
        } else {
          r.note = "no validation nodes for threshold tuning";
        }
        curves.push_back(*roc_curve(ts, ty));
      }
    }
    aucs.push_back(r.auc);
    accs.push_back(r.accuracy);
    report.labels.push_back(std::move(r));
  }
  report.mean_auc = mean_valid(aucs);
  report.mean_accuracy = mean_valid(accs);
  if (!curves.empty()) report.macro_roc = macro_roc(curves);
  else report.macro_roc.reset();
}

ProbeResult zero_shot_probe(const Matrix& embeddings, const LabelMatrix& labels, const std::vector<SplitTag>& split,
                            const AdaptConfig& config) {
  check_split(embeddings, labels, split);
  const auto train = rows_with(split, SplitTag::train);
  if (train.empty()) throw DataError("the train split is empty");
  ProbeResult out;
  out.probe = fit_probe(embeddings, labels, train, fit_standardizer(embeddings, train), config);
  out.report.mode = "zero-shot";
  out.report.seed = config.seed;
  out.report.config = to_key_values(config);
  evaluate_scores(probe_logits(out.probe, embeddings), labels, split, out.probe.valid, out.report);
  for (const LabelResult& r : out.report.labels) {
    if (r.threshold) out.probe.thresholds[r.label] = *r.threshold;
  }
  return out;
}

std::vector<FewShotRow> few_shot_curve(const Matrix& embeddings, const LabelMatrix& labels,
                                       const std::vector<SplitTag>& split, const AdaptConfig& config) {
  check_split(embeddings, labels, split);
  const auto train = rows_with(split, SplitTag::train);
  const auto test = rows_with(split, SplitTag::test);
  if (train.empty() || test.empty()) throw DataError("few-shot probing needs non-empty train and test splits");
  const Standardizer st = fit_standardizer(embeddings, train);
  const Eigen::Index l = labels.cols();

  std::vector<std::vector<NodeId>> pos(static_cast<std::size_t>(l)), neg(static_cast<std::size_t>(l));
  for (Eigen::Index c = 0; c < l; ++c) {
    for (NodeId r : train) (labels(r, c) ? pos[c] : neg[c]).push_back(r);
  }

  std::vector<FewShotRow> rows;
  for (std::size_t k : config.k_grid) {
    if (k == 0) throw ConfigError("few-shot K must be positive");
    FewShotRow row;
    row.k = k;
    std::vector<Eigen::Index> usable;
    for (Eigen::Index c = 0; c < l; ++c) {
      if (pos[c].size() >= k && neg[c].size() >= k && both_classes(labels, c, test)) usable.push_back(c);
    }
    row.n_valid_labels = usable.size();
    row.skipped_labels = static_cast<std::size_t>(l) - usable.size();
    for (std::size_t s = 0; s < config.few_shot_seeds; ++s) {
      const std::uint64_t seed = config.seed + s;
      std::vector<std::optional<double>> aucs;
      for (Eigen::Index c : usable) {
        Rng rng(derive_seed(seed, k, static_cast<std::uint64_t>(c)));
        std::vector<NodeId> p = pos[c], q = neg[c];
        for (std::size_t i = 0; i < k; ++i) {
          std::swap(p[i], p[i + rng.below(p.size() - i)]);
          std::swap(q[i], q[i + rng.below(q.size() - i)]);
        }
        std::vector<NodeId> fit(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(k));
        fit.insert(fit.end(), q.begin(), q.begin() + static_cast<std::ptrdiff_t>(k));
        LabelMatrix y(labels.rows(), 1);
        y.col(0) = labels.col(c);
        const ProbeModel probe = fit_probe(embeddings, y, fit, st, config);
        const Matrix z = probe_logits(probe, embeddings);
        aucs.push_back(roc_auc(column(z, 0, test), column(labels, c, test)));
      }
      row.per_seed.push_back(mean_valid(aucs));
    }
    row.mean = mean_valid(row.per_seed);
    if (row.mean) {
      double ss = 0.0;
      std::size_t n = 0;
      for (const auto& v : row.per_seed) {
        if (v) {
          ss += (*v - *row.mean) * (*v - *row.mean);
          ++n;
        }
      }
      row.sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Fine-tuning

ClassifierHead make_head(std::size_t input_dim, std::size_t labels, std::uint64_t seed) {
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(input_dim));
  Matrix w(static_cast<Eigen::Index>(input_dim), static_cast<Eigen::Index>(labels));
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-bound, bound);
  return {nn::Parameter("head/weight", std::move(w)),
          nn::Parameter("head/bias", Matrix::Zero(1, static_cast<Eigen::Index>(labels)))};
}

nn::Var bce_with_logits(nn::Tape& t, nn::Var logits, const LabelMatrix& labels, std::span<const NodeId> rows,
                        const std::vector<bool>& columns) {
  const Matrix& z = t.value(logits);
  if (z.rows() != labels.rows() || z.cols() != labels.cols() || columns.size() != static_cast<std::size_t>(z.cols())) {
    throw DimensionError("bce_with_logits: logits and labels differ in shape");
  }
  std::size_t count = 0;
  double total = 0.0;
  for (NodeId r : rows) {
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      if (!columns[c]) continue;
      total += softplus(z(r, c)) - (labels(r, c) ? z(r, c) : 0.0);
      ++count;
    }
  }
  Matrix out(1, 1);
  out(0, 0) = count ? total / static_cast<double>(count) : 0.0;
  if (count == 0) return t.push(std::move(out), false);
  std::vector<NodeId> rs(rows.begin(), rows.end());
  const LabelMatrix* y = &labels;
  return t.push(std::move(out), t.requires_grad(logits),
                [logits, rs = std::move(rs), y, columns, count](nn::Tape& t, const Matrix& up) {
                  const Matrix& z = t.value(logits);
                  Matrix dz = Matrix::Zero(z.rows(), z.cols());
                  const double w = up(0, 0) / static_cast<double>(count);
                  for (NodeId r : rs) {
                    for (Eigen::Index c = 0; c < z.cols(); ++c) {
                      if (columns[c]) dz(r, c) += w * (sigmoid(z(r, c)) - ((*y)(r, c) ? 1.0 : 0.0));
                    }
                  }
                  t.accumulate(logits, dz);
                });
}

namespace {

struct Snapshot {
  Adapter adapter;
  Backbone backbone;
  nn::Parameter projection;
  ClassifierHead head;
};

Matrix eval_logits(ModelState& model, Adapter& adapter, ClassifierHead& head, const Graph& graph,
                   const Matrix& context) {
  Matrix e = embed(model, adapter, graph, context);
  Matrix z = e * head.weight.value;
  z.rowwise() += head.bias.value.row(0);
  return z;
}

std::optional<double> mean_auc_on(const Matrix& scores, const LabelMatrix& labels, std::span<const NodeId> rows,
                                  const std::vector<bool>& columns) {
  std::vector<std::optional<double>> aucs;
  for (Eigen::Index c = 0; c < labels.cols(); ++c) {
    if (columns[c]) aucs.push_back(roc_auc(column(scores, c, rows), column(labels, c, rows)));
  }
  return mean_valid(aucs);
}

}  // namespace

FinetuneResult finetune_two_stage(const ModelState& pretrained, const Adapter& initial_adapter,
                                  const std::string& graph_id, const Graph& graph, const Matrix& context,
                                  const AdaptConfig& config) {
  if (!graph.labels() || !graph.split()) throw DataError("fine-tuning needs labels and a train/valid/test split");
  const LabelMatrix& labels = *graph.labels();
  const std::vector<SplitTag>& split = *graph.split();
  const auto train = rows_with(split, SplitTag::train);
  const auto valid = rows_with(split, SplitTag::valid);
  if (train.empty()) throw DataError("the train split is empty");

  FinetuneResult out;
  out.model = pretrained;
  Adapter adapter = initial_adapter;
  rename_adapter(adapter, graph_id);
  out.model.adapters.erase(graph_id);
  ModelState& model = out.model;

  std::vector<bool> columns(static_cast<std::size_t>(labels.cols()));
  for (Eigen::Index c = 0; c < labels.cols(); ++c) columns[c] = both_classes(labels, c, train);

  ClassifierHead head = make_head(2 * model.config.embed_dim, static_cast<std::size_t>(labels.cols()),
                                  derive_seed(config.seed, 11));
  nn::Adam opt(nn::AdamOptions{config.lr_adapter, config.weight_decay});
  EvalReport& report = out.report;
  report.mode = "finetune";
  report.seed = config.seed;
  report.config = to_key_values(config);

  std::optional<Snapshot> best;
  double best_score = -std::numeric_limits<double>::infinity();

  for (int stage = 1; stage <= 2; ++stage) {
    const std::uint64_t epochs = stage == 1 ? config.stage1_epochs : config.stage2_epochs;
    const TrainMask mask = stage == 1 ? TrainMask{true, false, false} : TrainMask{true, true, true};
    std::uint64_t since_best = 0;
    for (std::uint64_t epoch = 0; epoch < epochs; ++epoch) {
      const std::uint64_t frozen = backbone_checksum(model);
      nn::Tape t;
      StreamVars s = forward(t, model, adapter, graph, context, true,
                             derive_seed(config.seed, static_cast<std::uint64_t>(stage), epoch), mask, graph_id);
      nn::Var logits = nn::affine(t, s.e, t.param(head.weight), t.param(head.bias));
      nn::Var loss = bce_with_logits(t, logits, labels, train, columns);
      const double value = t.value(loss)(0, 0);
      if (!std::isfinite(value)) {
        throw NumericError("non-finite fine-tuning loss in stage " + std::to_string(stage) + ", epoch " +
                           std::to_string(epoch));
      }
      std::vector<nn::Parameter*> params{&adapter.weight, &head.weight, &head.bias};
      if (adapter.bias.value.size() > 0) params.push_back(&adapter.bias);
      if (stage == 2) {
        for (nn::Parameter* p : model.backbone_params()) params.push_back(p);
        params.push_back(&model.text_projection);
      }
      for (nn::Parameter* p : params) p->zero_grad();
      if (t.requires_grad(loss)) t.backward(loss);

      opt.step(adapter.weight, config.lr_adapter);
      if (adapter.bias.value.size() > 0) opt.step(adapter.bias, config.lr_adapter);
      opt.step(head.weight, config.lr_head);
      opt.step(head.bias, config.lr_head);
      if (stage == 2) {
        for (nn::Parameter* p : model.backbone_params()) opt.step(*p, config.lr_backbone);
        opt.step(model.text_projection, config.lr_projection);
      } else if (backbone_checksum(model) != frozen) {
        throw Error("backbone changed during the frozen fine-tuning stage");
      }

      EpochLog log{stage, epoch, value, std::nullopt};
      if (!valid.empty()) {
        log.valid_auc = mean_auc_on(eval_logits(model, adapter, head, graph, context), labels, valid, columns);
      }
      report.epochs.push_back(log);
      const double score = log.valid_auc.value_or(-std::numeric_limits<double>::infinity());
      if (!best || score > best_score) {
        best = Snapshot{adapter, model.backbone, model.text_projection, head};
        best_score = score;
        report.best_valid_auc = log.valid_auc;
        report.best_stage = stage;
        report.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= config.patience) {
        break;
      }
    }
  }

  if (best) {
    adapter = best->adapter;
    model.backbone = best->backbone;
    model.text_projection = best->projection;
    head = best->head;
  }
  const Matrix scores = eval_logits(model, adapter, head, graph, context);
  evaluate_scores(scores, labels, split, columns, report);
  model.adapters.emplace(graph_id, std::move(adapter));
  out.head = std::move(head);
  return out;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

nlohmann::ordered_json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::string opt_text(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

}  // namespace

std::string report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["mode"] = r.mode;
  j["seed"] = r.seed;
  j["mean_roc_auc"] = opt_json(r.mean_auc);
  j["mean_accuracy"] = opt_json(r.mean_accuracy);
  std::size_t valid = 0;
  for (const auto& l : r.labels) valid += l.valid ? 1 : 0;
  j["valid_labels"] = valid;
  j["total_labels"] = r.labels.size();
  if (r.macro_roc) j["macro_roc_auc"] = r.macro_roc->auc;
  if (r.best_valid_auc || r.best_epoch) {
    j["best_valid_mean_roc_auc"] = opt_json(r.best_valid_auc);
    j["best_stage"] = r.best_stage.value_or(0);
    j["best_epoch"] = r.best_epoch.value_or(0);
  }
  nlohmann::ordered_json labels = nlohmann::ordered_json::array();
  for (const auto& l : r.labels) {
    labels.push_back({{"label", l.label},
                      {"valid", l.valid},
                      {"note", l.note},
                      {"roc_auc", opt_json(l.auc)},
                      {"threshold", opt_json(l.threshold)},
                      {"accuracy", opt_json(l.accuracy)}});
  }
  j["labels"] = std::move(labels);
  if (!r.few_shot.empty()) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& f : r.few_shot) {
      nlohmann::ordered_json per_seed = nlohmann::ordered_json::array();
      for (const auto& v : f.per_seed) per_seed.push_back(opt_json(v));
      rows.push_back({{"k", f.k},
                      {"mean", opt_json(f.mean)},
                      {"sd", f.sd},
                      {"n_valid_labels", f.n_valid_labels},
                      {"skipped_labels", f.skipped_labels},
                      {"per_seed", std::move(per_seed)}});
    }
    j["few_shot"] = std::move(rows);
  }
  if (!r.epochs.empty()) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& e : r.epochs) {
      rows.push_back({{"stage", e.stage}, {"epoch", e.epoch}, {"train_loss", e.train_loss},
                      {"valid_mean_roc_auc", opt_json(e.valid_auc)}});
    }
    j["epochs"] = std::move(rows);
  }
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.config) cfg[k] = v;
  j["config"] = std::move(cfg);
  return j.dump(2) + "\n";
}

void write_report(const EvalReport& r, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  write_text((base / "report.json").string(), report_json(r));

  std::string t = "label\tvalid\troc_auc\tthreshold\taccuracy\tnote\n";
  for (const auto& l : r.labels) {
    t += std::to_string(l.label) + '\t' + (l.valid ? "1" : "0") + '\t' + opt_text(l.auc) + '\t' +
         opt_text(l.threshold) + '\t' + opt_text(l.accuracy) + '\t' + l.note + '\n';
  }
  write_text((base / "per_label.tsv").string(), t);

  if (!r.few_shot.empty()) {
    t = "k\tmean\tsd\tn_valid_labels\tskipped_labels\n";
    for (const auto& f : r.few_shot) {
      t += std::to_string(f.k) + '\t' + opt_text(f.mean) + '\t' + format_double(f.sd) + '\t' +
           std::to_string(f.n_valid_labels) + '\t' + std::to_string(f.skipped_labels) + '\n';
    }
    write_text((base / "few_shot.tsv").string(), t);
  }
  if (!r.epochs.empty()) {
    t = "stage\tepoch\ttrain_loss\tvalid_mean_roc_auc\n";
    for (const auto& e : r.epochs) {
      t += std::to_string(e.stage) + '\t' + std::to_string(e.epoch) + '\t' + format_double(e.train_loss) + '\t' +
           opt_text(e.valid_auc) + '\n';
    }
    write_text((base / "epochs.tsv").string(), t);
  }
  if (r.macro_roc) {
    t = "fpr\ttpr\n";
    for (std::size_t i = 0; i < r.macro_roc->fpr.size(); ++i) {
      t += format_double(r.macro_roc->fpr[i]) + '\t' + format_double(r.macro_roc->tpr[i]) + '\n';
    }
    write_text((base / "roc.tsv").string(), t);
  }
}

}  // namespace gfm
