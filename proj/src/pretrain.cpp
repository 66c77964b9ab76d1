#include "gfm/pretrain.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "gfm/hash.hpp"
#include "gfm/random.hpp"
#include "gfm/text.hpp"

namespace gfm {

// ---------------------------------------------------------------------------
// Config


std::vector<std::string> pretrain_config_keys() {
  return {"epochs",      "steps_per_epoch", "anchor_batch", "temperature",
          "smoothing",   "restart",         "ppr_iters",    "topk",
          "neg_samples", "large_graph_threshold", "lr",     "weight_decay",
          "seed"};
}

void set_pretrain_option(PretrainConfig& c, const std::string& key, const std::string& value) {
  if (key == "epochs") c.epochs = parse_number<std::uint64_t>(key, value);
  else if (key == "steps_per_epoch") c.steps_per_epoch = parse_number<std::uint64_t>(key, value);
  else if (key == "anchor_batch") c.anchor_batch = parse_number<std::size_t>(key, value);
  else if (key == "temperature") c.temperature = parse_number<double>(key, value);
  else if (key == "smoothing") c.smoothing = parse_number<double>(key, value);
  else if (key == "restart") c.restart = parse_number<double>(key, value);
  else if (key == "ppr_iters") c.ppr_iters = parse_number<int>(key, value);
  else if (key == "topk") c.topk = parse_number<std::size_t>(key, value);
  else if (key == "neg_samples") c.neg_samples = parse_number<std::size_t>(key, value);
  else if (key == "large_graph_threshold") c.large_graph_threshold = parse_number<std::size_t>(key, value);
  else if (key == "lr") c.lr = parse_number<double>(key, value);
  else if (key == "weight_decay") c.weight_decay = parse_number<double>(key, value);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
  else {
    std::string valid;
    for (const auto& k : pretrain_config_keys()) valid += (valid.empty() ? "" : ", ") + k;
    throw ConfigError("unknown config key '" + key + "' (valid keys: " + valid + ")");
  }
  if (c.temperature <= 0.0) throw ConfigError("temperature must be positive");
  if (c.restart <= 0.0 || c.restart >= 1.0) throw ConfigError("restart must lie in (0, 1)");
  if (c.anchor_batch == 0 || c.topk == 0 || c.neg_samples == 0 || c.ppr_iters <= 0) {
    throw ConfigError("'" + key + "' must be positive");
  }
  if (c.lr <= 0.0 || c.weight_decay < 0.0 || c.smoothing < 0.0) {
    throw ConfigError("'" + key + "' is out of range");
  }
}

PretrainConfig parse_pretrain_config(const std::string& text, PretrainConfig base) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + line + "'");
    set_pretrain_option(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

PretrainConfig load_pretrain_config(const std::string& path, PretrainConfig base) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_pretrain_config(ss.str(), base);
}

std::map<std::string, std::string> to_key_values(const PretrainConfig& c) {
  return {
      {"epochs", std::to_string(c.epochs)},
      {"steps_per_epoch", std::to_string(c.steps_per_epoch)},
      {"anchor_batch", std::to_string(c.anchor_batch)},
      {"temperature", format_double(c.temperature)},
      {"smoothing", format_double(c.smoothing)},
      {"restart", format_double(c.restart)},
      {"ppr_iters", std::to_string(c.ppr_iters)},
      {"topk", std::to_string(c.topk)},
      {"neg_samples", std::to_string(c.neg_samples)},
      {"large_graph_threshold", std::to_string(c.large_graph_threshold)},
      {"lr", format_double(c.lr)},
      {"weight_decay", format_double(c.weight_decay)},
      {"seed", std::to_string(c.seed)},
  };
}

// ---------------------------------------------------------------------------
// PPR

std::vector<double> ppr_scores(const Graph& graph, NodeId anchor, double restart, int iterations) {
  const std::size_t n = graph.node_count();
  std::vector<double> r(n, 0.0), next(n), share(n);
  r[anchor] = 1.0;
  for (int it = 0; it < iterations; ++it) {
    double dangling = 0.0;
    for (NodeId u = 0; u < n; ++u) {
      const std::size_t d = graph.degree(u);
      if (d == 0) {
        dangling += r[u];
        share[u] = 0.0;
      } else {
        share[u] = r[u] / static_cast<double>(d);
      }
    }
    for (NodeId v = 0; v < n; ++v) {
      double acc = 0.0;
      for (NodeId u : graph.neighbors(v)) acc += share[u];
      next[v] = (1.0 - restart) * acc;
    }
    next[anchor] += restart + (1.0 - restart) * dangling;
    r.swap(next);
  }
  return r;
}

std::vector<RankedNode> ppr_topk(const Graph& graph, NodeId anchor, double restart, int iterations,
                                 std::size_t k) {
  const auto scores = ppr_scores(graph, anchor, restart, iterations);
  std::vector<RankedNode> all;
  all.reserve(scores.size());
  for (NodeId v = 0; v < scores.size(); ++v) {
    if (v != anchor) all.push_back({v, scores[v]});
  }
  const std::size_t keep = std::min(k, all.size());
  auto better = [](const RankedNode& a, const RankedNode& b) {
    return a.score > b.score || (a.score == b.score && a.node < b.node);
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), better);
  all.resize(keep);
  return all;
}

PprIndex build_ppr_index(const Graph& graph, double restart, int iterations, std::size_t k,
                         unsigned threads) {
  const std::size_t n = graph.node_count();
  PprIndex index;
  index.width = n > 0 ? std::min(k, n - 1) : 0;
  index.nodes.assign(n * index.width, 0);
  index.scores.assign(n * index.width, 0.0);
  if (index.width == 0) return index;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t a = begin; a < end; ++a) {
      const auto top = ppr_topk(graph, static_cast<NodeId>(a), restart, iterations, k);
      for (std::size_t j = 0; j < top.size(); ++j) {
        index.nodes[a * index.width + j] = top[j].node;
        index.scores[a * index.width + j] = top[j].score;
      }
    }
  };
  if (threads <= 1) {
    work(0, n);
    return index;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t b = t * chunk, e = std::min(n, b + chunk);
    if (b < e) pool.emplace_back(work, b, e);
  }
  return index;
}

namespace {
constexpr char kPprMagic[8] = {'G', 'F', 'M', 'P', 'P', 'R', '0', '1'};
}

std::uint64_t ppr_cache_key(const Graph& graph, double restart, int iterations, std::size_t k) {
  Fnv1a h;
  h.update_value(graph.topology_hash());
  h.update_value(restart);
  h.update_value(static_cast<std::int64_t>(iterations));
  h.update_value(static_cast<std::uint64_t>(k));
  return h.digest();
}

void save_ppr_index(const PprIndex& index, std::uint64_t key, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  const std::uint64_t n = index.node_count(), w = index.width;
  out.write(kPprMagic, 8);
  out.write(reinterpret_cast<const char*>(&key), 8);
  out.write(reinterpret_cast<const char*>(&n), 8);
  out.write(reinterpret_cast<const char*>(&w), 8);
  out.write(reinterpret_cast<const char*>(index.nodes.data()),
            static_cast<std::streamsize>(index.nodes.size() * sizeof(NodeId)));
  out.write(reinterpret_cast<const char*>(index.scores.data()),
            static_cast<std::streamsize>(index.scores.size() * sizeof(double)));
}

std::optional<PprIndex> load_ppr_index(const std::string& path, std::uint64_t key) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[8];
  std::uint64_t stored = 0, n = 0, w = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&stored), 8);
  in.read(reinterpret_cast<char*>(&n), 8);
  in.read(reinterpret_cast<char*>(&w), 8);
  if (!in || std::memcmp(magic, kPprMagic, 8) != 0 || stored != key) return std::nullopt;
  PprIndex index;
  index.width = w;
  index.nodes.resize(n * w);
  index.scores.resize(n * w);
  in.read(reinterpret_cast<char*>(index.nodes.data()),
          static_cast<std::streamsize>(index.nodes.size() * sizeof(NodeId)));
  in.read(reinterpret_cast<char*>(index.scores.data()),
          static_cast<std::streamsize>(index.scores.size() * sizeof(double)));
  if (!in) return std::nullopt;
  return index;
}

PprIndex cached_ppr_index(const Graph& graph, const PretrainConfig& config, const std::string& cache_dir) {
  if (cache_dir.empty()) return build_ppr_index(graph, config.restart, config.ppr_iters, config.topk);
  const std::uint64_t key = ppr_cache_key(graph, config.restart, config.ppr_iters, config.topk);
  const std::string path = (std::filesystem::path(cache_dir) / ("ppr_" + to_hex(key) + ".bin")).string();
  if (auto cached = load_ppr_index(path, key)) return *cached;
  PprIndex index = build_ppr_index(graph, config.restart, config.ppr_iters, config.topk);
  std::filesystem::create_directories(cache_dir);
  save_ppr_index(index, key, path);
  return index;
}

// ---------------------------------------------------------------------------
// Losses

namespace {

// One direction of the symmetric loss: queries q_b (rows of q_bank at
// q_rows[b]) scored against keys (rows of k_bank at the candidate list, plus
// k_rows[b] when missing). Returns per-pair -log softmax at the target and
// the probabilities needed for the backward pass.
struct Direction {
  Matrix probs;                 // B x |C|
  std::vector<double> extra_p;  // probability of the appended target column, or -1
  std::vector<int> target_col;  // column of the target inside C, or -1
  std::vector<double> loss;
};

Direction score_direction(const Matrix& q_bank, const Matrix& k_bank, std::span<const NodeId> q_rows,
                          std::span<const NodeId> k_rows, const std::vector<NodeId>& cand,
                          const std::vector<int>& pos_in_cand, double tau) {
  const std::size_t B = q_rows.size();
  Matrix q(B, q_bank.cols()), kc(cand.size(), k_bank.cols());
  for (std::size_t b = 0; b < B; ++b) q.row(b) = q_bank.row(q_rows[b]);
  for (std::size_t c = 0; c < cand.size(); ++c) kc.row(c) = k_bank.row(cand[c]);
  Matrix s(B, cand.size());
  s.noalias() = q * kc.transpose();
  s /= tau;

  Direction d;
  d.probs.resize(B, cand.size());
  d.extra_p.assign(B, -1.0);
  d.target_col.assign(B, -1);
  d.loss.resize(B);
  for (std::size_t b = 0; b < B; ++b) {
    const int col = pos_in_cand[k_rows[b]];
    d.target_col[b] = col;
    double extra = 0.0;
    double mx = s.row(b).maxCoeff();
    if (col < 0) {
      extra = q.row(b).dot(k_bank.row(k_rows[b])) / tau;
      mx = std::max(mx, extra);
    }
    double z = (s.row(b).array() - mx).exp().sum();
    if (col < 0) z += std::exp(extra - mx);
    const double lse = mx + std::log(z);
    d.probs.row(b) = (s.row(b).array() - lse).exp().matrix();
    const double target = col < 0 ? extra : s(b, col);
    if (col < 0) d.extra_p[b] = std::exp(extra - lse);
    d.loss[b] = lse - target;
  }
  return d;
}

// Accumulates d(loss)/d(q_bank) and d(loss)/d(k_bank) for one direction,
// `coef` being the upstream gradient times the per-pair weight.
void backprop_direction(const Direction& d, const Matrix& q_bank, const Matrix& k_bank,
                        std::span<const NodeId> q_rows, std::span<const NodeId> k_rows,
                        const std::vector<NodeId>& cand, double tau, double coef, Matrix& dq_bank,
                        Matrix& dk_bank) {
  const std::size_t B = q_rows.size();
  Matrix ds = d.probs * coef;
  for (std::size_t b = 0; b < B; ++b) {
    if (d.target_col[b] >= 0) ds(b, d.target_col[b]) -= coef;
  }
  Matrix q(B, q_bank.cols()), kc(cand.size(), k_bank.cols());
  for (std::size_t b = 0; b < B; ++b) q.row(b) = q_bank.row(q_rows[b]);
  for (std::size_t c = 0; c < cand.size(); ++c) kc.row(c) = k_bank.row(cand[c]);
  Matrix dq(B, q_bank.cols());
  dq.noalias() = ds * kc / tau;
  Matrix dkc(cand.size(), k_bank.cols());
  dkc.noalias() = ds.transpose() * q / tau;
  for (std::size_t b = 0; b < B; ++b) {
    if (d.target_col[b] < 0) {
      const double de = coef * (d.extra_p[b] - 1.0);
      dq.row(b) += de * k_bank.row(k_rows[b]) / tau;
      dk_bank.row(k_rows[b]) += de * q.row(b) / tau;
    }
    dq_bank.row(q_rows[b]) += dq.row(b);
  }
  for (std::size_t c = 0; c < cand.size(); ++c) dk_bank.row(cand[c]) += dkc.row(c);
}

}  // namespace

nn::Var infonce_symmetric(nn::Tape& t, nn::Var g_bank, nn::Var z_bank, std::span<const NodeId> anchors,
                          std::span<const NodeId> positives, double tau,
                          std::span<const NodeId> candidates) {
  const Matrix& g = t.value(g_bank);
  const Matrix& z = t.value(z_bank);
  if (anchors.empty() || anchors.size() != positives.size()) {
    throw DimensionError("infonce: need matching, non-empty anchor and positive lists");
  }
  if (g.rows() != z.rows() || g.cols() != z.cols()) {
    throw DimensionError("infonce: graph and text banks differ in shape");
  }
  if (g.rows() == 0) throw DimensionError("infonce: empty bank");
  if (tau <= 0.0) throw ConfigError("infonce: temperature must be positive");

  std::vector<NodeId> cand;
  if (candidates.empty()) {
    cand.resize(static_cast<std::size_t>(g.rows()));
    std::iota(cand.begin(), cand.end(), NodeId{0});
  } else {
    cand.assign(candidates.begin(), candidates.end());
  }
  std::vector<int> pos(static_cast<std::size_t>(g.rows()), -1);
  for (std::size_t c = 0; c < cand.size(); ++c) {
    if (cand[c] >= g.rows()) throw DimensionError("infonce: candidate index out of range");
    pos[cand[c]] = static_cast<int>(c);
  }
  for (std::size_t b = 0; b < anchors.size(); ++b) {
    if (anchors[b] >= g.rows() || positives[b] >= g.rows()) {
      throw DimensionError("infonce: pair index out of range");
    }
  }

  auto fwd = std::make_shared<std::pair<Direction, Direction>>(
      score_direction(g, z, anchors, positives, cand, pos, tau),
      score_direction(z, g, positives, anchors, cand, pos, tau));
  double total = 0.0;
  for (std::size_t b = 0; b < anchors.size(); ++b) {
    total += 0.5 * (fwd->first.loss[b] + fwd->second.loss[b]);
  }
  Matrix out(1, 1);
  out(0, 0) = total / static_cast<double>(anchors.size());

  const bool rg = t.requires_grad(g_bank) || t.requires_grad(z_bank);
  std::vector<NodeId> a(anchors.begin(), anchors.end()), p(positives.begin(), positives.end());
  return t.push(std::move(out), rg,
                [g_bank, z_bank, fwd, a = std::move(a), p = std::move(p), cand = std::move(cand),
                 tau](nn::Tape& t, const Matrix& up) {
                  const Matrix& g = t.value(g_bank);
                  const Matrix& z = t.value(z_bank);
                  const double coef = up(0, 0) * 0.5 / static_cast<double>(a.size());
                  Matrix dg = Matrix::Zero(g.rows(), g.cols());
                  Matrix dz = Matrix::Zero(z.rows(), z.cols());
                  backprop_direction(fwd->first, g, z, a, p, cand, tau, coef, dg, dz);
                  backprop_direction(fwd->second, z, g, p, a, cand, tau, coef, dz, dg);
                  t.accumulate(g_bank, dg);
                  t.accumulate(z_bank, dz);
                });
}

double infonce_symmetric(const Matrix& g_bank, const Matrix& z_bank, std::span<const NodeId> anchors,
                         std::span<const NodeId> positives, double tau,
                         std::span<const NodeId> candidates) {
  nn::Tape t;
  nn::Var g = t.constant(g_bank);
  nn::Var z = t.constant(z_bank);
  return t.value(infonce_symmetric(t, g, z, anchors, positives, tau, candidates))(0, 0);
}

nn::Var laplacian_smoothing(nn::Tape& t, nn::Var g, const Graph& graph, double lambda) {
  const Matrix& gv = t.value(g);
  if (static_cast<std::size_t>(gv.rows()) != graph.node_count()) {
    throw DimensionError("laplacian_smoothing: embedding rows do not match node count");
  }
  Matrix out = Matrix::Zero(1, 1);
  const std::size_t m = graph.edge_count();
  if (m == 0) return t.push(std::move(out), false);
  double acc = 0.0;
  for (NodeId u = 0; u < graph.node_count(); ++u) {
    for (NodeId v : graph.neighbors(u)) {
      if (u < v) acc += (gv.row(u) - gv.row(v)).squaredNorm();
    }
  }
  const double w = lambda / static_cast<double>(m);
  out(0, 0) = w * acc;
  const Graph* gp = &graph;
  return t.push(std::move(out), t.requires_grad(g), [g, gp, w](nn::Tape& t, const Matrix& up) {
    const Matrix& gv = t.value(g);
    Matrix dg = Matrix::Zero(gv.rows(), gv.cols());
    const double c = 2.0 * w * up(0, 0);
    for (NodeId u = 0; u < gp->node_count(); ++u) {
      for (NodeId v : gp->neighbors(u)) {
        if (u < v) {
          const RowVector diff = c * (gv.row(u) - gv.row(v));
          dg.row(u) += diff;
          dg.row(v) -= diff;
        }
      }
    }
    t.accumulate(g, dg);
  });
}

double laplacian_smoothing(const Matrix& g, const Graph& graph, double lambda) {
  nn::Tape t;
  return t.value(laplacian_smoothing(t, t.constant(g), graph, lambda))(0, 0);
}

// ---------------------------------------------------------------------------
// Training

namespace {

std::vector<NodeId> sample_without_replacement(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<NodeId> pool(n);
  std::iota(pool.begin(), pool.end(), NodeId{0});
  k = std::min(k, n);
  for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + rng.below(n - i)]);
  pool.resize(k);
  return pool;
}

std::vector<nn::Parameter*> masked_params(ModelState& model, Adapter& adapter, const TrainMask& mask) {
  std::vector<nn::Parameter*> out;
  if (mask.adapter) {
    out.push_back(&adapter.weight);
    if (adapter.bias.value.size() > 0) out.push_back(&adapter.bias);
  }
  if (mask.backbone) {
    for (nn::Parameter* p : model.backbone_params()) out.push_back(p);
  }
  if (mask.projection) out.push_back(&model.text_projection);
  return out;
}

}  // namespace

StepLoss contrastive_step(ModelState& model, Adapter& adapter, const PretrainGraph& data,
                          const PprIndex& ppr, const PretrainConfig& config, std::uint64_t step_seed,
                          bool training, const TrainMask& mask, bool backward) {
  const Graph& graph = data.graph;
  const std::size_t n = graph.node_count();
  if (n < 2) throw DataError("graph '" + data.id + "' needs at least two nodes for contrastive training");
  if (ppr.node_count() != n || ppr.width == 0) {
    throw DimensionError("PPR index does not match graph '" + data.id + "'");
  }
  Rng rng(step_seed);
  const auto anchors = sample_without_replacement(rng, n, config.anchor_batch);
  std::vector<NodeId> positives(anchors.size());
  for (std::size_t b = 0; b < anchors.size(); ++b) {
    positives[b] = ppr.positives(anchors[b])[rng.below(ppr.width)];
  }
  std::vector<NodeId> candidates;
  if (n > config.large_graph_threshold) candidates = sample_without_replacement(rng, n, config.neg_samples);

  nn::Tape t;
  StreamVars s = forward(t, model, adapter, graph, data.context, training, derive_seed(step_seed, 7), mask,
                         data.id);
  nn::Var nce = infonce_symmetric(t, s.g, s.z, anchors, positives, config.temperature, candidates);
  nn::Var smooth = laplacian_smoothing(t, s.g, graph, config.smoothing);
  nn::Var total = nn::add(t, nce, smooth);

  StepLoss loss{t.value(nce)(0, 0), t.value(smooth)(0, 0), t.value(total)(0, 0)};
  if (backward && t.requires_grad(total)) {
    for (nn::Parameter* p : masked_params(model, adapter, mask)) p->zero_grad();
    t.backward(total);
  }
  return loss;
}

PretrainResult pretrain(std::span<const PretrainGraph> graphs, const PretrainConfig& config,
                        std::optional<ModelState> resume, std::span<const PprIndex> ppr,
                        const ProgressFn& progress, const ModelConfig& model_config) {
  if (graphs.empty()) throw ConfigError("pretraining needs at least one graph");
  if (!ppr.empty() && ppr.size() != graphs.size()) {
    throw ConfigError("one PPR index per pretraining graph is required");
  }
  ModelState model = resume ? std::move(*resume) : init_model(model_config, config.seed);
  model.optimizer.options().lr = config.lr;
  model.optimizer.options().weight_decay = config.weight_decay;

  for (const PretrainGraph& pg : graphs) {
    auto it = model.adapters.find(pg.id);
    if (it == model.adapters.end()) {
      Adapter a = make_adapter(pg.id, pg.graph.feature_dim(), model.config,
                               derive_seed(config.seed, Fnv1a().update(pg.id).digest()));
      model.adapters.emplace(pg.id, std::move(a));
    } else if (it->second.feature_dim != pg.graph.feature_dim()) {
      throw DimensionError("adapter for graph '" + pg.id + "' expects " +
                           std::to_string(it->second.feature_dim) + " features, graph has " +
                           std::to_string(pg.graph.feature_dim()));
    }
  }
  std::vector<PprIndex> built;
  if (ppr.empty()) {
    for (const PretrainGraph& pg : graphs) {
      built.push_back(build_ppr_index(pg.graph, config.restart, config.ppr_iters, config.topk));
    }
    ppr = built;
  }

  PretrainResult result;
  result.best_loss = std::numeric_limits<double>::infinity();
  result.best_step = model.step;
  const std::uint64_t total_steps = config.epochs * config.steps_per_epoch;
  bool have_best = false;
  TrainMask all;
  for (std::uint64_t s = 0; s < total_steps; ++s) {
    const std::uint64_t global = model.step;
    Rng pick(derive_seed(config.seed, global, 1));
    const std::size_t gi = static_cast<std::size_t>(pick.below(graphs.size()));
    const PretrainGraph& pg = graphs[gi];
    Adapter& adapter = model.adapters.at(pg.id);
    const StepLoss loss = contrastive_step(model, adapter, pg, ppr[gi], config,
                                           derive_seed(config.seed, global, 2), true, all, true);
    if (!std::isfinite(loss.total)) {
      throw NumericError("non-finite loss at step " + std::to_string(global) + " on graph '" + pg.id +
                         "' (nce=" + format_double(loss.nce) + ", smooth=" + format_double(loss.smooth) +
                         ", total=" + format_double(loss.total) + ")");
    }
    LossRecord rec{global, pg.id, loss};
    result.history.push_back(rec);
    if (progress) progress(rec);
    if (loss.total < result.best_loss) {
      result.best_loss = loss.total;
      result.best_step = global;
      result.best = model;
      have_best = true;
    }
    for (nn::Parameter* p : masked_params(model, adapter, all)) model.optimizer.step(*p);
    ++model.step;
  }
  if (!have_best) result.best = model;
  result.last = std::move(model);
  return result;
}

void write_loss_history(std::span<const LossRecord> history, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "step\tgraph_id\tnce\tsmooth\ttotal\n";
  for (const LossRecord& r : history) {
    out << r.step << '\t' << r.graph_id << '\t' << format_double(r.loss.nce) << '\t'
        << format_double(r.loss.smooth) << '\t' << format_double(r.loss.total) << '\n';
  }
}

}  // namespace gfm
