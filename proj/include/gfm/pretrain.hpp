#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gfm/diff.hpp"
#include "gfm/graph.hpp"
#include "gfm/model.hpp"

namespace gfm {

struct PretrainConfig {
  std::uint64_t epochs = 250;
  std::uint64_t steps_per_epoch = 128;
  std::size_t anchor_batch = 1024;
  double temperature = 0.1;
  double smoothing = 5e-3;
  double restart = 0.15;
  int ppr_iters = 100;
  std::size_t topk = 96;
  std::size_t neg_samples = 1024;
  std::size_t large_graph_threshold = 20000;
  double lr = 1e-5;
  double weight_decay = 5e-4;
  std::uint64_t seed = 42;
};

/// Flat "key=value" lines ('#' comments). Unknown keys raise a ConfigError
/// that lists the accepted keys.
PretrainConfig parse_pretrain_config(const std::string& text, PretrainConfig base = {});
PretrainConfig load_pretrain_config(const std::string& path, PretrainConfig base = {});
/// Applies a single key=value override.
void set_pretrain_option(PretrainConfig& config, const std::string& key, const std::string& value);
std::map<std::string, std::string> to_key_values(const PretrainConfig& config);
std::vector<std::string> pretrain_config_keys();

// ---------------------------------------------------------------------------
// Personalised PageRank positives

/// Exactly `iterations` steps of r <- restart e_a + (1 - restart) P^T r from
/// r = e_a, with P the random-walk matrix; dangling mass returns to the anchor.
std::vector<double> ppr_scores(const Graph& graph, NodeId anchor, double restart = 0.15,
                               int iterations = 100);

struct RankedNode {
  NodeId node;
  double score;
};

/// Top-k nodes by PPR score, anchor excluded, ties broken by node id.
std::vector<RankedNode> ppr_topk(const Graph& graph, NodeId anchor, double restart = 0.15,
                                 int iterations = 100, std::size_t k = 96);

struct PprIndex {
  std::size_t width = 0;  // min(k, N - 1)
  std::vector<NodeId> nodes;   // N * width, row per anchor
  std::vector<double> scores;  // N * width

  std::span<const NodeId> positives(NodeId anchor) const {
    return {nodes.data() + anchor * width, width};
  }
  std::size_t node_count() const { return width ? nodes.size() / width : 0; }
};

/// Parallel across anchors; the result does not depend on the thread count.
PprIndex build_ppr_index(const Graph& graph, double restart = 0.15, int iterations = 100,
                         std::size_t k = 96, unsigned threads = 0);

/// Cache key: topology hash combined with the PPR parameters.
std::uint64_t ppr_cache_key(const Graph& graph, double restart, int iterations, std::size_t k);
void save_ppr_index(const PprIndex& index, std::uint64_t key, const std::string& path);
/// nullopt when the file is missing or was built for a different key.
std::optional<PprIndex> load_ppr_index(const std::string& path, std::uint64_t key);
/// Builds or reuses `<cache_dir>/ppr_<key>.bin`; empty cache_dir disables caching.
PprIndex cached_ppr_index(const Graph& graph, const PretrainConfig& config, const std::string& cache_dir);

// ---------------------------------------------------------------------------
// Losses

/// Symmetric InfoNCE over (anchor, positive) pairs:
///   -1/2 [ log softmax_k(g_a . z_k / tau)[p] + log softmax_k(z_p . g_k / tau)[a] ]
/// averaged over pairs. `candidates` lists the bank rows; the pair's own
/// positive (resp. anchor) is appended when absent. An empty span means
/// every row of the bank.
nn::Var infonce_symmetric(nn::Tape& t, nn::Var g_bank, nn::Var z_bank, std::span<const NodeId> anchors,
                          std::span<const NodeId> positives, double tau,
                          std::span<const NodeId> candidates = {});

/// Value-only convenience wrapper over the tape op.
double infonce_symmetric(const Matrix& g_bank, const Matrix& z_bank, std::span<const NodeId> anchors,
                         std::span<const NodeId> positives, double tau,
                         std::span<const NodeId> candidates = {});

/// lambda / |E| * sum over undirected edges of ||g_u - g_v||^2; zero for |E| = 0.
nn::Var laplacian_smoothing(nn::Tape& t, nn::Var g, const Graph& graph, double lambda);
double laplacian_smoothing(const Matrix& g, const Graph& graph, double lambda);

// ---------------------------------------------------------------------------
// Training

struct PretrainGraph {
  std::string id;
  Graph graph;
  Matrix context;  // N x 384 context embeddings
};

struct StepLoss {
  double nce = 0.0;
  double smooth = 0.0;
  double total = 0.0;
};

struct LossRecord {
  std::uint64_t step = 0;
  std::string graph_id;
  StepLoss loss;
};

/// One contrastive evaluation on `data`: samples anchors and positives from
/// `step_seed`, computes InfoNCE + smoothing and, when `backward` is set,
/// leaves gradients in the parameters selected by `mask`.
StepLoss contrastive_step(ModelState& model, Adapter& adapter, const PretrainGraph& data,
                          const PprIndex& ppr, const PretrainConfig& config, std::uint64_t step_seed,
                          bool training, const TrainMask& mask, bool backward);

struct PretrainResult {
  ModelState best;  // parameters that produced the lowest step loss
  ModelState last;
  std::vector<LossRecord> history;
  double best_loss = 0.0;
  std::uint64_t best_step = 0;
};

using ProgressFn = std::function<void(const LossRecord&)>;

/// Runs epochs * steps_per_epoch steps. Each step samples a graph uniformly,
/// draws min(anchor_batch, N) anchors without replacement and one positive
/// per anchor uniformly from its top-k PPR list, and applies one Adam update.
/// Passing `resume` continues from that state; with zero steps it is
/// returned unchanged. Throws NumericError on a non-finite loss.
PretrainResult pretrain(std::span<const PretrainGraph> graphs, const PretrainConfig& config,
                        std::optional<ModelState> resume = std::nullopt,
                        std::span<const PprIndex> ppr = {}, const ProgressFn& progress = {},
                        const ModelConfig& model_config = {});

void write_loss_history(std::span<const LossRecord> history, const std::string& path);

}  // namespace gfm
