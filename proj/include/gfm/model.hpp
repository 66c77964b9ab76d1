#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gfm/diff.hpp"
#include "gfm/graph.hpp"

namespace gfm {

struct ModelConfig {
  std::size_t context_dim = kContextDim;
  std::size_t hidden_dim = 1024;  // adapter output
  std::size_t sage_hidden = 512;
  std::size_t embed_dim = 256;    // per stream; node embedding is twice this
  double alpha = 0.7;
  double dropout = 0.6;
  bool adapter_bias = true;
};

/// Per-graph affine map [X | Z_text] -> hidden_dim. Weight rows are ordered
/// feature columns first, then the context block.
struct Adapter {
  std::size_t feature_dim = 0;
  nn::Parameter weight;
  nn::Parameter bias;  // 1 x hidden_dim, empty when the model has no adapter bias

  std::size_t input_dim() const { return static_cast<std::size_t>(weight.value.rows()); }
};

struct Backbone {
  nn::Parameter w_self1, w_neigh1;  // hidden_dim -> sage_hidden
  nn::Parameter w_self2, w_neigh2;  // sage_hidden -> embed_dim
};

struct ModelState {
  ModelConfig config;
  std::map<std::string, Adapter> adapters;
  Backbone backbone;
  nn::Parameter text_projection;  // hidden_dim -> embed_dim
  nn::Adam optimizer;
  std::uint64_t step = 0;

  std::vector<nn::Parameter*> backbone_params();
  std::vector<nn::Parameter*> adapter_params(const std::string& graph_id);
};

ModelState init_model(const ModelConfig& config, std::uint64_t seed);

/// Fresh adapter with uniform(+-1/sqrt(fan_in)) weights and zero bias.
Adapter make_adapter(const std::string& graph_id, std::size_t feature_dim, const ModelConfig& config,
                     std::uint64_t seed);

/// Renames the parameters of `adapter` so they belong to `graph_id`.
void rename_adapter(Adapter& adapter, const std::string& graph_id);

struct TrainMask {
  bool adapter = true;
  bool backbone = true;
  bool projection = true;
};

struct StreamVars {
  nn::Var x_tilde;  // N x hidden_dim
  nn::Var g;        // graph stream, N x embed_dim, unit rows
  nn::Var z;        // text stream, N x embed_dim, unit rows
  nn::Var e;        // [alpha g | (1 - alpha) z], N x 2 embed_dim
};

/// [X | Z_text]; context alone when the graph has no raw features.
Matrix adapter_input(const Graph& graph, const Matrix& context);

nn::Var adapt_features(nn::Tape& t, const Graph& graph, const Matrix& context, Adapter& adapter,
                       bool trainable, const std::string& graph_name = "graph");

nn::Var graph_stream(nn::Tape& t, nn::Var x_tilde, const Graph& graph, Backbone& backbone,
                     double dropout_rate, bool training, std::uint64_t dropout_seed,
                     bool trainable = true);

nn::Var text_stream(nn::Tape& t, nn::Var x_tilde, nn::Parameter& projection, bool trainable = true);

nn::Var node_embedding(nn::Tape& t, nn::Var g, nn::Var z, double alpha);

/// Full forward pass through adapter, both streams and the combined embedding.
StreamVars forward(nn::Tape& t, ModelState& model, Adapter& adapter, const Graph& graph,
                   const Matrix& context, bool training, std::uint64_t dropout_seed,
                   const TrainMask& mask = {}, const std::string& graph_name = "graph");

/// Eval-mode N x 2 embed_dim embeddings.
Matrix embed(ModelState& model, Adapter& adapter, const Graph& graph, const Matrix& context);

std::uint64_t checksum(const nn::Parameter& p);
std::uint64_t backbone_checksum(const ModelState& model);  // backbone + text projection

// ---------------------------------------------------------------------------
// Checkpoints
//
// "GFMCKPT1" magic, uint64 entry count, then per entry: uint32 name length,
// name bytes, uint64 rows, uint64 cols, rows*cols float64; all little-endian.
// Entries are sorted by name. Adam moments are stored as adam/m/<param>,
// adam/v/<param> and adam/steps/<param> so training can resume exactly.

using MetaMap = std::map<std::string, double>;

void save_checkpoint(const ModelState& model, const std::string& path, const MetaMap& meta = {});
ModelState load_checkpoint(const std::string& path, MetaMap* meta = nullptr);

}  // namespace gfm
