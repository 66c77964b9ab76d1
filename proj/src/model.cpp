#include "gfm/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "gfm/hash.hpp"
#include "gfm/random.hpp"

namespace gfm {
namespace {

Matrix uniform_matrix(std::size_t rows, std::size_t cols, double bound, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  return m;
}

std::uint64_t name_seed(std::uint64_t seed, const std::string& name) {
  return derive_seed(seed, Fnv1a().update(name).digest());
}

nn::Parameter glorot(const std::string& name, std::size_t fan_in, std::size_t fan_out, std::uint64_t seed) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return {name, uniform_matrix(fan_in, fan_out, bound, name_seed(seed, name))};
}

std::string adapter_prefix(const std::string& id) { return "adapter/" + id + "/"; }

}  // namespace

std::vector<nn::Parameter*> ModelState::backbone_params() {
  return {&backbone.w_self1, &backbone.w_neigh1, &backbone.w_self2, &backbone.w_neigh2};
}

std::vector<nn::Parameter*> ModelState::adapter_params(const std::string& graph_id) {
  auto it = adapters.find(graph_id);
  if (it == adapters.end()) throw ConfigError("no adapter for graph '" + graph_id + "'");
  std::vector<nn::Parameter*> out{&it->second.weight};
  if (it->second.bias.value.size() > 0) out.push_back(&it->second.bias);
  return out;
}

ModelState init_model(const ModelConfig& config, std::uint64_t seed) {
  if (!(config.alpha > 0.0 && config.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  ModelState m;
  m.config = config;
  m.backbone.w_self1 = glorot("backbone/w_self1", config.hidden_dim, config.sage_hidden, seed);
  m.backbone.w_neigh1 = glorot("backbone/w_neigh1", config.hidden_dim, config.sage_hidden, seed);
  m.backbone.w_self2 = glorot("backbone/w_self2", config.sage_hidden, config.embed_dim, seed);
  m.backbone.w_neigh2 = glorot("backbone/w_neigh2", config.sage_hidden, config.embed_dim, seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.hidden_dim));
  m.text_projection = {"text_projection",
                       uniform_matrix(config.hidden_dim, config.embed_dim, bound,
                                      name_seed(seed, "text_projection"))};
  return m;
}

Adapter make_adapter(const std::string& graph_id, std::size_t feature_dim, const ModelConfig& config,
                     std::uint64_t seed) {
  Adapter a;
  a.feature_dim = feature_dim;
  const std::size_t fan_in = feature_dim + config.context_dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  const std::string prefix = adapter_prefix(graph_id);
  a.weight = {prefix + "weight",
              uniform_matrix(fan_in, config.hidden_dim, bound, name_seed(seed, prefix + "weight"))};
  if (config.adapter_bias) a.bias = {prefix + "bias", Matrix::Zero(1, config.hidden_dim)};
  return a;
}

void rename_adapter(Adapter& adapter, const std::string& graph_id) {
  adapter.weight.name = adapter_prefix(graph_id) + "weight";
  if (adapter.bias.value.size() > 0) adapter.bias.name = adapter_prefix(graph_id) + "bias";
}

Matrix adapter_input(const Graph& graph, const Matrix& context) {
  if (static_cast<std::size_t>(context.rows()) != graph.node_count()) {
    throw DimensionError("context has " + std::to_string(context.rows()) + " rows for " +
                         std::to_string(graph.node_count()) + " nodes");
  }
  if (!graph.features()) return context;
  Matrix in(context.rows(), graph.feature_dim() + context.cols());
  in.leftCols(graph.feature_dim()) = *graph.features();
  in.rightCols(context.cols()) = context;
  return in;
}

nn::Var adapt_features(nn::Tape& t, const Graph& graph, const Matrix& context, Adapter& adapter,
                       bool trainable, const std::string& graph_name) {
  if (graph.feature_dim() != adapter.feature_dim ||
      static_cast<std::size_t>(context.cols()) + adapter.feature_dim != adapter.input_dim()) {
    throw DimensionError("graph '" + graph_name + "' provides " + std::to_string(graph.feature_dim()) +
                         " feature + " + std::to_string(context.cols()) +
                         " context columns but its adapter expects " +
                         std::to_string(adapter.feature_dim) + " + " +
                         std::to_string(adapter.input_dim() - adapter.feature_dim));
  }
  nn::Var input = t.constant(adapter_input(graph, context));
  nn::Var w = t.param(adapter.weight, trainable);
  nn::Var b = adapter.bias.value.size() > 0 ? t.param(adapter.bias, trainable) : nn::Var{};
  return nn::affine(t, input, w, b);
}

nn::Var graph_stream(nn::Tape& t, nn::Var x_tilde, const Graph& graph, Backbone& backbone,
                     double dropout_rate, bool training, std::uint64_t dropout_seed, bool trainable) {
  nn::Var ws1 = t.param(backbone.w_self1, trainable);
  nn::Var wn1 = t.param(backbone.w_neigh1, trainable);
  nn::Var ws2 = t.param(backbone.w_self2, trainable);
  nn::Var wn2 = t.param(backbone.w_neigh2, trainable);
  nn::Var h = nn::dropout(t, x_tilde, dropout_rate, training, derive_seed(dropout_seed, 1));
  h = nn::sage_layer(t, h, graph, ws1, wn1, nn::Activation::relu);
  h = nn::dropout(t, h, dropout_rate, training, derive_seed(dropout_seed, 2));
  h = nn::sage_layer(t, h, graph, ws2, wn2, nn::Activation::none);
  return nn::row_l2_normalize(t, h);
}

nn::Var text_stream(nn::Tape& t, nn::Var x_tilde, nn::Parameter& projection, bool trainable) {
  return nn::row_l2_normalize(t, nn::matmul(t, x_tilde, t.param(projection, trainable)));
}

nn::Var node_embedding(nn::Tape& t, nn::Var g, nn::Var z, double alpha) {
  return nn::concat_cols(t, nn::scale(t, g, alpha), nn::scale(t, z, 1.0 - alpha));
}

StreamVars forward(nn::Tape& t, ModelState& model, Adapter& adapter, const Graph& graph,
                   const Matrix& context, bool training, std::uint64_t dropout_seed,
                   const TrainMask& mask, const std::string& graph_name) {
  StreamVars s;
  s.x_tilde = adapt_features(t, graph, context, adapter, mask.adapter, graph_name);
  s.g = graph_stream(t, s.x_tilde, graph, model.backbone, model.config.dropout, training,
                     dropout_seed, mask.backbone);
  s.z = text_stream(t, s.x_tilde, model.text_projection, mask.projection);
  s.e = node_embedding(t, s.g, s.z, model.config.alpha);
  return s;
}

Matrix embed(ModelState& model, Adapter& adapter, const Graph& graph, const Matrix& context) {
  nn::Tape t;
  StreamVars s = forward(t, model, adapter, graph, context, false, 0, {false, false, false});
  return t.value(s.e);
}

std::uint64_t checksum(const nn::Parameter& p) {
  Fnv1a h;
  h.update(p.name);
  const std::uint64_t r = p.value.rows(), c = p.value.cols();
  h.update_value(r).update_value(c);
  h.update(p.value.data(), static_cast<std::size_t>(p.value.size()) * sizeof(double));
  return h.digest();
}

std::uint64_t backbone_checksum(const ModelState& model) {
  Fnv1a h;
  for (const nn::Parameter* p : {&model.backbone.w_self1, &model.backbone.w_neigh1,
                                 &model.backbone.w_self2, &model.backbone.w_neigh2,
                                 &model.text_projection}) {
    h.update_value(checksum(*p));
  }
  return h.digest();
}

// ---------------------------------------------------------------------------
// Checkpoint IO

namespace {

constexpr char kCheckpointMagic[8] = {'G', 'F', 'M', 'C', 'K', 'P', 'T', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoints assume a little-endian host");

Matrix scalar(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return m;
}

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }

std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

}  // namespace

void save_checkpoint(const ModelState& model, const std::string& path, const MetaMap& meta) {
  std::map<std::string, Matrix> entries;
  const ModelConfig& c = model.config;
  entries["config/context_dim"] = scalar(static_cast<double>(c.context_dim));
  entries["config/hidden_dim"] = scalar(static_cast<double>(c.hidden_dim));
  entries["config/sage_hidden"] = scalar(static_cast<double>(c.sage_hidden));
  entries["config/embed_dim"] = scalar(static_cast<double>(c.embed_dim));
  entries["config/alpha"] = scalar(c.alpha);
  entries["config/dropout"] = scalar(c.dropout);
  entries["config/adapter_bias"] = scalar(c.adapter_bias ? 1.0 : 0.0);
  entries["state/step"] = scalar(static_cast<double>(model.step));

  auto put_param = [&](const nn::Parameter& p) { entries[p.name] = p.value; };
  put_param(model.backbone.w_self1);
  put_param(model.backbone.w_neigh1);
  put_param(model.backbone.w_self2);
  put_param(model.backbone.w_neigh2);
  put_param(model.text_projection);
  for (const auto& [id, a] : model.adapters) {
    put_param(a.weight);
    if (a.bias.value.size() > 0) put_param(a.bias);
  }
  const nn::AdamOptions& o = model.optimizer.options();
  entries["adam/options/lr"] = scalar(o.lr);
  entries["adam/options/weight_decay"] = scalar(o.weight_decay);
  entries["adam/options/beta1"] = scalar(o.beta1);
  entries["adam/options/beta2"] = scalar(o.beta2);
  entries["adam/options/eps"] = scalar(o.eps);
  entries["adam/options/decoupled"] = scalar(o.decoupled ? 1.0 : 0.0);
  for (const auto& [name, mom] : model.optimizer.moments()) {
    entries["adam/m/" + name] = mom.m;
    entries["adam/v/" + name] = mom.v;
    entries["adam/steps/" + name] = scalar(static_cast<double>(mom.steps));
  }
  for (const auto& [key, v] : meta) entries["meta/" + key] = scalar(v);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out.write(kCheckpointMagic, 8);
  put_u64(out, entries.size());
  for (const auto& [name, m] : entries) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u64(out, static_cast<std::uint64_t>(m.rows()));
    put_u64(out, static_cast<std::uint64_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * 8));
  }
  if (!out) throw DataError("failed writing " + path);
}

ModelState load_checkpoint(const std::string& path, MetaMap* meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) throw DataError(path + ": not a checkpoint");
  const std::uint64_t count = get_u64(in);
  std::map<std::string, Matrix> entries;
  for (std::uint64_t k = 0; k < count; ++k) {
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 4);
    std::string name(len, '\0');
    in.read(name.data(), len);
    const std::uint64_t rows = get_u64(in), cols = get_u64(in);
    if (!in || rows * cols > (std::uint64_t{1} << 32)) throw DataError(path + ": corrupt entry header");
    Matrix m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * 8));
    if (!in) throw DataError(path + ": truncated entry '" + name + "'");
    entries.emplace(std::move(name), std::move(m));
  }

  auto take = [&](const std::string& name) -> Matrix {
    auto it = entries.find(name);
    if (it == entries.end()) throw DataError(path + ": missing entry '" + name + "'");
    return it->second;
  };
  auto take_scalar = [&](const std::string& name) { return take(name)(0, 0); };

  ModelState m;
  m.config.context_dim = static_cast<std::size_t>(take_scalar("config/context_dim"));
  m.config.hidden_dim = static_cast<std::size_t>(take_scalar("config/hidden_dim"));
  m.config.sage_hidden = static_cast<std::size_t>(take_scalar("config/sage_hidden"));
  m.config.embed_dim = static_cast<std::size_t>(take_scalar("config/embed_dim"));
  m.config.alpha = take_scalar("config/alpha");
  m.config.dropout = take_scalar("config/dropout");
  m.config.adapter_bias = take_scalar("config/adapter_bias") != 0.0;
  m.step = static_cast<std::uint64_t>(take_scalar("state/step"));

  auto load_param = [&](const std::string& name) { return nn::Parameter(name, take(name)); };
  m.backbone.w_self1 = load_param("backbone/w_self1");
  m.backbone.w_neigh1 = load_param("backbone/w_neigh1");
  m.backbone.w_self2 = load_param("backbone/w_self2");
  m.backbone.w_neigh2 = load_param("backbone/w_neigh2");
  m.text_projection = load_param("text_projection");

  const std::string suffix = "/weight";
  for (const auto& [name, value] : entries) {
    if (name.rfind("adapter/", 0) != 0 || name.size() <= suffix.size() ||
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) {
      continue;
    }
    const std::string id = name.substr(8, name.size() - 8 - suffix.size());
    Adapter a;
    a.weight = nn::Parameter(name, value);
    if (static_cast<std::size_t>(value.rows()) < m.config.context_dim) {
      throw DataError(path + ": adapter '" + id + "' is narrower than the context block");
    }
    a.feature_dim = static_cast<std::size_t>(value.rows()) - m.config.context_dim;
    if (auto b = entries.find(adapter_prefix(id) + "bias"); b != entries.end()) {
      a.bias = nn::Parameter(b->first, b->second);
    }
    m.adapters.emplace(id, std::move(a));
  }

  nn::AdamOptions o;
  o.lr = take_scalar("adam/options/lr");
  o.weight_decay = take_scalar("adam/options/weight_decay");
  o.beta1 = take_scalar("adam/options/beta1");
  o.beta2 = take_scalar("adam/options/beta2");
  o.eps = take_scalar("adam/options/eps");
  o.decoupled = take_scalar("adam/options/decoupled") != 0.0;
  m.optimizer = nn::Adam(o);
  for (const auto& [name, value] : entries) {
    if (name.rfind("adam/m/", 0) != 0) continue;
    const std::string pname = name.substr(7);
    nn::AdamMoments mom;
    mom.m = value;
    mom.v = take("adam/v/" + pname);
    mom.steps = static_cast<std::uint64_t>(take_scalar("adam/steps/" + pname));
    m.optimizer.moments().emplace(pname, std::move(mom));
  }
  if (meta) {
    meta->clear();
    for (const auto& [name, value] : entries) {
      if (name.rfind("meta/", 0) == 0) (*meta)[name.substr(5)] = value(0, 0);
    }
  }
  return m;
}

}  // namespace gfm
