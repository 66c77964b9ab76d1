#include "gfm/graph.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "gfm/hash.hpp"
#include "gfm/matrix_io.hpp"
#include "gfm/random.hpp"

namespace gfm {

std::string_view to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::train: return "train";
    case SplitTag::valid: return "valid";
    case SplitTag::test: return "test";
  }
  return "?";
}

SplitTag parse_split_tag(std::string_view text) {
  if (text == "train") return SplitTag::train;
  if (text == "valid" || text == "val") return SplitTag::valid;
  if (text == "test") return SplitTag::test;
  throw DataError("unknown split tag '" + std::string(text) + "'");
}

Graph Graph::from_edges(std::size_t node_count,
                        std::span<const std::pair<NodeId, NodeId>> edges,
                        BuildCounts* counts) {
  BuildCounts local;
  std::vector<std::pair<NodeId, NodeId>> canon;
  canon.reserve(edges.size());
  for (auto [u, v] : edges) {
    if (u >= node_count || v >= node_count) {
      throw DataError("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                      ") references a node outside [0, " + std::to_string(node_count) + ")");
    }
    if (u == v) {
      ++local.self_loops_dropped;
      continue;
    }
    canon.emplace_back(std::min(u, v), std::max(u, v));
  }
  std::sort(canon.begin(), canon.end());
  const auto unique_end = std::unique(canon.begin(), canon.end());
  local.duplicates_dropped = static_cast<std::size_t>(canon.end() - unique_end);
  canon.erase(unique_end, canon.end());

  Graph g;
  g.offsets_.assign(node_count + 1, 0);
  for (auto [u, v] : canon) {
    ++g.offsets_[u + 1];
    ++g.offsets_[v + 1];
  }
  std::partial_sum(g.offsets_.begin(), g.offsets_.end(), g.offsets_.begin());
  g.targets_.resize(canon.size() * 2);
  std::vector<std::size_t> cursor(g.offsets_.begin(), g.offsets_.end() - 1);
  for (auto [u, v] : canon) {
    g.targets_[cursor[u]++] = v;
    g.targets_[cursor[v]++] = u;
  }
  for (std::size_t u = 0; u < node_count; ++u) {
    std::sort(g.targets_.begin() + g.offsets_[u], g.targets_.begin() + g.offsets_[u + 1]);
  }
  g.original_ids_.resize(node_count);
  std::iota(g.original_ids_.begin(), g.original_ids_.end(), std::int64_t{0});
  if (counts) *counts = local;
  return g;
}

bool Graph::has_edge(NodeId u, NodeId v) const {
  auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

std::vector<std::pair<NodeId, NodeId>> Graph::edges() const {
  std::vector<std::pair<NodeId, NodeId>> out;
  out.reserve(edge_count());
  for (NodeId u = 0; u < node_count(); ++u) {
    for (NodeId v : neighbors(u)) {
      if (u < v) out.emplace_back(u, v);
    }
  }
  return out;
}

Graph Graph::with_features(Matrix features) const {
  if (static_cast<std::size_t>(features.rows()) != node_count()) {
    throw DimensionError("feature matrix has " + std::to_string(features.rows()) +
                         " rows but the graph has " + std::to_string(node_count()) + " nodes");
  }
  Graph g = *this;
  g.features_ = std::move(features);
  return g;
}

Graph Graph::with_labels(LabelMatrix labels) const {
  if (static_cast<std::size_t>(labels.rows()) != node_count()) {
    throw DimensionError("label matrix has " + std::to_string(labels.rows()) +
                         " rows but the graph has " + std::to_string(node_count()) + " nodes");
  }
  Graph g = *this;
  g.labels_ = std::move(labels);
  return g;
}

Graph Graph::with_split(std::vector<SplitTag> split) const {
  if (split.size() != node_count()) {
    throw DimensionError("split has " + std::to_string(split.size()) +
                         " entries but the graph has " + std::to_string(node_count()) + " nodes");
  }
  Graph g = *this;
  g.split_ = std::move(split);
  return g;
}

Graph Graph::with_original_ids(std::vector<std::int64_t> ids) const {
  if (ids.size() != node_count()) throw DimensionError("id map size does not match node count");
  Graph g = *this;
  g.original_ids_ = std::move(ids);
  return g;
}

std::uint64_t Graph::topology_hash() const {
  Fnv1a h;
  const std::uint64_t n = node_count();
  h.update_value(n);
  for (auto [u, v] : edges()) {
    h.update_value(u);
    h.update_value(v);
  }
  return h.digest();
}

std::vector<NodeId> Graph::nodes_in(SplitTag tag) const {
  std::vector<NodeId> out;
  if (!split_) return out;
  for (NodeId i = 0; i < node_count(); ++i) {
    if ((*split_)[i] == tag) out.push_back(i);
  }
  return out;
}

Graph disjoint_union(std::span<const Graph> parts) {
  std::size_t total = 0;
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (const Graph& part : parts) {
    for (auto [u, v] : part.edges()) {
      edges.emplace_back(static_cast<NodeId>(u + total), static_cast<NodeId>(v + total));
    }
    total += part.node_count();
  }
  Graph g = Graph::from_edges(total, edges);

  auto all_have = [&](auto pred) { return !parts.empty() && std::all_of(parts.begin(), parts.end(), pred); };
  if (all_have([&](const Graph& p) { return p.features() && p.feature_dim() == parts[0].feature_dim(); })) {
    Matrix x(total, parts[0].feature_dim());
    Eigen::Index row = 0;
    for (const Graph& p : parts) {
      x.middleRows(row, p.node_count()) = *p.features();
      row += static_cast<Eigen::Index>(p.node_count());
    }
    g = g.with_features(std::move(x));
  }
  if (all_have([&](const Graph& p) { return p.labels() && p.labels()->cols() == parts[0].labels()->cols(); })) {
    LabelMatrix y(total, parts[0].labels()->cols());
    Eigen::Index row = 0;
    for (const Graph& p : parts) {
      y.middleRows(row, p.node_count()) = *p.labels();
      row += static_cast<Eigen::Index>(p.node_count());
    }
    g = g.with_labels(std::move(y));
  }
  if (all_have([](const Graph& p) { return p.split().has_value(); })) {
    std::vector<SplitTag> s;
    for (const Graph& p : parts) s.insert(s.end(), p.split()->begin(), p.split()->end());
    g = g.with_split(std::move(s));
  }
  return g;
}

LoadedGraph load_edge_list(const std::string& path, const std::optional<std::string>& feature_path,
                           const std::optional<std::string>& label_path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);

  std::vector<std::pair<std::int64_t, std::int64_t>> raw;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const char* p = line.data();
    const char* end = p + line.size();
    std::int64_t ids[2];
    int found = 0;
    while (p < end) {
      while (p < end && (*p == ' ' || *p == '\t' || *p == '\r' || *p == ',')) ++p;
      if (p == end) break;
      if (found == 2) throw ParseError(path, lineno, "expected exactly two node ids");
      auto [next, ec] = std::from_chars(p, end, ids[found]);
      if (ec != std::errc() || (next < end && !std::isspace(static_cast<unsigned char>(*next)) && *next != ',')) {
        throw ParseError(path, lineno, "malformed node id");
      }
      ++found;
      p = next;
    }
    if (found == 0) continue;
    if (found != 2) throw ParseError(path, lineno, "expected exactly two node ids");
    raw.emplace_back(ids[0], ids[1]);
  }

  std::vector<std::int64_t> ids;
  ids.reserve(raw.size() * 2);
  for (auto [u, v] : raw) {
    ids.push_back(u);
    ids.push_back(v);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.empty()) throw DataError(path + ": empty graph");

  auto dense = [&](std::int64_t id) {
    return static_cast<NodeId>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
  };
  std::vector<std::pair<NodeId, NodeId>> edges;
  edges.reserve(raw.size());
  for (auto [u, v] : raw) edges.emplace_back(dense(u), dense(v));

  LoadedGraph out;
  out.graph = Graph::from_edges(ids.size(), edges, &out.counts).with_original_ids(ids);
  if (feature_path) {
    Matrix x = read_matrix(*feature_path);
    if (static_cast<std::size_t>(x.rows()) != ids.size()) {
      throw DimensionError(*feature_path + ": " + std::to_string(x.rows()) +
                           " feature rows for " + std::to_string(ids.size()) + " nodes");
    }
    out.graph = out.graph.with_features(std::move(x));
  }
  if (label_path) {
    LabelMatrix y = read_labels(*label_path);
    if (static_cast<std::size_t>(y.rows()) != ids.size()) {
      throw DimensionError(*label_path + ": " + std::to_string(y.rows()) + " label rows for " +
                           std::to_string(ids.size()) + " nodes");
    }
    out.graph = out.graph.with_labels(std::move(y));
  }
  return out;
}

void save_edge_list(const Graph& graph, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  auto ids = graph.original_ids();
  for (auto [u, v] : graph.edges()) out << ids[u] << ' ' << ids[v] << '\n';
}

void save_id_map(const Graph& graph, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (std::int64_t id : graph.original_ids()) out << id << '\n';
}

std::vector<SplitTag> load_split(const std::string& path, std::size_t node_count) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<SplitTag> tags;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    if (line.empty()) continue;
    try {
      tags.push_back(parse_split_tag(line));
    } catch (const DataError& e) {
      throw ParseError(path, lineno, e.what());
    }
  }
  if (tags.size() != node_count) {
    throw DimensionError(path + ": " + std::to_string(tags.size()) + " split tags for " +
                         std::to_string(node_count) + " nodes");
  }
  return tags;
}

void save_split(std::span<const SplitTag> split, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (SplitTag t : split) out << to_string(t) << '\n';
}

Graph generate_sbm(std::span<const std::size_t> blocks, double p_in, double p_out,
                   std::uint64_t seed) {
  if (!(0.0 <= p_out && p_out <= p_in && p_in <= 1.0)) {
    throw ConfigError("SBM requires 0 <= p_out <= p_in <= 1 (got p_in=" + std::to_string(p_in) +
                      ", p_out=" + std::to_string(p_out) + ")");
  }
  if (blocks.empty()) throw ConfigError("SBM requires at least one block");
  std::vector<std::size_t> block_of;
  for (std::size_t b = 0; b < blocks.size(); ++b) block_of.insert(block_of.end(), blocks[b], b);
  const std::size_t n = block_of.size();

  Rng rng(seed);
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId j = i + 1; j < n; ++j) {
      if (rng.bernoulli(block_of[i] == block_of[j] ? p_in : p_out)) edges.emplace_back(i, j);
    }
  }
  LabelMatrix labels = LabelMatrix::Zero(n, blocks.size());
  for (std::size_t i = 0; i < n; ++i) labels(i, block_of[i]) = 1;
  return Graph::from_edges(n, edges).with_labels(std::move(labels));
}

Graph generate_gnp(std::size_t n, double p, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId j = i + 1; j < n; ++j) {
      if (rng.bernoulli(p)) edges.emplace_back(i, j);
    }
  }
  return Graph::from_edges(n, edges);
}

namespace {

std::vector<SplitTag> random_split(std::size_t n, const SplitSpec& spec) {
  const double fractions[3] = {spec.train, spec.valid, spec.test};
  for (double f : fractions) {
    if (f < 0.0) throw ConfigError("split fractions must be non-negative");
  }
  if (std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
  std::size_t counts[3];
  double remainders[3];
  std::size_t assigned = 0;
  for (int k = 0; k < 3; ++k) {
    const double exact = fractions[k] * static_cast<double>(n);
    counts[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainders[k] = exact - static_cast<double>(counts[k]);
    assigned += counts[k];
  }
  int order[3] = {0, 1, 2};
  std::stable_sort(order, order + 3, [&](int a, int b) { return remainders[a] > remainders[b]; });
  for (std::size_t r = 0; assigned < n; ++r, ++assigned) ++counts[order[r % 3]];

  std::vector<NodeId> perm(n);
  std::iota(perm.begin(), perm.end(), NodeId{0});
  Rng rng(spec.seed);
  rng.shuffle(std::span(perm));
  std::vector<SplitTag> tags(n);
  std::size_t pos = 0;
  const SplitTag kinds[3] = {SplitTag::train, SplitTag::valid, SplitTag::test};
  for (int k = 0; k < 3; ++k) {
    for (std::size_t c = 0; c < counts[k]; ++c) tags[perm[pos++]] = kinds[k];
  }
  return tags;
}

std::vector<SplitTag> disjoint_split(const Graph& graph, const SplitSpec& spec) {
  if (!graph.labels()) throw ConfigError("disjoint-label-classes split requires labels");
  const LabelMatrix& y = *graph.labels();
  const std::size_t n_classes = static_cast<std::size_t>(y.cols());
  std::vector<int> owner(n_classes, -1);
  auto claim = [&](const std::vector<std::size_t>& classes, int who) {
    for (std::size_t c : classes) {
      if (c >= n_classes) throw ConfigError("class index " + std::to_string(c) + " out of range");
      if (owner[c] != -1) throw ConfigError("class " + std::to_string(c) + " appears in two partitions");
      owner[c] = who;
    }
  };
  claim(spec.train_classes, 0);
  claim(spec.valid_classes, 1);
  claim(spec.test_classes, 2);
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (owner[c] == -1) throw ConfigError("class " + std::to_string(c) + " is not assigned to any partition");
  }
  std::vector<SplitTag> tags(graph.node_count(), SplitTag::train);
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    int best = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
      if (y(i, c)) best = std::max(best, owner[c]);
    }
    tags[i] = best == 2 ? SplitTag::test : best == 1 ? SplitTag::valid : SplitTag::train;
  }
  return tags;
}

}  // namespace

Graph make_split(const Graph& graph, const SplitSpec& spec) {
  switch (spec.mode) {
    case SplitSpec::Mode::random_fractions:
      return graph.with_split(random_split(graph.node_count(), spec));
    case SplitSpec::Mode::disjoint_label_classes:
      return graph.with_split(disjoint_split(graph, spec));
    case SplitSpec::Mode::provided:
      return graph.with_split(spec.provided);
  }
  return graph;
}

}  // namespace gfm
