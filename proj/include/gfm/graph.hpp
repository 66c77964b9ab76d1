#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gfm/types.hpp"

namespace gfm {

enum class SplitTag : std::uint8_t { train, valid, test };

std::string_view to_string(SplitTag tag);
SplitTag parse_split_tag(std::string_view text);

struct BuildCounts {
  std::size_t duplicates_dropped = 0;
  std::size_t self_loops_dropped = 0;
};

/// Undirected simple graph in CSR form. Both edge directions are stored and
/// every adjacency row is sorted, so neighbour lookups can binary search.
/// Instances are immutable; the with_* helpers return modified copies.
class Graph {
 public:
  Graph() = default;

  /// Builds from an arbitrary edge list over nodes [0, node_count).
  /// Self-loops and duplicates (in either orientation) are dropped and counted.
  static Graph from_edges(std::size_t node_count,
                          std::span<const std::pair<NodeId, NodeId>> edges,
                          BuildCounts* counts = nullptr);

  std::size_t node_count() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t edge_count() const noexcept { return targets_.size() / 2; }

  std::span<const NodeId> neighbors(NodeId u) const {
    return {targets_.data() + offsets_[u], targets_.data() + offsets_[u + 1]};
  }
  std::size_t degree(NodeId u) const { return offsets_[u + 1] - offsets_[u]; }
  bool has_edge(NodeId u, NodeId v) const;

  /// Each undirected edge once as (u, v) with u < v, lexicographically sorted.
  std::vector<std::pair<NodeId, NodeId>> edges() const;

  std::span<const std::size_t> offsets() const { return offsets_; }
  std::span<const NodeId> targets() const { return targets_; }

  const std::optional<Matrix>& features() const { return features_; }
  std::size_t feature_dim() const { return features_ ? static_cast<std::size_t>(features_->cols()) : 0; }
  const std::optional<LabelMatrix>& labels() const { return labels_; }
  const std::optional<std::vector<SplitTag>>& split() const { return split_; }

  /// Original identifier of each dense node id (identity when not remapped).
  std::span<const std::int64_t> original_ids() const { return original_ids_; }

  Graph with_features(Matrix features) const;
  Graph with_labels(LabelMatrix labels) const;
  Graph with_split(std::vector<SplitTag> split) const;
  Graph with_original_ids(std::vector<std::int64_t> ids) const;

  /// Stable hash of topology only (node count and canonical edges).
  std::uint64_t topology_hash() const;

  std::vector<NodeId> nodes_in(SplitTag tag) const;

 private:
  std::vector<std::size_t> offsets_;
  std::vector<NodeId> targets_;
  std::optional<Matrix> features_;
  std::optional<LabelMatrix> labels_;
  std::optional<std::vector<SplitTag>> split_;
  std::vector<std::int64_t> original_ids_;
};

/// Disconnected union of several graphs; node ids of later graphs are offset.
/// Features, labels and splits are carried over when every part has them
/// with matching widths.
Graph disjoint_union(std::span<const Graph> parts);

// ---------------------------------------------------------------------------
// Loading and saving

struct LoadedGraph {
  Graph graph;
  BuildCounts counts;
};

/// Reads a whitespace-separated "u v" edge list ('#' starts a comment).
/// Arbitrary integer ids are remapped to 0..N-1 in ascending id order.
/// Optional feature and label matrices use either the dense text or the
/// binary matrix format, one row per dense node.
LoadedGraph load_edge_list(const std::string& path,
                           const std::optional<std::string>& feature_path = std::nullopt,
                           const std::optional<std::string>& label_path = std::nullopt);

/// Writes canonical edges (u < v, sorted) using the original ids.
void save_edge_list(const Graph& graph, const std::string& path);

/// One "original_id" per line in dense node order.
void save_id_map(const Graph& graph, const std::string& path);

std::vector<SplitTag> load_split(const std::string& path, std::size_t node_count);
void save_split(std::span<const SplitTag> split, const std::string& path);

// ---------------------------------------------------------------------------
// Generators and splits

/// Stochastic block model. Node i's block becomes its single (one-hot) label.
Graph generate_sbm(std::span<const std::size_t> blocks, double p_in, double p_out,
                   std::uint64_t seed);

/// Erdos-Renyi G(n, p).
Graph generate_gnp(std::size_t n, double p, std::uint64_t seed);

struct SplitSpec {
  enum class Mode { random_fractions, disjoint_label_classes, provided };
  Mode mode = Mode::random_fractions;

  double train = 0.8, valid = 0.1, test = 0.1;

  // disjoint_label_classes: label column indices per partition.
  std::vector<std::size_t> train_classes, valid_classes, test_classes;

  std::vector<SplitTag> provided;
  std::uint64_t seed = 42;
};

/// Tags every node. Random mode takes floor(fraction * N) per tag and hands
/// the remainder out by largest fractional part (ties in train, valid, test
/// order). Disjoint mode assigns a node to test if it carries any test class,
/// else to valid if it carries any valid class, else to train.
Graph make_split(const Graph& graph, const SplitSpec& spec);

}  // namespace gfm
