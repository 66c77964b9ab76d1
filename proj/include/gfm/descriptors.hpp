#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gfm/graph.hpp"

namespace gfm {

struct EgoStats {
  std::size_t vertices = 0;
  std::size_t edges = 0;
  double density = 0.0;

  bool operator==(const EgoStats&) const = default;
};

struct CommunityStat {
  std::size_t size = 0;
  std::size_t internal_edges = 0;
  double density = 0.0;
};

/// Per-node topology descriptors in the column order of the exported table.
struct StructuralProfile {
  std::size_t degree = 0;
  double clustering = 0.0;
  std::uint32_t core = 0;
  EgoStats ego1;
  EgoStats ego2;
  double pagerank = 0.0;
  std::uint32_t lp_comm = 0;
  std::size_t lp_size = 0;
  double lp_dens = 0.0;
  std::uint32_t scoda_comm = 0;
  std::size_t scoda_size = 0;
  double scoda_dens = 0.0;
};

struct GraphStats {
  std::size_t nodes = 0;
  std::size_t edges = 0;
  double avg_degree = 0.0;
  double transitivity = 0.0;
  std::size_t q25 = 0, q50 = 0, q75 = 0;
  double spectral_gap = 0.0;
};

enum class SpectralGapMode {
  adjacency,             // lambda_1 - lambda_2 of A
  normalized_laplacian,  // second-smallest eigenvalue of I - D^-1/2 A D^-1/2
};

// ---------------------------------------------------------------------------
// Local descriptors

/// triangles(i) / C(d_i, 2); zero when d_i < 2.
double clustering_coefficient(const Graph& graph, NodeId node);

/// Batagelj-Zaversnik bucket peeling, O(N + E).
std::vector<std::uint32_t> kcore_numbers(const Graph& graph);

/// Statistics of the BFS ball of the given radius (1 or 2) around `node`,
/// centre included. `max_ball` > 0 truncates the ball for hub nodes, in
/// which case the counts describe the truncated ball.
EgoStats ego_stats(const Graph& graph, NodeId node, int radius, std::size_t max_ball = 0);

/// Power iteration from the uniform vector. Mass of dangling nodes is spread
/// uniformly, so every iterate is a probability vector.
std::vector<double> pagerank(const Graph& graph, double damping = 0.85, int iterations = 40);

// ---------------------------------------------------------------------------
// Community detection. Returned ids are dense, numbered by first appearance
// in node order.

/// Asynchronous label propagation: each sweep visits nodes in a freshly
/// shuffled order and moves every node with neighbours to its most frequent
/// neighbour label (smallest label on ties). Stops after `max_sweeps` or at
/// the first sweep without changes.
std::vector<std::uint32_t> label_propagation(const Graph& graph, std::uint64_t seed,
                                             int max_sweeps = 20);

/// Streaming community detection over the edges in seeded random order.
/// Threshold defaults to the modal degree (smallest mode on ties).
std::vector<std::uint32_t> scoda(const Graph& graph, std::uint64_t seed,
                                 std::optional<std::size_t> degree_threshold = std::nullopt);

std::size_t modal_degree(const Graph& graph);

/// Size and internal density per community id; `assignment` must cover all nodes.
std::vector<CommunityStat> community_stats(const Graph& graph,
                                           const std::vector<std::uint32_t>& assignment);

/// Renumbers ids densely by first appearance in node order.
std::vector<std::uint32_t> compact_ids(const std::vector<std::uint32_t>& assignment);

// ---------------------------------------------------------------------------
// Graph-level statistics

double transitivity(const Graph& graph);

/// Nearest-rank quantile of the degree sequence: sorted[ceil(q N) - 1].
std::size_t degree_quantile(const Graph& graph, double q);

/// Dense symmetric eigensolve for N <= dense_limit, shifted power iteration
/// with deflation above it.
double spectral_gap(const Graph& graph, SpectralGapMode mode = SpectralGapMode::adjacency,
                    std::size_t dense_limit = 2000);

GraphStats graph_stats(const Graph& graph, SpectralGapMode mode = SpectralGapMode::adjacency);

// ---------------------------------------------------------------------------
// Whole-graph profile computation and the cached table format

struct DescriptorOptions {
  std::uint64_t seed = 42;
  double pagerank_damping = 0.85;
  int pagerank_iterations = 40;
  int lp_sweeps = 20;
  std::optional<std::size_t> scoda_threshold;
  std::size_t ego_max_ball = 0;
  SpectralGapMode gap_mode = SpectralGapMode::adjacency;
};

struct ProfileTable {
  std::vector<StructuralProfile> nodes;
  GraphStats stats;
};

ProfileTable compute_profiles(const Graph& graph, const DescriptorOptions& options = {});

/// Tab-separated, header line first, one row per node in StructuralProfile
/// field order. Reals use shortest round-trip formatting.
void write_profile_table(const std::vector<StructuralProfile>& nodes, const std::string& path);
std::vector<StructuralProfile> read_profile_table(const std::string& path);

/// "key=value" lines.
void write_graph_stats(const GraphStats& stats, const std::string& path);
GraphStats read_graph_stats(const std::string& path);

}  // namespace gfm
