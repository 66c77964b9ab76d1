#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "gfm/graph.hpp"
#include "gfm/random.hpp"

namespace fixture {

using gfm::Graph;
using gfm::NodeId;
using Edges = std::vector<std::pair<NodeId, NodeId>>;

inline Graph make(std::size_t n, const Edges& edges) { return Graph::from_edges(n, edges); }

inline Graph clique(std::size_t n) {
  Edges e;
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = u + 1; v < n; ++v) e.emplace_back(u, v);
  }
  return make(n, e);
}

/// Centre 0 joined to leaves 1..leaves.
inline Graph star(std::size_t leaves) {
  Edges e;
  for (NodeId v = 1; v <= leaves; ++v) e.emplace_back(0, v);
  return make(leaves + 1, e);
}

inline Graph path(std::size_t n) {
  Edges e;
  for (NodeId u = 0; u + 1 < n; ++u) e.emplace_back(u, u + 1);
  return make(n, e);
}

inline Graph cycle(std::size_t n) {
  Edges e;
  for (NodeId u = 0; u < n; ++u) e.emplace_back(u, static_cast<NodeId>((u + 1) % n));
  return make(n, e);
}

/// Two triangles {0,1,2} and {3,4,5} plus an isolated node 6.
inline Graph two_triangles_and_isolated() { return make(7, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}}); }

/// Random graph with heterogeneous density so that all descriptor regimes occur.
inline Graph random_graph(std::uint64_t seed, std::size_t max_n = 200) {
  gfm::Rng rng(seed);
  const std::size_t n = 2 + rng.below(max_n - 1);
  const double p = rng.uniform(0.0, std::min(1.0, 8.0 / static_cast<double>(n)));
  Edges e;
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = u + 1; v < n; ++v) {
      if (rng.bernoulli(p)) e.emplace_back(u, v);
    }
  }
  return make(n, e);
}

inline std::vector<Graph> fixture_graphs() {
  return {clique(1), clique(2), clique(3), clique(4), clique(6), star(4), star(9), path(2), path(5),
          cycle(3), cycle(6), cycle(11), two_triangles_and_isolated(), make(5, {{0, 1}, {2, 3}, {3, 4}})};
}

/// Fresh empty directory under the system temp directory.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("gfm_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace fixture
