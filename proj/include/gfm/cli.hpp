#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gfm/graph.hpp"

namespace gfm::cli {

inline constexpr const char* kVersion = "0.1.0";

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsageError = 1;
inline constexpr int kDataError = 2;
inline constexpr int kNumericError = 3;

/// Runs one subcommand; diagnostics go to stderr. args[0] is the program name.
int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

/// A graph directory: edges.txt plus optional features.{txt,bin},
/// labels.{txt,bin}, split.txt and context.{bin,txt}. Without a context file
/// the context embeddings are computed from structural prompts with the
/// hashed encoder.
struct GraphDir {
  std::string id;
  Graph graph;
  Matrix context;
  std::vector<std::pair<std::string, std::uint64_t>> inputs;  // file name -> content hash
  bool context_computed = false;
};

GraphDir load_graph_dir(const std::string& dir, std::uint64_t seed, const std::string& id = {});

/// Subdirectories of `parent` that contain an edges.txt, sorted by name.
std::vector<std::string> list_graph_dirs(const std::string& parent);

/// Removes nodes without edges, keeping features, labels and split aligned.
Graph drop_isolated(const Graph& graph, std::size_t* removed = nullptr);

}  // namespace gfm::cli
