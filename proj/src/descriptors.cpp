#include "gfm/descriptors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "gfm/random.hpp"

namespace gfm {
namespace {

double pair_density(std::size_t vertices, std::size_t edges) {
  if (vertices < 2) return 0.0;
  return 2.0 * static_cast<double>(edges) /
         (static_cast<double>(vertices) * static_cast<double>(vertices - 1));
}

std::size_t count_common(std::span<const NodeId> a, std::span<const NodeId> b) {
  std::size_t i = 0, j = 0, c = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      ++c, ++i, ++j;
    }
  }
  return c;
}

std::size_t triangles_at(const Graph& g, NodeId u) {
  std::size_t twice = 0;
  for (NodeId v : g.neighbors(u)) twice += count_common(g.neighbors(u), g.neighbors(v));
  return twice / 2;
}

// Reusable BFS scratch space; marks are cleared only for touched nodes.
class EgoWorkspace {
 public:
  explicit EgoWorkspace(std::size_t n) : mark_(n, 0) {}

  EgoStats run(const Graph& g, NodeId centre, int radius, std::size_t max_ball) {
    ball_.clear();
    auto add = [&](NodeId v) {
      mark_[v] = 1;
      ball_.push_back(v);
    };
    auto full = [&] { return max_ball > 0 && ball_.size() >= max_ball; };
    add(centre);
    std::size_t frontier_begin = 0;
    for (int r = 0; r < radius && !full(); ++r) {
      const std::size_t frontier_end = ball_.size();
      for (std::size_t k = frontier_begin; k < frontier_end && !full(); ++k) {
        for (NodeId w : g.neighbors(ball_[k])) {
          if (!mark_[w]) {
            add(w);
            if (full()) break;
          }
        }
      }
      frontier_begin = frontier_end;
    }
    std::size_t edges = 0;
    for (NodeId u : ball_) {
      for (NodeId w : g.neighbors(u)) {
        if (u < w && mark_[w]) ++edges;
      }
    }
    for (NodeId u : ball_) mark_[u] = 0;
    return {ball_.size(), edges, pair_density(ball_.size(), edges)};
  }

 private:
  std::vector<char> mark_;
  std::vector<NodeId> ball_;
};

// Largest two eigenvalues of a symmetric operator via power iteration with
// deflation. The operator must be positive semi-definite.
template <typename Apply>
std::pair<double, double> top_two_eigenvalues(std::size_t n, Apply apply) {
  constexpr int kMaxIter = 20000;
  constexpr double kTol = 1e-12;
  auto power = [&](const Vector* deflate, Vector& v) {
    Rng rng(derive_seed(42, deflate ? 2 : 1));
    v.resize(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(-1.0, 1.0);
    if (deflate) v -= deflate->dot(v) * *deflate;
    v.normalize();
    double lambda = 0.0;
    Vector w(v.size());
    for (int it = 0; it < kMaxIter; ++it) {
      apply(v, w);
      if (deflate) w -= deflate->dot(w) * *deflate;
      const double next = v.dot(w);
      const double norm = w.norm();
      if (norm == 0.0) return 0.0;
      v = w / norm;
      if (it > 10 && std::abs(next - lambda) <= kTol * std::max(1.0, std::abs(next))) return next;
      lambda = next;
    }
    return lambda;
  };
  Vector v1, v2;
  const double l1 = power(nullptr, v1);
  const double l2 = n > 1 ? power(&v1, v2) : 0.0;
  return {l1, l2};
}

void write_double(std::ostream& out, double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.write(buf, end - buf);
}

constexpr const char* kProfileHeader =
    "degree\tclustering\tcore\tego1_v\tego1_e\tego1_d\tego2_v\tego2_e\tego2_d\tpagerank\t"
    "lp_comm\tlp_size\tlp_dens\tscoda_comm\tscoda_size\tscoda_dens";

}  // namespace

double clustering_coefficient(const Graph& graph, NodeId node) {
  const std::size_t d = graph.degree(node);
  if (d < 2) return 0.0;
  const double pairs = static_cast<double>(d) * static_cast<double>(d - 1) / 2.0;
  return static_cast<double>(triangles_at(graph, node)) / pairs;
}

std::vector<std::uint32_t> kcore_numbers(const Graph& graph) {
  const std::size_t n = graph.node_count();
  std::vector<std::uint32_t> deg(n);
  std::size_t max_deg = 0;
  for (NodeId v = 0; v < n; ++v) {
    deg[v] = static_cast<std::uint32_t>(graph.degree(v));
    max_deg = std::max<std::size_t>(max_deg, deg[v]);
  }
  // bin[d] = start of the block of nodes with current degree d in `order`.
  std::vector<std::size_t> bin(max_deg + 2, 0);
  for (NodeId v = 0; v < n; ++v) ++bin[deg[v] + 1];
  std::partial_sum(bin.begin(), bin.end(), bin.begin());
  std::vector<NodeId> order(n);
  std::vector<std::size_t> pos(n);
  {
    std::vector<std::size_t> next(bin.begin(), bin.end() - 1);
    for (NodeId v = 0; v < n; ++v) {
      pos[v] = next[deg[v]]++;
      order[pos[v]] = v;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const NodeId v = order[i];
    for (NodeId u : graph.neighbors(v)) {
      if (deg[u] > deg[v]) {
        const std::uint32_t du = deg[u];
        const std::size_t pu = pos[u];
        const std::size_t pw = bin[du];
        const NodeId w = order[pw];
        if (u != w) {
          std::swap(order[pu], order[pw]);
          pos[u] = pw;
          pos[w] = pu;
        }
        ++bin[du];
        --deg[u];
      }
    }
  }
  return deg;
}

EgoStats ego_stats(const Graph& graph, NodeId node, int radius, std::size_t max_ball) {
  if (radius != 1 && radius != 2) throw ConfigError("ego radius must be 1 or 2");
  EgoWorkspace ws(graph.node_count());
  return ws.run(graph, node, radius, max_ball);
}

std::vector<double> pagerank(const Graph& graph, double damping, int iterations) {
  const std::size_t n = graph.node_count();
  if (n == 0) return {};
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> rank(n, inv_n), next(n), share(n);
  for (int it = 0; it < iterations; ++it) {
    double dangling = 0.0;
    for (NodeId v = 0; v < n; ++v) {
      const std::size_t d = graph.degree(v);
      if (d == 0) {
        dangling += rank[v];
        share[v] = 0.0;
      } else {
        share[v] = rank[v] / static_cast<double>(d);
      }
    }
    const double base = (1.0 - damping) * inv_n + damping * dangling * inv_n;
    for (NodeId v = 0; v < n; ++v) {
      double acc = 0.0;
      for (NodeId u : graph.neighbors(v)) acc += share[u];
      next[v] = base + damping * acc;
    }
    rank.swap(next);
  }
  return rank;
}

std::vector<std::uint32_t> compact_ids(const std::vector<std::uint32_t>& assignment) {
  std::map<std::uint32_t, std::uint32_t> remap;
  std::vector<std::uint32_t> out(assignment.size());
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    auto [it, inserted] = remap.try_emplace(assignment[i], static_cast<std::uint32_t>(remap.size()));
    out[i] = it->second;
  }
  return out;
}

std::vector<std::uint32_t> label_propagation(const Graph& graph, std::uint64_t seed, int max_sweeps) {
  const std::size_t n = graph.node_count();
  std::vector<std::uint32_t> label(n);
  std::iota(label.begin(), label.end(), 0u);
  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), NodeId{0});
  std::vector<std::uint32_t> nb_labels;
  Rng rng(seed);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    rng.shuffle(std::span(order));
    bool changed = false;
    for (NodeId u : order) {
      auto nb = graph.neighbors(u);
      if (nb.empty()) continue;
      nb_labels.clear();
      for (NodeId v : nb) nb_labels.push_back(label[v]);
      std::sort(nb_labels.begin(), nb_labels.end());
      std::uint32_t best = nb_labels[0];
      std::size_t best_count = 0;
      for (std::size_t i = 0; i < nb_labels.size();) {
        std::size_t j = i;
        while (j < nb_labels.size() && nb_labels[j] == nb_labels[i]) ++j;
        if (j - i > best_count) {  // strict: ascending scan keeps the smallest label on ties
          best_count = j - i;
          best = nb_labels[i];
        }
        i = j;
      }
      if (best != label[u]) {
        label[u] = best;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return compact_ids(label);
}

std::size_t modal_degree(const Graph& graph) {
  std::map<std::size_t, std::size_t> histogram;
  for (NodeId v = 0; v < graph.node_count(); ++v) ++histogram[graph.degree(v)];
  std::size_t mode = 0, best = 0;
  for (auto [deg, count] : histogram) {
    if (count > best) {
      best = count;
      mode = deg;
    }
  }
  return mode;
}

std::vector<std::uint32_t> scoda(const Graph& graph, std::uint64_t seed,
                                 std::optional<std::size_t> degree_threshold) {
  const std::size_t n = graph.node_count();
  const std::size_t threshold = degree_threshold.value_or(modal_degree(graph));
  auto stream = graph.edges();
  Rng rng(seed);
  rng.shuffle(std::span(stream));
  std::vector<std::size_t> seen(n, 0);
  std::vector<std::uint32_t> community(n);
  std::iota(community.begin(), community.end(), 0u);
  for (auto [u, v] : stream) {
    ++seen[u];
    ++seen[v];
    if (std::min(seen[u], seen[v]) > threshold) continue;
    if (seen[u] <= seen[v]) {
      community[u] = community[v];
    } else {
      community[v] = community[u];
    }
  }
  return compact_ids(community);
}

std::vector<CommunityStat> community_stats(const Graph& graph,
                                           const std::vector<std::uint32_t>& assignment) {
  if (assignment.size() != graph.node_count()) {
    throw DimensionError("community assignment does not cover every node");
  }
  const std::uint32_t count =
      assignment.empty() ? 0 : *std::max_element(assignment.begin(), assignment.end()) + 1;
  std::vector<CommunityStat> stats(count);
  for (std::uint32_t c : assignment) ++stats[c].size;
  for (auto [u, v] : graph.edges()) {
    if (assignment[u] == assignment[v]) ++stats[assignment[u]].internal_edges;
  }
  for (auto& s : stats) s.density = pair_density(s.size, s.internal_edges);
  return stats;
}

double transitivity(const Graph& graph) {
  double closed = 0.0, triads = 0.0;
  for (NodeId v = 0; v < graph.node_count(); ++v) {
    const double d = static_cast<double>(graph.degree(v));
    triads += d * (d - 1.0) / 2.0;
    closed += static_cast<double>(triangles_at(graph, v));
  }
  // Each triangle is seen once from each of its three corners.
  return triads > 0.0 ? closed / triads : 0.0;
}

std::size_t degree_quantile(const Graph& graph, double q) {
  const std::size_t n = graph.node_count();
  if (n == 0) return 0;
  std::vector<std::size_t> deg(n);
  for (NodeId v = 0; v < n; ++v) deg[v] = graph.degree(v);
  std::sort(deg.begin(), deg.end());
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n) - 1e-12));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return deg[rank - 1];
}

double spectral_gap(const Graph& graph, SpectralGapMode mode, std::size_t dense_limit) {
  const std::size_t n = graph.node_count();
  if (n < 2) return 0.0;
  std::vector<double> inv_sqrt_deg(n, 0.0);
  for (NodeId v = 0; v < n; ++v) {
    if (graph.degree(v) > 0) inv_sqrt_deg[v] = 1.0 / std::sqrt(static_cast<double>(graph.degree(v)));
  }

  if (n <= dense_limit) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (NodeId u = 0; u < n; ++u) {
      for (NodeId v : graph.neighbors(u)) {
        m(u, v) = mode == SpectralGapMode::adjacency ? 1.0 : -inv_sqrt_deg[u] * inv_sqrt_deg[v];
      }
      if (mode == SpectralGapMode::normalized_laplacian && graph.degree(u) > 0) m(u, u) = 1.0;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
    const auto& ev = solver.eigenvalues();  // ascending
    return mode == SpectralGapMode::adjacency ? ev[n - 1] - ev[n - 2] : ev[1];
  }

  if (mode == SpectralGapMode::adjacency) {
    std::size_t max_deg = 0;
    for (NodeId v = 0; v < n; ++v) max_deg = std::max(max_deg, graph.degree(v));
    const double shift = static_cast<double>(max_deg);
    auto [l1, l2] = top_two_eigenvalues(n, [&](const Vector& x, Vector& y) {
      for (NodeId u = 0; u < n; ++u) {
        double acc = shift * x[u];
        for (NodeId v : graph.neighbors(u)) acc += x[v];
        y[u] = acc;
      }
    });
    return l1 - l2;
  }
  // 2I - L has the same eigenvectors; its top two give lambda_1(L) = 0 and lambda_2(L).
  auto [m1, m2] = top_two_eigenvalues(n, [&](const Vector& x, Vector& y) {
    for (NodeId u = 0; u < n; ++u) {
      const double diag = graph.degree(u) > 0 ? 1.0 : 0.0;
      double acc = (2.0 - diag) * x[u];
      for (NodeId v : graph.neighbors(u)) acc += inv_sqrt_deg[u] * inv_sqrt_deg[v] * x[v];
      y[u] = acc;
    }
  });
  (void)m1;
  return 2.0 - m2;
}

GraphStats graph_stats(const Graph& graph, SpectralGapMode mode) {
  GraphStats s;
  s.nodes = graph.node_count();
  s.edges = graph.edge_count();
  s.avg_degree = s.nodes ? 2.0 * static_cast<double>(s.edges) / static_cast<double>(s.nodes) : 0.0;
  s.transitivity = transitivity(graph);
  s.q25 = degree_quantile(graph, 0.25);
  s.q50 = degree_quantile(graph, 0.50);
  s.q75 = degree_quantile(graph, 0.75);
  s.spectral_gap = spectral_gap(graph, mode);
  return s;
}

ProfileTable compute_profiles(const Graph& graph, const DescriptorOptions& options) {
  const std::size_t n = graph.node_count();
  ProfileTable table;
  table.stats = graph_stats(graph, options.gap_mode);
  table.nodes.resize(n);

  const auto cores = kcore_numbers(graph);
  const auto pr = pagerank(graph, options.pagerank_damping, options.pagerank_iterations);
  const auto lp = label_propagation(graph, derive_seed(options.seed, 1), options.lp_sweeps);
  const auto sc = scoda(graph, derive_seed(options.seed, 2), options.scoda_threshold);
  const auto lp_stats = community_stats(graph, lp);
  const auto sc_stats = community_stats(graph, sc);

  EgoWorkspace ws(n);
  for (NodeId v = 0; v < n; ++v) {
    StructuralProfile& p = table.nodes[v];
    p.degree = graph.degree(v);
    p.clustering = clustering_coefficient(graph, v);
    p.core = cores[v];
    p.ego1 = ws.run(graph, v, 1, options.ego_max_ball);
    p.ego2 = ws.run(graph, v, 2, options.ego_max_ball);
    p.pagerank = pr[v];
    p.lp_comm = lp[v];
    p.lp_size = lp_stats[lp[v]].size;
    p.lp_dens = lp_stats[lp[v]].density;
    p.scoda_comm = sc[v];
    p.scoda_size = sc_stats[sc[v]].size;
    p.scoda_dens = sc_stats[sc[v]].density;
  }
  return table;
}

void write_profile_table(const std::vector<StructuralProfile>& nodes, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << kProfileHeader << '\n';
  for (const auto& p : nodes) {
    out << p.degree << '\t';
    write_double(out, p.clustering);
    out << '\t' << p.core << '\t' << p.ego1.vertices << '\t' << p.ego1.edges << '\t';
    write_double(out, p.ego1.density);
    out << '\t' << p.ego2.vertices << '\t' << p.ego2.edges << '\t';
    write_double(out, p.ego2.density);
    out << '\t';
    write_double(out, p.pagerank);
    out << '\t' << p.lp_comm << '\t' << p.lp_size << '\t';
    write_double(out, p.lp_dens);
    out << '\t' << p.scoda_comm << '\t' << p.scoda_size << '\t';
    write_double(out, p.scoda_dens);
    out << '\n';
  }
}

std::vector<StructuralProfile> read_profile_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kProfileHeader) {
    throw ParseError(path, 1, "unexpected descriptor table header");
  }
  std::vector<StructuralProfile> nodes;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    StructuralProfile p;
    row >> p.degree >> p.clustering >> p.core >> p.ego1.vertices >> p.ego1.edges >> p.ego1.density >>
        p.ego2.vertices >> p.ego2.edges >> p.ego2.density >> p.pagerank >> p.lp_comm >> p.lp_size >>
        p.lp_dens >> p.scoda_comm >> p.scoda_size >> p.scoda_dens;
    if (!row) throw ParseError(path, lineno, "malformed descriptor row");
    nodes.push_back(p);
  }
  return nodes;
}

void write_graph_stats(const GraphStats& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "N=" << s.nodes << "\nE=" << s.edges << "\navgd=";
  write_double(out, s.avg_degree);
  out << "\ntrans=";
  write_double(out, s.transitivity);
  out << "\nq25=" << s.q25 << "\nq50=" << s.q50 << "\nq75=" << s.q75 << "\nspec_gap=";
  write_double(out, s.spectral_gap);
  out << '\n';
}

GraphStats read_graph_stats(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  GraphStats s;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(path, lineno, "expected key=value");
    const std::string key = line.substr(0, eq);
    std::istringstream value(line.substr(eq + 1));
    if (key == "N") value >> s.nodes;
    else if (key == "E") value >> s.edges;
    else if (key == "avgd") value >> s.avg_degree;
    else if (key == "trans") value >> s.transitivity;
    else if (key == "q25") value >> s.q25;
    else if (key == "q50") value >> s.q50;
    else if (key == "q75") value >> s.q75;
    else if (key == "spec_gap") value >> s.spectral_gap;
    else throw ParseError(path, lineno, "unknown key '" + key + "'");
    if (!value) throw ParseError(path, lineno, "bad value for '" + key + "'");
  }
  return s;
}

}  // namespace gfm
