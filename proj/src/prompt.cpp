#include "gfm/prompt.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <algorithm>
#include <iostream>

#include "gfm/hash.hpp"
#include "gfm/matrix_io.hpp"
#include "gfm/random.hpp"

namespace gfm {
namespace {

bool is_key_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool ends_value(char c) {
  return c == ',' || c == ';' || c == ')' || c == '(' || std::isspace(static_cast<unsigned char>(c));
}

}  // namespace

std::string format_pagerank(double value) {
  if (!(value > 0.0)) return "0.0";
  char sci[32];
  std::snprintf(sci, sizeof sci, "%.1e", value);
  const char* e = std::strchr(sci, 'e');
  const int exponent = std::atoi(e + 1);
  const int decimals = std::max(1, 1 - exponent);
  char out[64];
  std::snprintf(out, sizeof out, "%.*f", decimals, value);
  return out;
}

std::string render_prompt(const StructuralProfile& p, const GraphStats& s) {
  const std::string pr = format_pagerank(p.pagerank);
  char buf[1024];
  std::snprintf(buf, sizeof buf,
                "Node profile: local(deg=%zu, cc=%.3f, core=%u, ego1V=%zu, ego1E=%zu, ego1D=%.3f, "
                "ego2V=%zu, ego2E=%zu, ego2D=%.3f, pr=%s); global(lp_comm=%u, lp_size=%zu, "
                "lp_dens=%.3f; scoda_comm=%u, scoda_size=%zu, scoda_dens=%.3f); graph(N=%zu, "
                "E=%zu, avgd=%.2f, trans=%.3f, q25=%zu, q50=%zu, q75=%zu, spec_gap=%.2f).",
                p.degree, p.clustering, p.core, p.ego1.vertices, p.ego1.edges, p.ego1.density,
                p.ego2.vertices, p.ego2.edges, p.ego2.density, pr.c_str(), p.lp_comm, p.lp_size,
                p.lp_dens, p.scoda_comm, p.scoda_size, p.scoda_dens, s.nodes, s.edges, s.avg_degree,
                s.transitivity, s.q25, s.q50, s.q75, s.spectral_gap);
  return buf;
}

std::vector<std::string> render_prompts(const ProfileTable& table) {
  std::vector<std::string> out;
  out.reserve(table.nodes.size());
  for (const auto& p : table.nodes) out.push_back(render_prompt(p, table.stats));
  return out;
}

std::vector<std::string> HashedEncoder::features(std::string_view text) {
  std::vector<std::string> out;
  std::vector<char> in_pair(text.size(), 0);
  std::vector<std::string> pairs;
  for (std::size_t eq = 0; eq < text.size(); ++eq) {
    if (text[eq] != '=') continue;
    std::size_t kb = eq;
    while (kb > 0 && is_key_char(text[kb - 1])) --kb;
    std::size_t ve = eq + 1;
    while (ve < text.size() && !ends_value(text[ve])) ++ve;
    if (kb == eq) continue;
    // A trailing '.' closes the whole profile, not the value.
    std::size_t vend = ve;
    if (vend == text.size() && vend > eq + 1 && text[vend - 1] == '.') --vend;
    for (std::size_t i = kb; i < vend; ++i) in_pair[i] = 1;
    pairs.emplace_back(text.substr(kb, vend - kb));
  }
  for (std::size_t i = 0; i < text.size();) {
    if (!std::isalnum(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && std::isalnum(static_cast<unsigned char>(text[j]))) ++j;
    if (!in_pair[i]) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  out.insert(out.end(), pairs.begin(), pairs.end());
  return out;
}

Vector HashedEncoder::encode(std::string_view text) const {
  Vector v = Vector::Zero(kContextDim);
  const std::uint64_t basis = splitmix64(seed_) ^ Fnv1a::kOffset;
  for (const std::string& f : features(text)) {
    const std::uint64_t h = splitmix64(Fnv1a(basis).update(f).digest());
    const auto bucket = static_cast<Eigen::Index>(h % kContextDim);
    v[bucket] += (h >> 63) ? -1.0 : 1.0;
  }
  const double norm = v.norm();
  if (norm == 0.0) {
    v[0] = 1.0;
    return v;
  }
  return v / norm;
}

Matrix HashedEncoder::encode_all(const std::vector<std::string>& texts) const {
  Matrix m(texts.size(), kContextDim);
  for (std::size_t i = 0; i < texts.size(); ++i) m.row(i) = encode(texts[i]).transpose();
  return m;
}

std::size_t normalize_context_rows(Matrix& m) {
  std::size_t zeros = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double norm = m.row(i).norm();
    if (norm == 0.0) {
      m.row(i).setZero();
      m(i, 0) = 1.0;
      ++zeros;
    } else {
      m.row(i) /= norm;
    }
  }
  return zeros;
}

PrecomputedContext load_precomputed(const std::string& path, std::size_t node_count) {
  PrecomputedContext out;
  out.embeddings = read_matrix(path);
  if (static_cast<std::size_t>(out.embeddings.cols()) != kContextDim) {
    throw DimensionError(path + ": context embeddings must have " + std::to_string(kContextDim) +
                         " columns, found " + std::to_string(out.embeddings.cols()));
  }
  if (static_cast<std::size_t>(out.embeddings.rows()) != node_count) {
    throw DimensionError(path + ": " + std::to_string(out.embeddings.rows()) +
                         " embedding rows for " + std::to_string(node_count) + " nodes");
  }
  out.zero_rows = normalize_context_rows(out.embeddings);
  if (out.zero_rows > 0) {
    std::cerr << "warning: " << path << ": " << out.zero_rows
              << " zero embedding row(s) replaced by the first basis vector\n";
  }
  return out;
}

}  // namespace gfm
