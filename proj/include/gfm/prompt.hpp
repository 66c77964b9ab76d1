#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gfm/descriptors.hpp"
#include "gfm/types.hpp"

namespace gfm {

// Prompt field formatting:
//
//   deg core ego1V ego1E ego2V ego2E lp_comm lp_size   plain integers
//   scoda_comm scoda_size N E q25 q50 q75
//   cc ego1D ego2D lp_dens scoda_dens trans            %.3f
//   avgd spec_gap                                      %.2f
//   pr                                                 2 significant digits, plain decimal
//
// The full template is
//   Node profile: local(deg=.., cc=.., core=.., ego1V=.., ego1E=.., ego1D=..,
//   ego2V=.., ego2E=.., ego2D=.., pr=..); global(lp_comm=.., lp_size=..,
//   lp_dens=..; scoda_comm=.., scoda_size=.., scoda_dens=..); graph(N=.., E=..,
//   avgd=.., trans=.., q25=.., q50=.., q75=.., spec_gap=..).
// on a single line with single spaces after separators.
std::string render_prompt(const StructuralProfile& profile, const GraphStats& stats);

/// Two significant digits without an exponent: 0.00084, 0.50, 1.0.
std::string format_pagerank(double value);

/// Deterministic feature-hashing text encoder producing unit-norm 384-d vectors.
///
/// Features are the alphanumeric tokens of the text and every `key=value`
/// pair. Alphanumeric runs inside a pair are covered by it and are not
/// emitted separately. Each feature hashes to one bucket with a +-1 sign.
class HashedEncoder {
 public:
  explicit HashedEncoder(std::uint64_t seed = 42) : seed_(seed) {}

  Vector encode(std::string_view text) const;
  Matrix encode_all(const std::vector<std::string>& texts) const;

  /// The features `encode` hashes, in emission order.
  static std::vector<std::string> features(std::string_view text);

  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
};

struct PrecomputedContext {
  Matrix embeddings;
  std::size_t zero_rows = 0;
};

/// Loads an N x 384 matrix (binary container or dense text) and L2-normalises
/// every row. Zero rows are replaced by e_0 and reported on stderr.
PrecomputedContext load_precomputed(const std::string& path, std::size_t node_count);

/// Row-normalises in place, mapping zero rows to e_0. Returns the zero-row count.
std::size_t normalize_context_rows(Matrix& m);

std::vector<std::string> render_prompts(const ProfileTable& table);

}  // namespace gfm
