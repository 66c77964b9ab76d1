#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace gfm {

// FNV-1a, used for content hashes of files, graphs and parameters.
class Fnv1a {
 public:
  static constexpr std::uint64_t kOffset = 0xcbf29ce484222325ULL;
  static constexpr std::uint64_t kPrime = 0x100000001b3ULL;

  explicit Fnv1a(std::uint64_t basis = kOffset) : state_(basis) {}

  Fnv1a& update(const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      state_ = (state_ ^ p[i]) * kPrime;
    }
    return *this;
  }
  Fnv1a& update(std::string_view s) { return update(s.data(), s.size()); }
  template <typename T>
  Fnv1a& update_value(const T& v) {
    return update(&v, sizeof(T));
  }

  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_;
};

std::string to_hex(std::uint64_t v);

/// Content hash of a file; throws DataError when it cannot be read.
std::uint64_t hash_file(const std::string& path);

}  // namespace gfm
