#pragma once

#include <string>

#include "gfm/types.hpp"

namespace gfm {

// Binary matrix container:
//   bytes 0..7   magic "GFMMAT01"
//   bytes 8..15  rows  (uint64, little-endian)
//   bytes 16..23 cols  (uint64, little-endian)
//   then rows*cols float32 little-endian, row-major.
inline constexpr char kMatrixMagic[8] = {'G', 'F', 'M', 'M', 'A', 'T', '0', '1'};

/// Reads either the binary container (detected by magic) or a dense text
/// matrix with one whitespace-separated row per line ('#' comments allowed).
Matrix read_matrix(const std::string& path);

void write_matrix_binary(const Matrix& m, const std::string& path);

/// Text form; values printed with 17 significant digits.
void write_matrix_text(const Matrix& m, const std::string& path);

/// Chooses the format by extension: ".bin" binary, anything else text.
void write_matrix(const Matrix& m, const std::string& path);

LabelMatrix read_labels(const std::string& path);
Matrix to_matrix(const LabelMatrix& labels);

}  // namespace gfm
