#include "gfm/matrix_io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace gfm {
namespace {

static_assert(std::endian::native == std::endian::little,
              "binary containers assume a little-endian host");

bool has_magic(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  char head[8] = {};
  in.read(head, 8);
  return in.gcount() == 8 && std::memcmp(head, kMatrixMagic, 8) == 0;
}

Matrix read_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  char head[8];
  std::uint64_t rows = 0, cols = 0;
  in.read(head, 8);
  in.read(reinterpret_cast<char*>(&rows), 8);
  in.read(reinterpret_cast<char*>(&cols), 8);
  if (!in) throw DataError(path + ": truncated matrix header");
  std::vector<float> buf(rows * cols);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
  if (static_cast<std::size_t>(in.gcount()) != buf.size() * 4) {
    throw DataError(path + ": truncated matrix payload");
  }
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < buf.size(); ++i) m.data()[i] = buf[i];
  return m;
}

Matrix read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::vector<double> row;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p < end) {
      while (p < end && (*p == ' ' || *p == '\t' || *p == '\r' || *p == ',')) ++p;
      if (p == end) break;
      double v;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) throw ParseError(path, lineno, "expected a number");
      row.push_back(v);
      p = next;
    }
    if (row.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError(path, lineno,
                       "row has " + std::to_string(row.size()) + " columns, expected " +
                           std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  Matrix m(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

}  // namespace

Matrix read_matrix(const std::string& path) {
  {
    std::ifstream probe(path);
    if (!probe) throw DataError("cannot open " + path);
  }
  return has_magic(path) ? read_binary(path) : read_text(path);
}

void write_matrix_binary(const Matrix& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  const std::uint64_t rows = m.rows(), cols = m.cols();
  out.write(kMatrixMagic, 8);
  out.write(reinterpret_cast<const char*>(&rows), 8);
  out.write(reinterpret_cast<const char*>(&cols), 8);
  std::vector<float> buf(m.size());
  for (Eigen::Index i = 0; i < m.size(); ++i) buf[i] = static_cast<float>(m.data()[i]);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
}

void write_matrix_text(const Matrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  char buf[32];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, m(i, j));
      if (j) out << ' ';
      out.write(buf, end - buf);
    }
    out << '\n';
  }
}

void write_matrix(const Matrix& m, const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".bin") == 0) {
    write_matrix_binary(m, path);
  } else {
    write_matrix_text(m, path);
  }
}

LabelMatrix read_labels(const std::string& path) {
  const Matrix m = read_matrix(path);
  LabelMatrix labels(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double v = m.data()[i];
    if (v != 0.0 && v != 1.0) {
      throw DataError(path + ": label entries must be 0 or 1");
    }
    labels.data()[i] = static_cast<std::uint8_t>(v);
  }
  return labels;
}

Matrix to_matrix(const LabelMatrix& labels) { return labels.cast<double>(); }

}  // namespace gfm
