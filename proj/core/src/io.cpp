#include "ubpod/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace ubpod {

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t fnv1a(std::string_view text, std::uint64_t seed) {
  return fnv1a(text.data(), text.size(), seed);
}

std::uint64_t hash_matrix(const Matrix& m, std::uint64_t seed) {
  const std::int64_t shape[2] = {m.rows(), m.cols()};
  std::uint64_t h = fnv1a(shape, sizeof(shape), seed);
  return fnv1a(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()), h);
}

std::string hex_digest(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a(ss.str());
}

std::string format_matrix(const Matrix& m) {
  std::string out = std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
  char buf[40];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.16e", m(i, j));
      if (j > 0) out += ' ';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

Matrix parse_matrix(const std::string& text) {
  const char* p = text.c_str();
  char* end = nullptr;
  const long rows = std::strtol(p, &end, 10);
  if (end == p) throw ValidationError("matrix text: missing row count");
  p = end;
  const long cols = std::strtol(p, &end, 10);
  if (end == p) throw ValidationError("matrix text: missing column count");
  if (rows < 0 || cols < 0) throw ValidationError("matrix text: negative size");
  p = end;
  Matrix m(rows, cols);
  for (long i = 0; i < rows; ++i) {
    for (long j = 0; j < cols; ++j) {
      const double v = std::strtod(p, &end);
      if (end == p) {
        throw ValidationError("matrix text: expected " +
                              std::to_string(rows * cols) + " entries");
      }
      m(i, j) = v;
      p = end;
    }
  }
  while (*p == ' ' || *p == '\n' || *p == '\t' || *p == '\r') ++p;
  if (*p != '\0') throw ValidationError("matrix text: trailing data");
  return m;
}

void write_matrix(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << format_matrix(m);
  if (!out) throw ValidationError("write failed for " + path.string());
}

Matrix read_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_matrix(ss.str());
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

CsvTable::CsvTable(std::vector<std::string> header)
    : header_(std::move(header)) {}

void CsvTable::add_row(const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(format_number(v));
  add_row(cells);
}

void CsvTable::add_row(const std::vector<std::string>& cells) {
  if (cells.size() != header_.size()) {
    throw ValidationError("table row has " + std::to_string(cells.size()) +
                          " cells, header has " +
                          std::to_string(header_.size()));
  }
  rows_.push_back(cells);
}

std::string CsvTable::str(const std::string& run_hash) const {
  std::string out = "# run " + run_hash + "\n";
  auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

void CsvTable::write(const std::filesystem::path& path,
                     const std::string& run_hash) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << str(run_hash);
}

}  // namespace ubpod
