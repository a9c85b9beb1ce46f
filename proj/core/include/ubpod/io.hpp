#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ubpod/linops.hpp"

namespace ubpod {

/// 64-bit FNV-1a, chainable through `seed`.
std::uint64_t fnv1a(const void* data, std::size_t size,
                    std::uint64_t seed = 1469598103934665603ULL);
std::uint64_t fnv1a(std::string_view text,
                    std::uint64_t seed = 1469598103934665603ULL);
std::uint64_t hash_matrix(const Matrix& m,
                          std::uint64_t seed = 1469598103934665603ULL);
std::string hex_digest(std::uint64_t h);
std::uint64_t hash_file(const std::filesystem::path& path);

/// "rows cols" header then row-major entries with 17 significant digits.
std::string format_matrix(const Matrix& m);
Matrix parse_matrix(const std::string& text);
void write_matrix(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix(const std::filesystem::path& path);

/// Fixed-precision number formatting used by all tables.
std::string format_number(double v);

/// Comma-separated table: '#'-prefixed comment line with the run hash, then
/// a header row, then data rows.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  void add_row(const std::vector<double>& values);
  void add_row(const std::vector<std::string>& cells);
  std::size_t rows() const { return rows_.size(); }
  const std::vector<std::string>& header() const { return header_; }

  std::string str(const std::string& run_hash) const;
  void write(const std::filesystem::path& path,
             const std::string& run_hash) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace ubpod
