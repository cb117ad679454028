#pragma once

#include "rodeepc/common.hpp"

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace rodeepc {

/// Row-major CSV, one matrix row per line. Values are written with 17
/// significant digits so a write/read cycle is lossless.
void write_matrix_csv(std::ostream& out, const Matrix& m);
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);

/// Skips blank lines and lines starting with '#'. A first line that does not
/// parse as numbers is treated as a header and ignored.
Matrix read_matrix_csv(std::istream& in);
Matrix read_matrix_csv(const std::filesystem::path& path);

/// Minimal streaming writer for traces with a named header.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  CsvWriter(CsvWriter&&) noexcept;
  CsvWriter& operator=(CsvWriter&&) noexcept;
  ~CsvWriter();

  void write_row(const std::vector<double>& values);
  std::size_t columns() const noexcept { return columns_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::size_t columns_ = 0;
};

std::string format_double(double v);

}  // namespace rodeepc
