#include "rodeepc/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace rodeepc {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void write_matrix_csv(std::ostream& out, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot open " + path.string() + " for writing");
  write_matrix_csv(out, m);
}

namespace {

bool parse_row(const std::string& line, std::vector<double>& row) {
  row.clear();
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    auto b = cell.find_first_not_of(" \t\r");
    auto e = cell.find_last_not_of(" \t\r");
    if (b == std::string::npos) return false;
    cell = cell.substr(b, e - b + 1);
    if (cell == "inf" || cell == "+inf") {
      row.push_back(kInf);
      continue;
    }
    if (cell == "-inf") {
      row.push_back(-kInf);
      continue;
    }
    double v = 0.0;
    auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) return false;
    row.push_back(v);
  }
  return !row.empty();
}

}  // namespace

Matrix read_matrix_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::vector<double> row;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    if (!parse_row(line, row)) {
      if (first) {
        first = false;
        continue;
      }
      throw ShapeError("unparseable CSV line: " + line);
    }
    first = false;
    if (!rows.empty() && row.size() != rows.front().size())
      throw ShapeError("ragged CSV: expected " + std::to_string(rows.front().size()) +
                       " columns, got " + std::to_string(row.size()));
    rows.push_back(row);
  }
  if (rows.empty()) return Matrix(0, 0);
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  return m;
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open " + path.string());
  return read_matrix_csv(in);
}

struct CsvWriter::Impl {
  std::ofstream out;
};

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : impl_(std::make_unique<Impl>()), columns_(header.size()) {
  impl_->out.open(path);
  if (!impl_->out) throw Error("io", "cannot open " + path.string() + " for writing");
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) impl_->out << ',';
    impl_->out << header[i];
  }
  impl_->out << '\n';
}

CsvWriter::CsvWriter(CsvWriter&&) noexcept = default;
CsvWriter& CsvWriter::operator=(CsvWriter&&) noexcept = default;
CsvWriter::~CsvWriter() = default;

void CsvWriter::write_row(const std::vector<double>& values) {
  if (values.size() != columns_)
    throw ShapeError("CSV row has " + std::to_string(values.size()) + " values, header has " +
                     std::to_string(columns_));
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) impl_->out << ',';
    impl_->out << format_double(values[i]);
  }
  impl_->out << '\n';
}

}  // namespace rodeepc
