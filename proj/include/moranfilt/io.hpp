#pragma once

#include "moranfilt/types.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace moranfilt::io {

/// Shortest-form-independent rendering with 17 significant digits, so that
/// parsing the text recovers the exact double.
std::string format_double(double value);

/// Comma-separated table with a header row. Cells are kept as text.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of `name` in the header; throws InvalidArgument if absent.
  std::size_t column(const std::string& name) const;
  /// Parses every cell of column `name` as a finite decimal.
  VectorXd numeric_column(const std::string& name) const;
};

/// Reads a UTF-8 CSV (comma separator, '.' decimal point, first row header).
/// Throws InvalidArgument on ragged rows.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

/// Writes `header` then one row per matrix row.
void write_matrix_csv(std::ostream& out, const std::vector<std::string>& header,
                      const MatrixXd& values);

}  // namespace moranfilt::io
