#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "zimpute/frames.hpp"
#include "zimpute/impute.hpp"

namespace zimpute {

/// Parsed CSV: header plus string cells. Lines starting with '#' are skipped.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line;  // 1-based source line of each row

  std::optional<std::size_t> column(const std::string& name) const;
};

CsvTable parse_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

/// 17 significant digits.
std::string format_number(double x);

/// Sample data read from a CSV with columns y (blank: missing), z_*, u_*, v,
/// pi, and optionally omega and stratum.
struct SampleData {
  SampleFrame frame;
  CsvTable table;
  std::vector<std::string> z_names;
  std::vector<std::string> u_names;
};

struct CsvIntake {
  bool z_intercept = false;
  bool u_intercept = false;
  double population_size = 0.0;  // <= 0: sum of design weights
};

/// Throws ValidationError naming the line and column of the first problem.
SampleData load_sample_csv(const CsvTable& table, const CsvIntake& intake = {});
SampleData load_sample_csv_file(const std::string& path, const CsvIntake& intake = {});

/// Writes a sample with the column layout read by load_sample_csv. Missing y
/// is written as an empty field.
void write_sample_csv(std::ostream& out, const SampleFrame& sample);

/// Input rows followed by y_imputed, eta_star, donor_index and method.
void write_imputed_csv(std::ostream& out, const SampleData& data, const ImputationResult* result,
                       const std::string& comment);

/// 64-bit FNV-1a, printed as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

}  // namespace zimpute
