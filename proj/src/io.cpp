#include "zimpute/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "zimpute/errors.hpp"

namespace zimpute {
namespace {

std::vector<std::string> split_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char ch = line[k];
    if (quoted) {
      if (ch == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        cell += '"';
        ++k;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cell += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(cell);
      cell.clear();
    } else {
      cell += ch;
    }
  }
  if (quoted) throw ValidationError("line " + std::to_string(line_no) + ": unterminated quote");
  out.push_back(cell);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& text, std::size_t line, const std::string& column) {
  const std::string t = trim(text);
  char* end = nullptr;
  const double x = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size()) {
    throw ValidationError("line " + std::to_string(line) + ": column '" + column +
                          "': not a number '" + t + "'");
  }
  if (!std::isfinite(x)) {
    throw ValidationError("line " + std::to_string(line) + ": non-finite value in column '" +
                          column + "'");
  }
  return x;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

std::optional<std::size_t> CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) return std::nullopt;
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable parse_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line[0] == '#') continue;
    auto cells = split_line(line, line_no);
    if (!have_header) {
      for (auto& c : cells) c = trim(c);
      t.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw ValidationError("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(t.header.size()) + " fields, found " +
                            std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
    t.line.push_back(line_no);
  }
  if (!have_header) throw ValidationError("empty CSV input");
  return t;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  return parse_csv(in);
}

std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

SampleData load_sample_csv(const CsvTable& table, const CsvIntake& intake) {
  auto require = [&](const char* name) {
    const auto c = table.column(name);
    if (!c) throw ValidationError(std::string("missing column '") + name + "'");
    return *c;
  };
  const std::size_t cy = require("y");
  const std::size_t cv = require("v");
  const std::size_t cpi = require("pi");
  const auto comega = table.column("omega");
  const auto cstratum = table.column("stratum");
  std::vector<std::size_t> cz;
  std::vector<std::size_t> cu;
  std::vector<std::string> z_names;
  std::vector<std::string> u_names;
  for (std::size_t k = 0; k < table.header.size(); ++k) {
    const auto& h = table.header[k];
    if (h.rfind("z_", 0) == 0) {
      cz.push_back(k);
      z_names.push_back(h);
    } else if (h.rfind("u_", 0) == 0) {
      cu.push_back(k);
      u_names.push_back(h);
    }
  }
  if (cz.empty() && !intake.z_intercept) throw ValidationError("missing columns 'z_*'");
  if (cu.empty() && !intake.u_intercept) throw ValidationError("missing columns 'u_*'");
  if (table.rows.empty()) throw ValidationError("no data rows");

  const auto n = static_cast<Eigen::Index>(table.rows.size());
  const Eigen::Index zo = intake.z_intercept ? 1 : 0;
  const Eigen::Index uo = intake.u_intercept ? 1 : 0;
  SampleColumns c;
  c.y.resize(n);
  c.z.resize(n, static_cast<Eigen::Index>(cz.size()) + zo);
  c.u.resize(n, static_cast<Eigen::Index>(cu.size()) + uo);
  c.v.resize(n);
  c.pi.resize(n);
  if (comega) c.omega.resize(n);
  c.responded.resize(table.rows.size());
  if (cstratum) c.stratum.resize(table.rows.size());
  c.population_size = intake.population_size;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    const std::size_t line = table.line[static_cast<std::size_t>(i)];
    const bool missing = trim(row[cy]).empty();
    c.responded[static_cast<std::size_t>(i)] = missing ? 0 : 1;
    c.y[i] = missing ? std::numeric_limits<double>::quiet_NaN() : parse_number(row[cy], line, "y");
    if (zo) c.z(i, 0) = 1.0;
    for (std::size_t k = 0; k < cz.size(); ++k) {
      c.z(i, zo + static_cast<Eigen::Index>(k)) = parse_number(row[cz[k]], line, z_names[k]);
    }
    if (uo) c.u(i, 0) = 1.0;
    for (std::size_t k = 0; k < cu.size(); ++k) {
      c.u(i, uo + static_cast<Eigen::Index>(k)) = parse_number(row[cu[k]], line, u_names[k]);
    }
    c.v[i] = parse_number(row[cv], line, "v");
    if (!(c.v[i] > 0.0)) {
      throw ValidationError("line " + std::to_string(line) + ": non-positive v");
    }
    c.pi[i] = parse_number(row[cpi], line, "pi");
    if (!(c.pi[i] > 0.0 && c.pi[i] <= 1.0)) {
      throw ValidationError("line " + std::to_string(line) + ": pi must lie in (0, 1]");
    }
    if (comega) {
      c.omega[i] = parse_number(row[*comega], line, "omega");
      if (!(c.omega[i] > 0.0)) {
        throw ValidationError("line " + std::to_string(line) + ": omega must be positive");
      }
    }
    if (cstratum) {
      const double s = parse_number(row[*cstratum], line, "stratum");
      if (s != std::floor(s)) {
        throw ValidationError("line " + std::to_string(line) + ": stratum must be an integer");
      }
      c.stratum[static_cast<std::size_t>(i)] = static_cast<int>(s);
    }
  }
  if (zo) z_names.insert(z_names.begin(), "(intercept)");
  if (uo) u_names.insert(u_names.begin(), "(intercept)");
  return {SampleFrame::build(std::move(c)), table, std::move(z_names), std::move(u_names)};
}

SampleData load_sample_csv_file(const std::string& path, const CsvIntake& intake) {
  return load_sample_csv(read_csv_file(path), intake);
}

void write_sample_csv(std::ostream& out, const SampleFrame& sample) {
  out << "y";
  for (Eigen::Index k = 0; k < sample.z().cols(); ++k) out << ",z_" << k + 1;
  for (Eigen::Index k = 0; k < sample.u().cols(); ++k) out << ",u_" << k + 1;
  out << ",v,pi,omega,stratum\n";
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (sample.responded(i)) out << format_number(sample.y(i));
    for (Eigen::Index k = 0; k < sample.z().cols(); ++k) out << ',' << format_number(sample.z()(ii, k));
    for (Eigen::Index k = 0; k < sample.u().cols(); ++k) out << ',' << format_number(sample.u()(ii, k));
    out << ',' << format_number(sample.v()[ii]) << ',' << format_number(sample.pi()[ii]) << ','
        << format_number(sample.omega()[ii]) << ',' << sample.stratum()[i] << '\n';
  }
}

void write_imputed_csv(std::ostream& out, const SampleData& data, const ImputationResult* result,
                       const std::string& comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  for (std::size_t k = 0; k < data.table.header.size(); ++k) {
    out << (k ? "," : "") << csv_escape(data.table.header[k]);
  }
  out << ",y_imputed,eta_star,donor_index,method\n";
  const SampleFrame& s = data.frame;
  std::vector<std::optional<std::size_t>> slot(s.size());
  if (result) {
    for (std::size_t k = 0; k < result->size(); ++k) slot[result->recipients[k]] = k;
  }
  const std::string method = result ? std::string(method_name(result->method)) : "";
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& row = data.table.rows[i];
    for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << csv_escape(row[k]);
    if (s.responded(i)) {
      out << ',' << format_number(s.y(i)) << ",,,";
    } else if (slot[i]) {
      const std::size_t k = *slot[i];
      out << ',' << format_number(result->y_star[static_cast<Eigen::Index>(k)]) << ','
          << int(result->eta_star[k]) << ',';
      if (result->donor[k]) out << *result->donor[k];
      out << ',' << method;
    } else {
      out << ",,,,";
    }
    out << '\n';
  }
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace zimpute
