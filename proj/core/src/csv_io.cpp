#include "glmmgm/csv_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

namespace glmmgm {

namespace {

constexpr std::string_view kInterceptName = "intercept";

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool is_missing(const std::string& s) {
  return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == "." ||
         s == "NULL";
}

double parse_number(const std::string& cell, Index row, const std::string& column) {
  if (is_missing(cell))
    throw ParseError("missing value in column '" + column + "'", row, column);
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value))
    throw ParseError("non-numeric value '" + cell + "' in column '" + column + "'", row, column);
  return value;
}

std::string format_full(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

struct PendingSubject {
  std::vector<double> y;
  std::vector<std::vector<double>> x;
  std::vector<std::vector<std::size_t>> levels;  // per row, level index per group column
};

}  // namespace

ParseError::ParseError(const std::string& message, std::optional<Index> row, std::string column)
    : std::runtime_error(row ? message + " (line " + std::to_string(*row) + ")" : message),
      row_(row),
      column_(std::move(column)) {}

std::vector<std::string> split_csv_record(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      fields.push_back(was_quoted ? field : trim(field));
      field.clear();
      was_quoted = false;
    } else if (c != '\r') {
      field += c;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field");
  fields.push_back(was_quoted ? field : trim(field));
  return fields;
}

Dataset parse_dataset(std::istream& in, const ColumnMapping& mapping) {
  std::string line;
  Index line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_csv_record(line);
      break;
    }
  }
  if (header.empty()) throw ParseError("empty file: no header row");

  // Strip a UTF-8 byte order mark from the first column name.
  if (header[0].size() >= 3 && header[0].compare(0, 3, "\xEF\xBB\xBF") == 0)
    header[0] = header[0].substr(3);

  auto column_index = [&](const std::string& name) -> std::size_t {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == name) return c;
    throw ParseError("missing column '" + name + "'", 1, name);
  };
  const std::size_t subject_col = column_index(mapping.subject);
  const std::size_t response_col = column_index(mapping.response);
  std::vector<std::size_t> cov_cols;
  for (const auto& name : mapping.covariates) cov_cols.push_back(column_index(name));
  std::vector<std::size_t> group_cols;
  for (const auto& name : mapping.group_by) group_cols.push_back(column_index(name));

  std::vector<std::string> order;
  std::map<std::string, PendingSubject> pending;
  std::vector<std::vector<std::string>> level_names(group_cols.size());
  std::vector<std::map<std::string, std::size_t>> level_lookup(group_cols.size());
  Index rows = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    try {
      cells = split_csv_record(line);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line_no);
    }
    if (cells.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(cells.size()),
                       line_no);

    const std::string& id = cells[subject_col];
    if (id.empty()) throw ParseError("empty subject id", line_no, mapping.subject);
    auto [it, inserted] = pending.try_emplace(id);
    if (inserted) order.push_back(id);
    PendingSubject& s = it->second;

    s.y.push_back(parse_number(cells[response_col], line_no, mapping.response));
    std::vector<double> x;
    if (mapping.intercept) x.push_back(1.0);
    for (std::size_t k = 0; k < cov_cols.size(); ++k)
      x.push_back(parse_number(cells[cov_cols[k]], line_no, mapping.covariates[k]));
    s.x.push_back(std::move(x));

    std::vector<std::size_t> lv(group_cols.size());
    for (std::size_t g = 0; g < group_cols.size(); ++g) {
      const std::string& level = cells[group_cols[g]];
      if (is_missing(level))
        throw ParseError("missing group level in column '" + mapping.group_by[g] + "'", line_no,
                         mapping.group_by[g]);
      auto [lit, fresh] = level_lookup[g].try_emplace(level, level_names[g].size());
      if (fresh) level_names[g].push_back(level);
      lv[g] = lit->second;
    }
    s.levels.push_back(std::move(lv));
    ++rows;
  }
  if (rows == 0) throw ParseError("empty file: header but no data rows", line_no);

  // Cartesian code of a level tuple, first column most significant.
  auto cell_code = [&](const std::vector<std::size_t>& lv) {
    std::size_t code = 0;
    for (std::size_t g = 0; g < lv.size(); ++g) code = code * level_names[g].size() + lv[g];
    return code;
  };
  std::map<std::size_t, std::vector<std::size_t>> observed;
  for (const auto& id : order)
    for (const auto& lv : pending[id].levels) observed.try_emplace(cell_code(lv), lv);

  std::vector<std::string> labels;
  std::map<std::size_t, Index> group_of_code;
  for (const auto& [code, lv] : observed) {
    std::string label;
    for (std::size_t g = 0; g < lv.size(); ++g) {
      if (g) label += ':';
      label += level_names[g][lv[g]];
    }
    group_of_code[code] = static_cast<Index>(labels.size());
    labels.push_back(group_cols.empty() ? std::string("all") : label);
  }

  const Index p = static_cast<Index>(cov_cols.size()) + (mapping.intercept ? 1 : 0);
  std::vector<SubjectBlock> subjects;
  subjects.reserve(order.size());
  for (const auto& id : order) {
    const PendingSubject& s = pending[id];
    const Index n = static_cast<Index>(s.y.size());
    SubjectBlock b;
    b.id = id;
    b.y.resize(n);
    b.x.resize(n, p);
    b.w = Eigen::VectorXd::Ones(n);
    for (Index r = 0; r < n; ++r) {
      const auto ru = static_cast<std::size_t>(r);
      b.y(r) = s.y[ru];
      for (Index c = 0; c < p; ++c) b.x(r, c) = s.x[ru][static_cast<std::size_t>(c)];
      b.group.push_back(group_of_code[cell_code(s.levels[ru])]);
    }
    subjects.push_back(std::move(b));
  }

  std::vector<std::string> names;
  if (mapping.intercept) names.emplace_back(kInterceptName);
  names.insert(names.end(), mapping.covariates.begin(), mapping.covariates.end());
  return Dataset(std::move(subjects), std::move(labels), std::move(names));
}

Dataset read_dataset(const std::filesystem::path& path, const ColumnMapping& mapping) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  return parse_dataset(in, mapping);
}

ColumnMapping mapping_for_written(const Dataset& dataset) {
  ColumnMapping m;
  const auto names = dataset.covariate_names();
  m.intercept = !names.empty() && names.front() == kInterceptName;
  for (std::size_t c = m.intercept ? 1 : 0; c < names.size(); ++c) m.covariates.push_back(names[c]);
  if (names.empty())
    for (Index c = 0; c < dataset.num_covariates(); ++c) m.covariates.push_back("x" + std::to_string(c));
  m.group_by = {"group"};
  return m;
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
  const ColumnMapping m = mapping_for_written(dataset);
  const Index first = m.intercept ? 1 : 0;
  out << "subject_id,y";
  for (const auto& c : m.covariates) out << ',' << quote_if_needed(c);
  out << ",group\n";
  for (const auto& s : dataset.subjects()) {
    for (Index r = 0; r < s.size(); ++r) {
      out << quote_if_needed(s.id) << ',' << format_full(s.y(r));
      for (Index c = first; c < s.x.cols(); ++c) out << ',' << format_full(s.x(r, c));
      out << ',' << quote_if_needed(dataset.groups().label(s.group[static_cast<std::size_t>(r)]))
          << '\n';
    }
  }
}

}  // namespace glmmgm
