#pragma once

#include "glmmgm/model.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace glmmgm {

/// Which CSV columns feed the model. An intercept column is prepended to the
/// covariates when `intercept` is set.
struct ColumnMapping {
  std::string subject = "subject_id";
  std::string response = "y";
  std::vector<std::string> covariates;
  std::vector<std::string> group_by;
  bool intercept = true;
};

/// Ingestion failure. `row` is the 1-based line number in the file (the
/// header is line 1) and `column` the offending column name, when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::optional<Index> row = std::nullopt,
             std::string column = {});

  const std::optional<Index>& row() const { return row_; }
  const std::string& column() const { return column_; }

 private:
  std::optional<Index> row_;
  std::string column_;
};

/// Splits one RFC-4180 record. Quoted fields may contain commas and doubled
/// quotes; embedded newlines are not supported.
std::vector<std::string> split_csv_record(const std::string& line);

/// Parses a CSV stream with a header row. Rows of one subject need not be
/// contiguous; subjects keep their order of first appearance and rows keep
/// file order within a subject. Groups are the observed combinations of the
/// group-by levels, in the cartesian order of each column's first-seen
/// levels; labels join the levels with ':'. Without group-by columns every
/// row falls in one group "all".
Dataset parse_dataset(std::istream& in, const ColumnMapping& mapping);

/// parse_dataset on a file. Throws ParseError if the file cannot be opened.
Dataset read_dataset(const std::filesystem::path& path, const ColumnMapping& mapping);

/// Writes subject_id, y, the non-intercept covariates and a "group" column at
/// full precision, so that parse_dataset with mapping_for_written() reads
/// back the same dataset.
void write_dataset(std::ostream& out, const Dataset& dataset);

/// Mapping that reads back the output of write_dataset.
ColumnMapping mapping_for_written(const Dataset& dataset);

}  // namespace glmmgm
