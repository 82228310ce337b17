#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "impugan/data/table.hpp"

namespace impugan::data {

using CsvRecord = std::vector<std::string>;

// RFC 4180 reader. Quoted fields may contain separators, doubled quotes and
// line breaks. Unquoted fields are trimmed of surrounding blanks. Blank lines
// are skipped.
std::vector<CsvRecord> parse_csv(std::istream& in);
std::vector<CsvRecord> read_csv_file(const std::filesystem::path& path);

std::string quote_csv_field(const std::string& field);
void write_csv_record(std::ostream& out, const CsvRecord& record);

struct IngestOptions {
  // When set, columns are matched by name and typed as declared.
  std::optional<TableSchema> schema;
  std::vector<std::string> missing_tokens{"", "?"};
  // Forces the inferred kind of named columns.
  std::map<std::string, ColumnKind> kinds;
  // Fraction of non-missing cells that must parse as numbers for a column to
  // be inferred continuous.
  double numeric_threshold = 0.99;
};

Table ingest_csv(const std::filesystem::path& path, const IngestOptions& options = {});
Table ingest_records(const std::vector<CsvRecord>& records, const IngestOptions& options = {});

// Header plus one line per row; missing cells take the schema's first missing
// token.
void write_table_csv(std::ostream& out, const Table& table);
void write_table_csv(const std::filesystem::path& path, const Table& table);

bool parse_number(std::string_view text, double& out);

}  // namespace impugan::data
