#include "impugan/data/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "impugan/error.hpp"

namespace impugan::data {
namespace {

bool blank(char c) { return c == ' ' || c == '\t'; }

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && blank(s[b])) ++b;
  while (e > b && blank(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace

std::vector<CsvRecord> parse_csv(std::istream& in) {
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  std::vector<CsvRecord> records;
  CsvRecord record;
  std::string field;
  bool quoted = false;      // current field began with a quote
  bool in_quotes = false;   // inside the quoted section
  bool any = false;         // record has content
  std::size_t line = 1;

  auto end_field = [&] {
    record.push_back(quoted ? field : trim(field));
    field.clear();
    quoted = false;
  };
  auto end_record = [&] {
    if (any || !record.empty()) {
      end_field();
      records.push_back(std::move(record));
    }
    record.clear();
    field.clear();
    quoted = false;
    any = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!quoted && std::all_of(field.begin(), field.end(), blank)) {
          field.clear();
          quoted = true;
          in_quotes = true;
          any = true;
        } else {
          throw DataError("line " + std::to_string(line) + ": stray quote in unquoted field");
        }
        break;
      case ',':
        end_field();
        any = true;
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        ++line;
        break;
      default:
        if (quoted) {
          if (!blank(c)) throw DataError("line " + std::to_string(line) + ": text after closing quote");
        } else {
          field.push_back(c);
          if (!blank(c)) any = true;
        }
    }
  }
  if (in_quotes) throw DataError("line " + std::to_string(line) + ": unterminated quoted field");
  end_record();
  return records;
}

std::vector<CsvRecord> read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  return parse_csv(in);
}

std::string quote_csv_field(const std::string& field) {
  const bool needs = field.find_first_of(",\"\r\n") != std::string::npos ||
                     (!field.empty() && (blank(field.front()) || blank(field.back())));
  if (!needs) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_csv_record(std::ostream& out, const CsvRecord& record) {
  for (std::size_t i = 0; i < record.size(); ++i) {
    if (i) out << ',';
    out << quote_csv_field(record[i]);
  }
  out << '\n';
}

bool parse_number(std::string_view text, double& out) {
  if (text.empty()) return false;
  const char* first = text.data();
  const char* last = first + text.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

Table ingest_records(const std::vector<CsvRecord>& records, const IngestOptions& options) {
  if (records.empty()) throw DataError("no header row");
  const CsvRecord& header = records.front();
  const std::size_t d = header.size();
  const std::size_t n = records.size() - 1;
  if (n == 0) throw DataError("table has no data rows");
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != d) {
      throw DataError("ragged row " + std::to_string(r) + ": " + std::to_string(records[r].size()) +
                      " fields, header has " + std::to_string(d));
    }
  }

  TableSchema schema;
  schema.missing_tokens = options.missing_tokens;
  if (options.schema) schema.missing_tokens = options.schema->missing_tokens;
  auto is_missing = [&](const std::string& cell) { return schema.is_missing_token(cell); };

  for (std::size_t c = 0; c < d; ++c) {
    ColumnSpec spec;
    spec.name = header[c];
    if (options.schema) {
      const int k = options.schema->find(spec.name);
      if (k < 0) throw DataError("column '" + spec.name + "' is not in the declared schema");
      spec = options.schema->columns[static_cast<std::size_t>(k)];
    } else {
      std::size_t present = 0;
      std::size_t numeric = 0;
      double tmp = 0;
      for (std::size_t r = 1; r <= n; ++r) {
        const auto& cell = records[r][c];
        if (is_missing(cell)) continue;
        ++present;
        if (parse_number(cell, tmp)) ++numeric;
      }
      ColumnKind kind = (present == 0 || static_cast<double>(numeric) >= options.numeric_threshold *
                                                                           static_cast<double>(present))
                            ? ColumnKind::kContinuous
                            : ColumnKind::kDiscrete;
      if (auto it = options.kinds.find(spec.name); it != options.kinds.end()) kind = it->second;
      spec.kind = kind;
      if (kind == ColumnKind::kDiscrete) {
        std::set<std::string> vocab;
        for (std::size_t r = 1; r <= n; ++r) {
          if (!is_missing(records[r][c])) vocab.insert(records[r][c]);
        }
        spec.categories.assign(vocab.begin(), vocab.end());
      }
    }
    schema.columns.push_back(std::move(spec));
  }
  if (options.schema && options.schema->size() != d) {
    throw DataError("file has " + std::to_string(d) + " columns, declared schema has " +
                    std::to_string(options.schema->size()));
  }
  schema.validate();

  Table table(schema, n);
  for (std::size_t c = 0; c < d; ++c) {
    const ColumnSpec& spec = schema.columns[c];
    std::size_t unparsed = 0;
    for (std::size_t r = 0; r < n; ++r) {
      const auto& cell = records[r + 1][c];
      if (is_missing(cell)) continue;
      if (spec.discrete()) {
        const int idx = spec.category_index(cell);
        if (idx < 0) {
          throw DataError("row " + std::to_string(r + 1) + ", column '" + spec.name + "': unknown category '" +
                          cell + "'");
        }
        table.set(r, c, idx);
      } else {
        double v = 0;
        if (parse_number(cell, v)) {
          table.set(r, c, v);
        } else {
          ++unparsed;
        }
      }
    }
    if (unparsed > 0) {
      spdlog::warn("column '{}': {} non-numeric cells read as missing", spec.name, unparsed);
    }
  }
  return table;
}

Table ingest_csv(const std::filesystem::path& path, const IngestOptions& options) {
  return ingest_records(read_csv_file(path), options);
}

void write_table_csv(std::ostream& out, const Table& table) {
  CsvRecord record;
  for (const auto& c : table.schema().columns) record.push_back(c.name);
  write_csv_record(out, record);
  for (std::size_t r = 0; r < table.rows(); ++r) {
    record.clear();
    for (std::size_t c = 0; c < table.cols(); ++c) record.push_back(table.cell_text(r, c));
    write_csv_record(out, record);
  }
}

void write_table_csv(const std::filesystem::path& path, const Table& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  write_table_csv(out, table);
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace impugan::data
