#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "impugan/data/csv.hpp"
#include "impugan/error.hpp"

namespace impugan::data {
namespace {

Table from_text(const std::string& text, const IngestOptions& options = {}) {
  std::istringstream in(text);
  return ingest_records(parse_csv(in), options);
}

TEST(CsvTest, InfersOneContinuousAndOneDiscreteColumn) {
  const Table t = from_text("n,s\n1,a\n2.5,b\n-3,a\n");
  ASSERT_EQ(t.rows(), 3u);
  ASSERT_EQ(t.cols(), 2u);
  EXPECT_EQ(t.schema().columns[0].kind, ColumnKind::kContinuous);
  EXPECT_EQ(t.schema().columns[1].kind, ColumnKind::kDiscrete);
  EXPECT_EQ(t.schema().columns[1].categories, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(t.at(1, 0), 2.5);
  EXPECT_EQ(t.category_name(2, 1), "a");
}

TEST(CsvTest, QuestionMarkIsMissing) {
  const Table t = from_text("n,s\n1,a\n?,b\n3,?\n");
  const MaskMatrix m = t.mask();
  EXPECT_FALSE(m.observed(1, 0));
  EXPECT_FALSE(m.observed(2, 1));
  EXPECT_TRUE(m.observed(0, 0));
  EXPECT_EQ(m.missing_count(), 2u);
  EXPECT_EQ(t.schema().columns[0].kind, ColumnKind::kContinuous);
}

TEST(CsvTest, NumericThresholdAllowsStrayText) {
  std::string text = "v\n";
  for (int i = 0; i < 199; ++i) text += std::to_string(i) + "\n";
  text += "oops\n";
  const Table t = from_text(text);
  EXPECT_EQ(t.schema().columns[0].kind, ColumnKind::kContinuous);
  EXPECT_TRUE(t.missing(199, 0));

  text += "again\nmore\n";
  EXPECT_EQ(from_text(text).schema().columns[0].kind, ColumnKind::kDiscrete);
}

TEST(CsvTest, QuotedFieldsFollowRfc4180) {
  std::istringstream in("a,b\r\n\"x, y\",\"say \"\"hi\"\"\"\n\"two\nlines\", plain \n");
  const auto records = parse_csv(in);
  ASSERT_EQ(records.size(), 3u);
  EXPECT_EQ(records[1][0], "x, y");
  EXPECT_EQ(records[1][1], "say \"hi\"");
  EXPECT_EQ(records[2][0], "two\nlines");
  EXPECT_EQ(records[2][1], "plain");
}

TEST(CsvTest, MalformedInputIsRejected) {
  EXPECT_THROW(from_text("a,b\n1,2\n3\n"), DataError);
  EXPECT_THROW(from_text("a,b\n"), DataError);
  EXPECT_THROW(from_text(""), DataError);
  EXPECT_THROW(from_text("a\n\"open\n"), DataError);
  EXPECT_THROW(ingest_csv("/nonexistent/file.csv"), DataError);
}

TEST(CsvTest, DeclaredSchemaRejectsUnknownCategory) {
  IngestOptions o;
  o.schema = TableSchema{};
  o.schema->columns = {{"s", ColumnKind::kDiscrete, {"a", "b"}}};
  EXPECT_NO_THROW(from_text("s\na\nb\n", o));
  try {
    from_text("s\na\nz\n", o);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("'z'"), std::string::npos);
  }
}

TEST(CsvTest, DuplicateColumnNamesAreRejected) {
  EXPECT_THROW(from_text("a,a\n1,2\n"), DataError);
}

TEST(CsvTest, WriteThenReadIsIdentical) {
  const Table t = from_text("n,s\n0.1,\"a,b\"\n?,c\n1e-300,?\n");
  std::ostringstream out;
  write_table_csv(out, t);
  IngestOptions o;
  o.schema = t.schema();
  const Table back = from_text(out.str(), o);
  EXPECT_TRUE(back.identical(t));
}

TEST(CsvTest, AdultHas48842Rows) {
  const std::filesystem::path path = IMPUGAN_DATA_DIR "/adult.csv";
  if (!std::filesystem::exists(path)) GTEST_SKIP() << "adult.csv not present";
  const Table t = ingest_csv(path);
  EXPECT_EQ(t.rows(), 48842u);
  EXPECT_EQ(t.cols(), 15u);
  EXPECT_EQ(t.schema().columns[t.schema().index("age")].kind, ColumnKind::kContinuous);
  EXPECT_EQ(t.schema().columns[t.schema().index("workclass")].kind, ColumnKind::kDiscrete);
  EXPECT_EQ(t.schema().columns[t.schema().index("income")].categories,
            (std::vector<std::string>{"<=50K", ">50K"}));
  EXPECT_GT(t.mask().missing_count(), 0u);
}

TEST(SchemaJsonTest, RoundTrip) {
  TableSchema s;
  s.columns = {{"a", ColumnKind::kContinuous, {}}, {"b", ColumnKind::kDiscrete, {"x", "y"}}};
  s.missing_tokens = {"", "NA"};
  const TableSchema back = schema_from_json(schema_to_json(s));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.columns[1].categories, s.columns[1].categories);
  EXPECT_EQ(back.columns[0].kind, ColumnKind::kContinuous);
  EXPECT_EQ(back.missing_tokens, s.missing_tokens);
  auto bad = schema_to_json(s);
  bad["columns"][1]["categories"] = {"y", "x"};
  EXPECT_THROW(schema_from_json(bad), DataError);
}

}  // namespace
}  // namespace impugan::data
