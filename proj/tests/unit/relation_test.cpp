#include "dqlens/hash.hpp"
#include "dqlens/relation.hpp"
#include "dqlens/workspace.hpp"
#include "naive.hpp"
#include "support.hpp"

#include <random>

using namespace dqlens;

namespace {

LoadOptions semicolon() {
  LoadOptions o;
  o.separator = ';';
  return o;
}

}  // namespace

TEST(Load, MinimalSemicolonFile) {
  auto rel = load_relation("a;b\n1;x\n2;y", "t", semicolon());
  EXPECT_EQ(rel->n_rows(), 2u);
  EXPECT_EQ(rel->column("a").type(), ColumnType::Quantitative);
  EXPECT_EQ(rel->column("b").type(), ColumnType::Categorical);
  EXPECT_EQ(rel->column("a").value(1), 2.0);
  EXPECT_EQ(rel->column("b").raw(0), "x");
}

TEST(Load, ArityViolationOnLineSeven) {
  std::string src = "a,b,c,d,e\n";
  for (int line = 2; line <= 9; ++line) src += line == 7 ? "1,2,3,4\n" : "1,2,3,4,5\n";
  try {
    load_relation(src, "t", {});
    FAIL() << "expected ArityMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ArityMismatch);
    EXPECT_EQ(e.detail()["lines"], nlohmann::json::array({7}));
  }
}

TEST(Load, ArityReportsEveryOffendingLine) {
  try {
    load_relation("a,b\n1,2\n3\n4,5,6\n7,8\n", "t", {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ArityMismatch);
    EXPECT_EQ(e.detail()["lines"], nlohmann::json::array({3, 4}));
  }
}

TEST(Load, NonNumericValueMakesColumnCategorical) {
  auto rel = load_relation("v\n1\n2\n7a\n", "t", {});
  const auto& c = rel->column("v");
  EXPECT_EQ(c.type(), ColumnType::Categorical);
  EXPECT_EQ(c.raw(0), "1");
  EXPECT_EQ(c.raw(1), "2");
  EXPECT_EQ(c.raw(2), "7a");
  EXPECT_EQ(c.levels(), (std::vector<std::string>{"1", "2", "7a"}));
}

TEST(Typing, NumericWithMissing) {
  auto rel = load_relation("v\n1.5\n-2e3\n\n", "t", {});
  const auto& c = rel->column("v");
  ASSERT_EQ(rel->n_rows(), 3u);
  EXPECT_EQ(c.type(), ColumnType::Quantitative);
  EXPECT_EQ(c.missing_count(), 1u);
  EXPECT_EQ(c.value(1), -2000.0);
  EXPECT_TRUE(std::isnan(c.value(2)));
  EXPECT_EQ(c.domain()->first, -2000.0);
  EXPECT_EQ(c.domain()->second, 1.5);
}

TEST(Typing, AllMissingIsCategorical) {
  auto rel = load_relation("v,w\n,1\nNA,2\n", "t", {});
  const auto& c = rel->column("v");
  EXPECT_EQ(c.type(), ColumnType::Categorical);
  EXPECT_EQ(c.missing_count(), 2u);
  EXPECT_TRUE(c.levels().empty());
}

TEST(Typing, DecimalGrammar) {
  double v;
  for (const char* ok : {"0", "-1", "+2", "3.", ".5", "1e5", "1E-3", "-.25e+2", "007"}) {
    EXPECT_TRUE(parse_decimal(ok, v)) << ok;
  }
  for (const char* bad : {"", "-", ".", "e5", "1e", "1,5", "0x10", "inf", "nan", " 1", "1 ", "1e400", "1.2.3"}) {
    EXPECT_FALSE(parse_decimal(bad, v)) << bad;
  }
  ASSERT_TRUE(parse_decimal("-.25e+2", v));
  EXPECT_EQ(v, -25.0);
}

TEST(Typing, CustomMissingTokens) {
  LoadOptions o;
  o.missing_tokens = {"?"};
  auto rel = load_relation("v\n1\n?\nNA\n", "t", o);
  EXPECT_EQ(rel->column("v").type(), ColumnType::Categorical);
  EXPECT_EQ(rel->column("v").missing_count(), 1u);
}

TEST(Typing, Deterministic) {
  std::mt19937_64 rng(3);
  const auto csv = oracle::random_csv(rng, 300);
  auto a = load_relation(csv, "a", {});
  auto b = load_relation(csv, "b", {});
  for (std::size_t i = 0; i < a->n_columns(); ++i) EXPECT_EQ(a->column(i).type(), b->column(i).type());
}

TEST(Load, Errors) {
  EXPECT_DQ_ERROR(load_relation("", "t", {}), ErrorCode::EmptyInput);
  EXPECT_DQ_ERROR(load_relation("a,a\n1,2\n", "t", {}), ErrorCode::DuplicateColumn);
  EXPECT_DQ_ERROR(load_relation("a,b\n\"1,2\n", "t", {}), ErrorCode::MalformedQuoting);
  EXPECT_DQ_ERROR(load_relation("a,b\n\"1\"x,2\n", "t", {}), ErrorCode::MalformedQuoting);
  LoadOptions bad;
  bad.separator = '"';
  EXPECT_DQ_ERROR(load_relation("a\n1\n", "t", bad), ErrorCode::InvalidOptions);
}

TEST(Load, QuotedFieldsKeepTheirContent) {
  auto rel = load_relation("name,v\n\"Doe, J\",1\n\"say \"\"hi\"\"\",2\n\"two\nlines\",3\r\n", "t", {});
  ASSERT_EQ(rel->n_rows(), 3u);
  EXPECT_EQ(rel->column("name").raw(0), "Doe, J");
  EXPECT_EQ(rel->column("name").raw(1), "say \"hi\"");
  EXPECT_EQ(rel->column("name").raw(2), "two\nlines");
  EXPECT_EQ(rel->column("v").value(2), 3.0);
}

TEST(Load, HeaderlessNamesColumns) {
  LoadOptions o;
  o.has_header = false;
  auto rel = load_relation("1,a\n2,b\n", "t", o);
  EXPECT_EQ(rel->n_rows(), 2u);
  EXPECT_EQ(rel->column(0).name(), "V1");
  EXPECT_EQ(rel->column(1).name(), "V2");
}

TEST(Load, CrLfLineEndings) {
  auto rel = load_relation("a,b\r\n1,x\r\n2,y\r\n", "t", {});
  EXPECT_EQ(rel->n_rows(), 2u);
  EXPECT_EQ(rel->column("b").raw(1), "y");
}

TEST(RawPreservation, ReserializationIsByteExact) {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 20; ++round) {
    const auto csv = oracle::random_csv(rng, 1 + rng() % 500);
    auto rel = load_relation(csv, "t", {});
    EXPECT_EQ(serialize_delimited(*rel, rel->options()), csv);
  }
}

TEST(RawPreservation, QuotedAndSemicolonFields) {
  const std::string src = "a;b\n\"x;y\";1\n\"q\"\"q\";2\nplain;3\n";
  auto rel = load_relation(src, "t", semicolon());
  EXPECT_EQ(serialize_delimited(*rel, rel->options()), src);
}

TEST(RawPreservation, SourceDigestIsHashOfInput) {
  const std::string src = "a,b\n1,2\n";
  EXPECT_EQ(load_relation(src, "t", {})->source_digest(), sha256_hex(src));
}

TEST(Workspace, LoadDiscardReload) {
  Workspace ws;
  const std::string src = "a,b\n1,x\n";
  auto first = ws.load(src, "emp", {});
  EXPECT_DQ_ERROR(ws.load(src, "emp", {}), ErrorCode::DuplicateName);
  ws.discard("emp");
  EXPECT_TRUE(ws.list().empty());
  EXPECT_DQ_ERROR(ws.discard("x"), ErrorCode::UnknownRelation);
  EXPECT_FALSE(ws.is_live(first->instance_id()));
  auto second = ws.load(src, "emp", {});
  EXPECT_EQ(first->source_digest(), second->source_digest());
  EXPECT_EQ(second->source_digest(), sha256_hex(src));
  EXPECT_NE(first->instance_id(), second->instance_id());
}

TEST(Workspace, EmptyRoundTripKeepsTechniquesUnavailable) {
  Workspace ws;
  EXPECT_FALSE(ws.techniques_available());
  auto blob = ws.save();
  auto back = Workspace::restore(blob);
  EXPECT_TRUE(back.empty());
  EXPECT_FALSE(back.techniques_available());
  EXPECT_EQ(back.version(), 1u);
}

TEST(Workspace, RoundTripPreservesRelations) {
  Workspace ws;
  std::mt19937_64 rng(5);
  const auto csv1 = oracle::random_csv(rng, 200);
  LoadOptions o = semicolon();
  ws.load(csv1, "one", {});
  ws.load("k;v\n\"a;b\";1\nc;NA\n", "two", o);
  ws.save();
  auto blob = ws.save();
  auto back = Workspace::restore(blob);
  EXPECT_EQ(back.version(), 2u);
  ASSERT_EQ(back.list(), ws.list());
  for (const auto& name : ws.list()) {
    auto a = ws.get(name);
    auto b = back.get(name);
    EXPECT_EQ(a->source_digest(), b->source_digest());
    EXPECT_EQ(a->n_rows(), b->n_rows());
    ASSERT_EQ(a->n_columns(), b->n_columns());
    for (std::size_t i = 0; i < a->n_columns(); ++i) {
      EXPECT_EQ(a->column(i).name(), b->column(i).name());
      EXPECT_EQ(a->column(i).type(), b->column(i).type());
      EXPECT_TRUE(a->column(i).raw_text() == b->column(i).raw_text());
    }
    EXPECT_EQ(serialize_delimited(*a, a->options()), serialize_delimited(*b, b->options()));
  }
  EXPECT_EQ(back.get("two")->options().separator, ';');
}

TEST(Workspace, CorruptArchives) {
  Workspace ws;
  ws.load("a\n1\n", "t", {});
  const auto blob = ws.save();
  EXPECT_DQ_ERROR(Workspace::restore(blob.substr(0, blob.size() / 2)), ErrorCode::CorruptWorkspace);
  EXPECT_DQ_ERROR(Workspace::restore(""), ErrorCode::CorruptWorkspace);
  auto flipped = blob;
  flipped[20] ^= 1;
  EXPECT_DQ_ERROR(Workspace::restore(flipped), ErrorCode::CorruptWorkspace);
}

TEST(Workspace, SnapshotsAreImmutable) {
  Workspace ws;
  ws.load("a\n1\n", "t", {});
  auto snap = ws.snapshot();
  ws.load("a\n2\n", "u", {});
  ws.discard("t");
  EXPECT_EQ(snap->size(), 1u);
  EXPECT_TRUE(snap->count("t"));
}

TEST(LoadOptions, JsonRoundTrip) {
  LoadOptions o;
  o.separator = '\t';
  o.quote = QuoteMode::Single;
  o.has_header = false;
  o.missing_tokens = {"-"};
  auto back = load_options_from_json(to_json(o));
  EXPECT_EQ(back.separator, '\t');
  EXPECT_EQ(back.quote, QuoteMode::Single);
  EXPECT_FALSE(back.has_header);
  EXPECT_EQ(back.missing_tokens, o.missing_tokens);
  EXPECT_EQ(load_options_from_json({{"separator", "tab"}}).separator, '\t');
  EXPECT_DQ_ERROR(load_options_from_json({{"separator", ";;"}}), ErrorCode::InvalidOptions);
}
