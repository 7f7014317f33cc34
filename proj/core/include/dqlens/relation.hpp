#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dqlens {

enum class QuoteMode { Double, Single, None };
enum class ColumnType { Quantitative, Categorical };

std::string_view to_string(QuoteMode mode);
std::string_view to_string(ColumnType type);
QuoteMode quote_mode_from_string(std::string_view s);

struct LoadOptions {
  char separator = ',';
  QuoteMode quote = QuoteMode::Double;
  bool has_header = true;
  std::vector<std::string> missing_tokens{"", "NA"};

  std::optional<char> quote_char() const;
  bool is_missing_token(std::string_view field) const;
  // Throws InvalidOptions.
  void validate() const;
};

// Contiguous storage of a column's original field text: one byte buffer plus
// n+1 offsets.
class TextColumn {
 public:
  TextColumn() = default;
  static TextColumn from_parts(std::string bytes, std::vector<std::uint64_t> offsets);

  void reserve(std::size_t rows, std::size_t bytes);
  void push_back(std::string_view field) {
    bytes_.append(field);
    offsets_.push_back(bytes_.size());
  }

  std::string_view operator[](std::size_t row) const {
    return std::string_view(bytes_).substr(offsets_[row], offsets_[row + 1] - offsets_[row]);
  }
  std::size_t size() const { return offsets_.size() - 1; }
  const std::string& bytes() const { return bytes_; }
  const std::vector<std::uint64_t>& offsets() const { return offsets_; }

  friend bool operator==(const TextColumn&, const TextColumn&) = default;

 private:
  std::string bytes_;
  std::vector<std::uint64_t> offsets_{0};
};

class Column {
 public:
  // Types the column from its raw text: Quantitative iff every non-missing
  // field is a decimal number.
  static Column infer(std::string name, TextColumn raw, const LoadOptions& opts);
  // Builds the column with a known type. Throws CorruptWorkspace if a
  // Quantitative column holds a non-numeric field.
  static Column with_type(std::string name, TextColumn raw, ColumnType type, const LoadOptions& opts);

  const std::string& name() const { return name_; }
  ColumnType type() const { return type_; }
  bool quantitative() const { return type_ == ColumnType::Quantitative; }
  bool categorical() const { return type_ == ColumnType::Categorical; }
  std::size_t size() const { return raw_.size(); }

  std::string_view raw(std::size_t row) const { return raw_[row]; }
  const TextColumn& raw_text() const { return raw_; }

  bool is_missing(std::size_t row) const { return missing_[row] != 0; }
  std::size_t missing_count() const { return n_missing_; }

  // Quantitative only; NaN marks a missing value.
  std::span<const double> values() const { return values_; }
  double value(std::size_t row) const { return values_[row]; }
  // Min and max over non-missing values; empty when every value is missing.
  std::optional<std::pair<double, double>> domain() const { return domain_; }

  // Categorical only; -1 marks a missing value. Levels are sorted bytewise.
  std::span<const std::int32_t> codes() const { return codes_; }
  std::int32_t code(std::size_t row) const { return codes_[row]; }
  const std::vector<std::string>& levels() const { return levels_; }
  std::optional<std::int32_t> level_index(std::string_view level) const;

 private:
  Column() = default;

  std::string name_;
  ColumnType type_ = ColumnType::Categorical;
  TextColumn raw_;
  std::vector<std::uint8_t> missing_;
  std::size_t n_missing_ = 0;
  std::vector<double> values_;
  std::optional<std::pair<double, double>> domain_;
  std::vector<std::int32_t> codes_;
  std::vector<std::string> levels_;
};

class Relation {
 public:
  Relation(std::string name, std::vector<Column> columns, LoadOptions options, std::string source_digest);

  const std::string& name() const { return name_; }
  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_columns() const { return columns_.size(); }
  const std::vector<Column>& columns() const { return columns_; }
  const Column& column(std::size_t i) const { return columns_[i]; }
  // Throws UnknownAttribute.
  const Column& column(std::string_view name) const;
  std::optional<std::size_t> column_index(std::string_view name) const;

  const LoadOptions& options() const { return options_; }
  const std::string& source_digest() const { return source_digest_; }
  // Process-unique id of this loaded instance; frames remember it so picks
  // against a discarded relation can be detected.
  std::uint64_t instance_id() const { return instance_id_; }

 private:
  std::string name_;
  std::vector<Column> columns_;
  std::size_t n_rows_ = 0;
  LoadOptions options_;
  std::string source_digest_;
  std::uint64_t instance_id_;
};

using RelationPtr = std::shared_ptr<const Relation>;

// Decimal grammar: optional sign, digits with optional '.' fraction (or a
// bare fraction), optional exponent. Values that overflow a finite double do
// not qualify.
bool parse_decimal(std::string_view text, double& out);

// Splits delimited text into raw columns. Throws EmptyInput,
// MalformedQuoting or ArityMismatch (detail lists every offending line).
struct ParsedTable {
  std::vector<std::string> names;
  std::vector<TextColumn> columns;
};
ParsedTable parse_delimited(std::string_view source, const LoadOptions& opts);

std::vector<Column> infer_column_types(std::vector<std::string> names, std::vector<TextColumn> raw,
                                       const LoadOptions& opts);

RelationPtr load_relation(std::string_view source, std::string name, const LoadOptions& opts);

// Writes the raw values back out with the given separator and quoting,
// quoting only fields that need it. Lines end in '\n'.
std::string serialize_delimited(const Relation& rel, const LoadOptions& opts);

}  // namespace dqlens
