#include "dqlens/relation.hpp"

#include "dqlens/error.hpp"
#include "dqlens/hash.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <deque>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

namespace dqlens {

std::string_view to_string(QuoteMode mode) {
  switch (mode) {
    case QuoteMode::Double: return "double";
    case QuoteMode::Single: return "single";
    case QuoteMode::None: return "none";
  }
  return "double";
}

std::string_view to_string(ColumnType type) {
  return type == ColumnType::Quantitative ? "quantitative" : "categorical";
}

QuoteMode quote_mode_from_string(std::string_view s) {
  if (s == "double" || s == "\"") return QuoteMode::Double;
  if (s == "single" || s == "'") return QuoteMode::Single;
  if (s == "none" || s.empty()) return QuoteMode::None;
  throw Error(ErrorCode::InvalidOptions, "unknown quote mode '" + std::string(s) + "'");
}

std::optional<char> LoadOptions::quote_char() const {
  switch (quote) {
    case QuoteMode::Double: return '"';
    case QuoteMode::Single: return '\'';
    case QuoteMode::None: return std::nullopt;
  }
  return std::nullopt;
}

bool LoadOptions::is_missing_token(std::string_view field) const {
  for (const auto& tok : missing_tokens) {
    if (tok == field) return true;
  }
  return false;
}

void LoadOptions::validate() const {
  if (separator != ',' && separator != ';' && separator != '\t' && separator != '|') {
    throw Error(ErrorCode::InvalidOptions, "separator must be one of , ; \\t |");
  }
  if (auto q = quote_char(); q && *q == separator) {
    throw Error(ErrorCode::InvalidOptions, "separator and quote character must differ");
  }
}

TextColumn TextColumn::from_parts(std::string bytes, std::vector<std::uint64_t> offsets) {
  if (offsets.empty() || offsets.front() != 0 || offsets.back() != bytes.size() ||
      !std::is_sorted(offsets.begin(), offsets.end())) {
    throw Error(ErrorCode::CorruptWorkspace, "inconsistent column offsets");
  }
  TextColumn col;
  col.bytes_ = std::move(bytes);
  col.offsets_ = std::move(offsets);
  return col;
}

void TextColumn::reserve(std::size_t rows, std::size_t bytes) {
  offsets_.reserve(rows + 1);
  bytes_.reserve(bytes);
}

bool parse_decimal(std::string_view text, double& out) {
  std::size_t i = 0;
  const std::size_t n = text.size();
  if (i < n && (text[i] == '+' || text[i] == '-')) ++i;
  std::size_t int_digits = 0;
  while (i < n && text[i] >= '0' && text[i] <= '9') {
    ++i;
    ++int_digits;
  }
  std::size_t frac_digits = 0;
  if (i < n && text[i] == '.') {
    ++i;
    while (i < n && text[i] >= '0' && text[i] <= '9') {
      ++i;
      ++frac_digits;
    }
  }
  if (int_digits + frac_digits == 0) return false;
  if (i < n && (text[i] == 'e' || text[i] == 'E')) {
    ++i;
    if (i < n && (text[i] == '+' || text[i] == '-')) ++i;
    std::size_t exp_digits = 0;
    while (i < n && text[i] >= '0' && text[i] <= '9') {
      ++i;
      ++exp_digits;
    }
    if (exp_digits == 0) return false;
  }
  if (i != n) return false;

  // from_chars rejects a leading '+'.
  const char* first = text.data() + (text[0] == '+' ? 1 : 0);
  double v = 0.0;
  auto res = std::from_chars(first, text.data() + n, v, std::chars_format::general);
  if (res.ec != std::errc{} || res.ptr != text.data() + n || !std::isfinite(v)) return false;
  out = v;
  return true;
}

namespace {

std::atomic<std::uint64_t> g_next_instance{1};

// Record-at-a-time splitter over the whole input.
class DelimitedReader {
 public:
  DelimitedReader(std::string_view src, const LoadOptions& opts)
      : src_(src), sep_(opts.separator), quote_(opts.quote_char()) {}

  bool done() const { return pos_ >= src_.size(); }
  std::size_t record_line() const { return record_line_; }

  // Reads one record into fields (views into the source or into scratch
  // storage for quoted fields with escapes).
  void next(std::vector<std::string_view>& fields) {
    fields.clear();
    scratch_used_ = 0;
    record_line_ = line_;
    for (;;) {
      if (quote_ && pos_ < src_.size() && src_[pos_] == *quote_) {
        read_quoted(fields);
      } else {
        read_plain(fields);
      }
      if (pos_ >= src_.size()) return;
      char c = src_[pos_];
      if (c == sep_) {
        ++pos_;
        if (pos_ >= src_.size()) {
          fields.emplace_back();
          return;
        }
        continue;
      }
      // End of line.
      if (c == '\r') ++pos_;
      if (pos_ < src_.size() && src_[pos_] == '\n') ++pos_;
      ++line_;
      return;
    }
  }

 private:
  void read_plain(std::vector<std::string_view>& fields) {
    const std::size_t start = pos_;
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == sep_ || c == '\n') break;
      if (c == '\r' && (pos_ + 1 == src_.size() || src_[pos_ + 1] == '\n')) break;
      ++pos_;
    }
    fields.push_back(src_.substr(start, pos_ - start));
  }

  void read_quoted(std::vector<std::string_view>& fields) {
    const char q = *quote_;
    const std::size_t start_line = line_;
    ++pos_;
    const std::size_t start = pos_;
    bool escaped = false;
    std::size_t end = std::string_view::npos;
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == q) {
        if (pos_ + 1 < src_.size() && src_[pos_ + 1] == q) {
          escaped = true;
          pos_ += 2;
          continue;
        }
        end = pos_;
        ++pos_;
        break;
      }
      if (c == '\n') ++line_;
      ++pos_;
    }
    if (end == std::string_view::npos) {
      throw Error(ErrorCode::MalformedQuoting, "unterminated quoted field starting on line " +
                                                   std::to_string(start_line),
                  nlohmann::json{{"line", start_line}});
    }
    if (pos_ < src_.size()) {
      char c = src_[pos_];
      bool crlf = c == '\r' && (pos_ + 1 == src_.size() || src_[pos_ + 1] == '\n');
      if (c != sep_ && c != '\n' && !crlf) {
        throw Error(ErrorCode::MalformedQuoting,
                    "unexpected character after closing quote on line " + std::to_string(line_),
                    nlohmann::json{{"line", line_}});
      }
    }
    std::string_view body = src_.substr(start, end - start);
    if (!escaped) {
      fields.push_back(body);
      return;
    }
    if (scratch_used_ == scratch_.size()) scratch_.emplace_back();
    std::string& buf = scratch_[scratch_used_++];
    buf.clear();
    for (std::size_t i = 0; i < body.size(); ++i) {
      buf.push_back(body[i]);
      if (body[i] == q) ++i;
    }
    fields.push_back(buf);
  }

  std::string_view src_;
  char sep_;
  std::optional<char> quote_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t record_line_ = 1;
  // Unescaped quoted fields of the current record; deque keeps earlier
  // entries in place while views into them are alive.
  std::deque<std::string> scratch_;
  std::size_t scratch_used_ = 0;
};

}  // namespace

ParsedTable parse_delimited(std::string_view source, const LoadOptions& opts) {
  opts.validate();
  if (source.empty()) throw Error(ErrorCode::EmptyInput, "input is empty");

  DelimitedReader reader(source, opts);
  std::vector<std::string_view> fields;
  ParsedTable table;

  reader.next(fields);
  const std::size_t arity = fields.size();
  table.columns.resize(arity);
  if (opts.has_header) {
    std::set<std::string_view> seen;
    for (auto f : fields) {
      if (!seen.insert(f).second) {
        throw Error(ErrorCode::DuplicateColumn, "duplicate column name '" + std::string(f) + "'");
      }
      table.names.emplace_back(f);
    }
  } else {
    for (std::size_t i = 0; i < arity; ++i) table.names.push_back("V" + std::to_string(i + 1));
    for (std::size_t i = 0; i < arity; ++i) table.columns[i].push_back(fields[i]);
  }

  const std::size_t bytes_hint = source.size() / std::max<std::size_t>(arity, 1);
  for (auto& col : table.columns) col.reserve(0, bytes_hint);

  std::vector<std::size_t> bad_lines;
  std::size_t n_bad = 0;
  while (!reader.done()) {
    reader.next(fields);
    if (fields.size() != arity) {
      ++n_bad;
      if (bad_lines.size() < 1000) bad_lines.push_back(reader.record_line());
      continue;
    }
    if (n_bad != 0) continue;
    for (std::size_t i = 0; i < arity; ++i) table.columns[i].push_back(fields[i]);
  }
  if (n_bad != 0) {
    std::string msg = std::to_string(n_bad) + " line(s) do not match the header's " + std::to_string(arity) +
                      " fields, first on line " + std::to_string(bad_lines.front());
    throw Error(ErrorCode::ArityMismatch, msg,
                nlohmann::json{{"lines", bad_lines}, {"count", n_bad}, {"expected_fields", arity}});
  }
  return table;
}

Column Column::infer(std::string name, TextColumn raw, const LoadOptions& opts) {
  const std::size_t n = raw.size();
  bool numeric = true;
  bool any_present = false;
  for (std::size_t i = 0; i < n && numeric; ++i) {
    auto f = raw[i];
    if (opts.is_missing_token(f)) continue;
    any_present = true;
    double v;
    numeric = parse_decimal(f, v);
  }
  const ColumnType type = numeric && any_present ? ColumnType::Quantitative : ColumnType::Categorical;
  return with_type(std::move(name), std::move(raw), type, opts);
}

Column Column::with_type(std::string name, TextColumn raw, ColumnType type, const LoadOptions& opts) {
  Column col;
  col.name_ = std::move(name);
  col.type_ = type;
  const std::size_t n = raw.size();
  col.missing_.assign(n, 0);
  if (type == ColumnType::Quantitative) {
    col.values_.resize(n);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < n; ++i) {
      auto f = raw[i];
      if (opts.is_missing_token(f)) {
        col.missing_[i] = 1;
        ++col.n_missing_;
        col.values_[i] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      double v;
      if (!parse_decimal(f, v)) {
        throw Error(ErrorCode::CorruptWorkspace,
                    "column '" + col.name_ + "' typed quantitative holds non-numeric value");
      }
      col.values_[i] = v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (col.n_missing_ < n) col.domain_ = std::make_pair(lo, hi);
  } else {
    col.codes_.resize(n);
    std::unordered_map<std::string_view, std::int32_t> provisional;
    std::vector<std::string_view> first_seen;
    for (std::size_t i = 0; i < n; ++i) {
      auto f = raw[i];
      if (opts.is_missing_token(f)) {
        col.missing_[i] = 1;
        ++col.n_missing_;
        col.codes_[i] = -1;
        continue;
      }
      auto [it, inserted] = provisional.try_emplace(f, static_cast<std::int32_t>(first_seen.size()));
      if (inserted) first_seen.push_back(f);
      col.codes_[i] = it->second;
    }
    std::vector<std::int32_t> order(first_seen.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::int32_t>(i);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return first_seen[a] < first_seen[b]; });
    std::vector<std::int32_t> remap(order.size());
    col.levels_.reserve(order.size());
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      remap[order[rank]] = static_cast<std::int32_t>(rank);
      col.levels_.emplace_back(first_seen[order[rank]]);
    }
    for (auto& c : col.codes_) {
      if (c >= 0) c = remap[c];
    }
  }
  // raw_ is moved last: the string_views above point into it.
  col.raw_ = std::move(raw);
  return col;
}

std::optional<std::int32_t> Column::level_index(std::string_view level) const {
  auto it = std::lower_bound(levels_.begin(), levels_.end(), level,
                             [](const std::string& a, std::string_view b) { return std::string_view(a) < b; });
  if (it == levels_.end() || *it != level) return std::nullopt;
  return static_cast<std::int32_t>(it - levels_.begin());
}

Relation::Relation(std::string name, std::vector<Column> columns, LoadOptions options, std::string source_digest)
    : name_(std::move(name)),
      columns_(std::move(columns)),
      options_(std::move(options)),
      source_digest_(std::move(source_digest)),
      instance_id_(g_next_instance.fetch_add(1)) {
  n_rows_ = columns_.empty() ? 0 : columns_.front().size();
  std::set<std::string_view> seen;
  for (const auto& c : columns_) {
    if (c.size() != n_rows_) throw Error(ErrorCode::CorruptWorkspace, "columns differ in length");
    if (!seen.insert(c.name()).second) {
      throw Error(ErrorCode::DuplicateColumn, "duplicate column name '" + c.name() + "'");
    }
  }
}

std::optional<std::size_t> Relation::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name() == name) return i;
  }
  return std::nullopt;
}

const Column& Relation::column(std::string_view name) const {
  if (auto idx = column_index(name)) return columns_[*idx];
  throw Error(ErrorCode::UnknownAttribute, "relation '" + name_ + "' has no attribute '" + std::string(name) + "'",
              nlohmann::json{{"attribute", name}});
}

std::vector<Column> infer_column_types(std::vector<std::string> names, std::vector<TextColumn> raw,
                                       const LoadOptions& opts) {
  std::vector<Column> out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out.push_back(Column::infer(std::move(names[i]), std::move(raw[i]), opts));
  }
  return out;
}

RelationPtr load_relation(std::string_view source, std::string name, const LoadOptions& opts) {
  auto table = parse_delimited(source, opts);
  auto digest = sha256_hex(source);
  auto columns = infer_column_types(std::move(table.names), std::move(table.columns), opts);
  return std::make_shared<const Relation>(std::move(name), std::move(columns), opts, std::move(digest));
}

namespace {

void append_field(std::string& out, std::string_view f, char sep, std::optional<char> quote) {
  bool needs_quote = false;
  if (quote) {
    for (char c : f) {
      if (c == sep || c == *quote || c == '\n' || c == '\r') {
        needs_quote = true;
        break;
      }
    }
  }
  if (!needs_quote) {
    out.append(f);
    return;
  }
  out.push_back(*quote);
  for (char c : f) {
    out.push_back(c);
    if (c == *quote) out.push_back(c);
  }
  out.push_back(*quote);
}

}  // namespace

std::string serialize_delimited(const Relation& rel, const LoadOptions& opts) {
  const auto quote = opts.quote_char();
  const char sep = opts.separator;
  std::string out;
  std::size_t total = 0;
  for (const auto& c : rel.columns()) total += c.raw_text().bytes().size() + c.size() + c.name().size() + 1;
  out.reserve(total + 16);
  const auto& cols = rel.columns();
  if (opts.has_header) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      if (j) out.push_back(sep);
      append_field(out, cols[j].name(), sep, quote);
    }
    out.push_back('\n');
  }
  for (std::size_t i = 0; i < rel.n_rows(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      if (j) out.push_back(sep);
      append_field(out, cols[j].raw(i), sep, quote);
    }
    out.push_back('\n');
  }
  return out;
}

}  // namespace dqlens
