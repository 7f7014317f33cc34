#include "dqlens/workspace.hpp"

#include "dqlens/canonical_json.hpp"
#include "dqlens/error.hpp"
#include "dqlens/hash.hpp"

#include <cstring>

namespace dqlens {
namespace {

// Archive layout (all integers little-endian):
//   magic "DQLENSWS" | u32 format | u64 manifest_len | manifest (canonical JSON)
//   per relation, per column: u64 nbytes | bytes | u64 noffsets | u64[noffsets]
//   sha256 of everything above (32 bytes)
constexpr char kMagic[8] = {'D', 'Q', 'L', 'E', 'N', 'S', 'W', 'S'};
constexpr std::uint32_t kFormat = 1;

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Cursor {
 public:
  explicit Cursor(std::string_view data) : data_(data) {}

  std::string_view take(std::uint64_t n) {
    if (n > data_.size() - pos_) throw Error(ErrorCode::CorruptWorkspace, "archive truncated");
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint64_t u64() {
    auto b = take(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[i]);
    return v;
  }
  std::uint32_t u32() {
    auto b = take(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[i]);
    return v;
  }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace

nlohmann::json to_json(const LoadOptions& o) {
  return {{"separator", std::string(1, o.separator)},
          {"quote", to_string(o.quote)},
          {"has_header", o.has_header},
          {"missing_tokens", o.missing_tokens}};
}

LoadOptions load_options_from_json(const nlohmann::json& j) {
  try {
    LoadOptions o;
    if (j.is_null()) return o;
    auto sep = j.value("separator", std::string(","));
    if (sep == "\\t" || sep == "tab") sep = "\t";
    if (sep.size() != 1) throw Error(ErrorCode::InvalidOptions, "separator must be a single character");
    o.separator = sep[0];
    if (j.contains("quote")) o.quote = quote_mode_from_string(j["quote"].get<std::string>());
    o.has_header = j.value("has_header", true);
    if (j.contains("missing_tokens")) o.missing_tokens = j["missing_tokens"].get<std::vector<std::string>>();
    o.validate();
    return o;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidOptions, std::string("malformed load options: ") + e.what());
  }
}

Workspace::Workspace(Workspace&& other) noexcept {
  std::lock_guard lock(other.mu_);
  catalog_ = std::move(other.catalog_);
  version_ = other.version_;
  other.catalog_ = std::make_shared<const Catalog>();
}

Workspace& Workspace::operator=(Workspace&& other) noexcept {
  if (this == &other) return *this;
  std::scoped_lock lock(mu_, other.mu_);
  catalog_ = std::move(other.catalog_);
  version_ = other.version_;
  other.catalog_ = std::make_shared<const Catalog>();
  return *this;
}

RelationPtr Workspace::load(std::string_view source, const std::string& name, const LoadOptions& opts) {
  if (find(name)) throw Error(ErrorCode::DuplicateName, "relation '" + name + "' already loaded");
  auto rel = load_relation(source, name, opts);
  add(rel);
  return rel;
}

void Workspace::add(RelationPtr rel) {
  std::lock_guard lock(mu_);
  if (catalog_->count(rel->name())) {
    throw Error(ErrorCode::DuplicateName, "relation '" + rel->name() + "' already loaded");
  }
  auto next = std::make_shared<Catalog>(*catalog_);
  next->emplace(rel->name(), std::move(rel));
  catalog_ = std::move(next);
}

void Workspace::discard(std::string_view name) {
  std::lock_guard lock(mu_);
  auto it = catalog_->find(name);
  if (it == catalog_->end()) {
    throw Error(ErrorCode::UnknownRelation, "no relation named '" + std::string(name) + "'");
  }
  auto next = std::make_shared<Catalog>(*catalog_);
  next->erase(std::string(name));
  catalog_ = std::move(next);
}

CatalogSnapshot Workspace::snapshot() const {
  std::lock_guard lock(mu_);
  return catalog_;
}

RelationPtr Workspace::find(std::string_view name) const {
  auto snap = snapshot();
  auto it = snap->find(name);
  return it == snap->end() ? nullptr : it->second;
}

RelationPtr Workspace::get(std::string_view name) const {
  if (auto rel = find(name)) return rel;
  throw Error(ErrorCode::UnknownRelation, "no relation named '" + std::string(name) + "'",
              nlohmann::json{{"relation", name}});
}

bool Workspace::is_live(std::uint64_t instance_id) const {
  auto snap = snapshot();
  for (const auto& [_, rel] : *snap) {
    if (rel->instance_id() == instance_id) return true;
  }
  return false;
}

std::vector<std::string> Workspace::list() const {
  auto snap = snapshot();
  std::vector<std::string> out;
  for (const auto& [name, _] : *snap) out.push_back(name);
  return out;
}

std::uint64_t Workspace::version() const {
  std::lock_guard lock(mu_);
  return version_;
}

std::string Workspace::save() {
  const auto v = version() + 1;
  auto out = archive(v);
  set_version(v);
  return out;
}

void Workspace::set_version(std::uint64_t v) {
  std::lock_guard lock(mu_);
  version_ = v;
}

std::string Workspace::archive(std::uint64_t version) const {
  const CatalogSnapshot snap = snapshot();
  nlohmann::json rels = nlohmann::json::array();
  for (const auto& [name, rel] : *snap) {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : rel->columns()) cols.push_back({{"name", c.name()}, {"type", to_string(c.type())}});
    rels.push_back({{"name", name},
                    {"n_rows", rel->n_rows()},
                    {"source_digest", rel->source_digest()},
                    {"options", to_json(rel->options())},
                    {"columns", std::move(cols)}});
  }
  nlohmann::json manifest = {{"format", kFormat}, {"version", version}, {"relations", std::move(rels)}};
  const std::string manifest_text = canonical_dump(manifest);

  std::string out(kMagic, sizeof(kMagic));
  put_u32(out, kFormat);
  put_u64(out, manifest_text.size());
  out += manifest_text;
  for (const auto& [name, rel] : *snap) {
    for (const auto& c : rel->columns()) {
      const auto& text = c.raw_text();
      put_u64(out, text.bytes().size());
      out += text.bytes();
      put_u64(out, text.offsets().size());
      for (auto off : text.offsets()) put_u64(out, off);
    }
  }
  auto digest = sha256(out);
  out.append(reinterpret_cast<const char*>(digest.data()), digest.size());
  return out;
}

Workspace Workspace::restore(std::string_view archive) {
  if (archive.size() < sizeof(kMagic) + 4 + 8 + 32) throw Error(ErrorCode::CorruptWorkspace, "archive truncated");
  auto body = archive.substr(0, archive.size() - 32);
  auto stored = archive.substr(archive.size() - 32);
  auto digest = sha256(body);
  if (std::memcmp(digest.data(), stored.data(), 32) != 0) {
    throw Error(ErrorCode::CorruptWorkspace, "archive checksum mismatch");
  }
  Cursor cur(body);
  if (cur.take(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) {
    throw Error(ErrorCode::CorruptWorkspace, "not a workspace archive");
  }
  if (cur.u32() != kFormat) throw Error(ErrorCode::CorruptWorkspace, "unsupported archive format");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(cur.take(cur.u64()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptWorkspace, std::string("bad manifest: ") + e.what());
  }

  Workspace ws;
  try {
    ws.version_ = manifest.at("version").get<std::uint64_t>();
    for (const auto& r : manifest.at("relations")) {
      LoadOptions opts;
      try {
        opts = load_options_from_json(r.at("options"));
      } catch (const Error& e) {
        throw Error(ErrorCode::CorruptWorkspace, std::string("bad options in manifest: ") + e.what());
      }
      std::vector<Column> columns;
      for (const auto& c : r.at("columns")) {
        std::string bytes(cur.take(cur.u64()));
        const auto n_off = cur.u64();
        if (n_off > (body.size() / 8) + 1) throw Error(ErrorCode::CorruptWorkspace, "bad offset count");
        std::vector<std::uint64_t> offsets(n_off);
        for (auto& o : offsets) o = cur.u64();
        auto text = TextColumn::from_parts(std::move(bytes), std::move(offsets));
        auto type = c.at("type").get<std::string>() == "quantitative" ? ColumnType::Quantitative
                                                                       : ColumnType::Categorical;
        columns.push_back(Column::with_type(c.at("name").get<std::string>(), std::move(text), type, opts));
      }
      auto rel = std::make_shared<const Relation>(r.at("name").get<std::string>(), std::move(columns), opts,
                                                  r.at("source_digest").get<std::string>());
      if (rel->n_rows() != r.at("n_rows").get<std::size_t>()) {
        throw Error(ErrorCode::CorruptWorkspace, "row count mismatch for '" + rel->name() + "'");
      }
      ws.add(std::move(rel));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptWorkspace, std::string("bad manifest: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptWorkspace) throw;
    throw Error(ErrorCode::CorruptWorkspace, e.what());
  }
  if (!cur.at_end()) throw Error(ErrorCode::CorruptWorkspace, "trailing bytes in archive");
  return ws;
}

}  // namespace dqlens
