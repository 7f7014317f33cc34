#pragma once

#include "dqlens/relation.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace dqlens {

nlohmann::json to_json(const LoadOptions& o);
// Missing fields take their defaults. Throws InvalidOptions.
LoadOptions load_options_from_json(const nlohmann::json& j);

using Catalog = std::map<std::string, RelationPtr, std::less<>>;
using CatalogSnapshot = std::shared_ptr<const Catalog>;

// Named set of loaded relations. Mutations are serialized; readers take an
// immutable snapshot of the catalog and never block writers for long.
class Workspace {
 public:
  Workspace() : catalog_(std::make_shared<const Catalog>()) {}
  Workspace(Workspace&& other) noexcept;
  Workspace& operator=(Workspace&& other) noexcept;

  // Parses, types and registers a relation. Throws DuplicateName plus any
  // load error; the workspace is unchanged on failure.
  RelationPtr load(std::string_view source, const std::string& name, const LoadOptions& opts);
  // Registers an already-built relation (generated fixtures, archives).
  void add(RelationPtr rel);
  void discard(std::string_view name);

  RelationPtr get(std::string_view name) const;
  RelationPtr find(std::string_view name) const;
  // True when the given loaded instance is still registered.
  bool is_live(std::uint64_t instance_id) const;
  std::vector<std::string> list() const;
  bool empty() const { return snapshot()->empty(); }
  // Visualization techniques are unavailable until a relation is present.
  bool techniques_available() const { return !empty(); }

  std::uint64_t version() const;
  CatalogSnapshot snapshot() const;

  // Serializes the workspace; bumps the save counter first so the archive
  // records the new version.
  std::string save();
  // Serializes the workspace as save() would, recording the given version,
  // without touching the save counter.
  std::string archive(std::uint64_t version) const;
  void set_version(std::uint64_t v);
  // Throws CorruptWorkspace on a bad magic, version, checksum or layout.
  static Workspace restore(std::string_view archive);

 private:
  mutable std::mutex mu_;
  CatalogSnapshot catalog_;
  std::uint64_t version_ = 0;
};

}  // namespace dqlens
