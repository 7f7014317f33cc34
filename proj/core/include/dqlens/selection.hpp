#pragma once

#include "dqlens/relation.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace dqlens {

using RowId = std::uint32_t;

enum class Provenance { All, Filter, Pick, Composed };
enum class SetOp { Intersect, Union, Subtract };

std::string_view to_string(Provenance p);
std::string_view to_string(SetOp op);
SetOp set_op_from_string(std::string_view s);

// Sorted, duplicate-free set of row ids of one loaded relation.
struct Selection {
  std::string relation;
  std::uint64_t relation_instance = 0;
  std::vector<RowId> rows;
  Provenance provenance = Provenance::All;

  static Selection all(const Relation& rel);
  // Sorts and deduplicates the given ids. Throws UnknownItem for ids out of range.
  static Selection of(const Relation& rel, std::vector<RowId> rows, Provenance provenance);

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }
  bool contains(RowId row) const;

  // {relation, count, provenance, rows_digest}
  nlohmann::json summary() const;
};

// Set algebra over two selections of the same relation instance. Throws
// RelationMismatch.
Selection compose(const Selection& a, const Selection& b, SetOp op);

}  // namespace dqlens
