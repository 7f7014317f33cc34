#include "dqlens/selection.hpp"

#include "dqlens/error.hpp"
#include "dqlens/hash.hpp"

#include <algorithm>
#include <iterator>

namespace dqlens {

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::All: return "all";
    case Provenance::Filter: return "filter";
    case Provenance::Pick: return "pick";
    case Provenance::Composed: return "composed";
  }
  return "all";
}

std::string_view to_string(SetOp op) {
  switch (op) {
    case SetOp::Intersect: return "intersect";
    case SetOp::Union: return "union";
    case SetOp::Subtract: return "subtract";
  }
  return "intersect";
}

SetOp set_op_from_string(std::string_view s) {
  if (s == "intersect") return SetOp::Intersect;
  if (s == "union") return SetOp::Union;
  if (s == "subtract") return SetOp::Subtract;
  throw Error(ErrorCode::BadRequest, "unknown set operation '" + std::string(s) + "'");
}

Selection Selection::all(const Relation& rel) {
  Selection s;
  s.relation = rel.name();
  s.relation_instance = rel.instance_id();
  s.rows.resize(rel.n_rows());
  for (std::size_t i = 0; i < s.rows.size(); ++i) s.rows[i] = static_cast<RowId>(i);
  s.provenance = Provenance::All;
  return s;
}

Selection Selection::of(const Relation& rel, std::vector<RowId> rows, Provenance provenance) {
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  if (!rows.empty() && rows.back() >= rel.n_rows()) {
    throw Error(ErrorCode::UnknownItem, "row id " + std::to_string(rows.back()) + " out of range");
  }
  Selection s;
  s.relation = rel.name();
  s.relation_instance = rel.instance_id();
  s.rows = std::move(rows);
  s.provenance = provenance;
  return s;
}

bool Selection::contains(RowId row) const { return std::binary_search(rows.begin(), rows.end(), row); }

nlohmann::json Selection::summary() const {
  std::string bytes;
  bytes.reserve(rows.size() * 4);
  for (auto r : rows) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((r >> (8 * i)) & 0xff));
  }
  return {{"relation", relation},
          {"count", rows.size()},
          {"provenance", to_string(provenance)},
          {"rows_digest", sha256_hex(bytes)}};
}

Selection compose(const Selection& a, const Selection& b, SetOp op) {
  if (a.relation != b.relation || a.relation_instance != b.relation_instance) {
    throw Error(ErrorCode::RelationMismatch,
                "cannot compose selections of '" + a.relation + "' and '" + b.relation + "'");
  }
  Selection out;
  out.relation = a.relation;
  out.relation_instance = a.relation_instance;
  out.provenance = Provenance::Composed;
  auto sink = std::back_inserter(out.rows);
  switch (op) {
    case SetOp::Intersect:
      std::set_intersection(a.rows.begin(), a.rows.end(), b.rows.begin(), b.rows.end(), sink);
      break;
    case SetOp::Union:
      std::set_union(a.rows.begin(), a.rows.end(), b.rows.begin(), b.rows.end(), sink);
      break;
    case SetOp::Subtract:
      std::set_difference(a.rows.begin(), a.rows.end(), b.rows.begin(), b.rows.end(), sink);
      break;
  }
  return out;
}

}  // namespace dqlens
