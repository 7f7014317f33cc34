#pragma once

#include "dqlens/frame.hpp"
#include "dqlens/relation.hpp"
#include "dqlens/selection.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace dqlens {

// Matches rows whose categorical value equals any keyword.
struct KeywordSet {
  std::string attr;
  std::set<std::string> keywords;
  bool case_insensitive = false;
  friend bool operator==(const KeywordSet&, const KeywordSet&) = default;
};

// Matches rows whose quantitative value lies in the interval.
struct Range {
  std::string attr;
  double lo = 0.0;
  double hi = 0.0;
  bool lo_inclusive = true;
  bool hi_inclusive = true;
  friend bool operator==(const Range&, const Range&) = default;
};

using Predicate = std::variant<KeywordSet, Range>;

const std::string& predicate_attr(const Predicate& p);

// Conjunction of predicates, at most one per attribute. Empty means no
// filtering.
struct FilterSpec {
  std::vector<Predicate> predicates;
  friend bool operator==(const FilterSpec&, const FilterSpec&) = default;
};

// Throws InvalidFilter (duplicate attribute, lo > hi, empty keyword set),
// UnknownAttribute or TypeMismatch.
void validate_filter(const Relation& rel, const FilterSpec& spec);

// Rows satisfying every predicate; missing values never match.
Selection apply_filter(const Relation& rel, const FilterSpec& spec);

// Union of the member rows of the picked items. Throws StaleFrame when the
// frame's relation instance is no longer live, UnknownItem for ids not in the
// frame.
Selection select_by_items(const VisualFrame& frame, const std::vector<std::uint32_t>& item_ids,
                          const std::function<RelationPtr(std::uint64_t)>& live_relation);

nlohmann::json to_json(const FilterSpec& spec);
// Throws InvalidFilter on malformed input.
FilterSpec filter_from_json(const nlohmann::json& j);

}  // namespace dqlens
