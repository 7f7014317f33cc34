#include "dqlens/filter.hpp"

#include "dqlens/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

namespace dqlens {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

struct CompiledPredicate {
  // Categorical: accepted level codes. Quantitative: interval test.
  const Column* col = nullptr;
  std::vector<std::uint8_t> accept;
  const Range* range = nullptr;

  bool matches(std::size_t row) const {
    if (range) {
      const double v = col->value(row);
      if (std::isnan(v)) return false;
      const bool lo_ok = range->lo_inclusive ? v >= range->lo : v > range->lo;
      const bool hi_ok = range->hi_inclusive ? v <= range->hi : v < range->hi;
      return lo_ok && hi_ok;
    }
    const auto c = col->code(row);
    return c >= 0 && accept[c] != 0;
  }
};

}  // namespace

const std::string& predicate_attr(const Predicate& p) {
  return std::visit([](const auto& x) -> const std::string& { return x.attr; }, p);
}

void validate_filter(const Relation& rel, const FilterSpec& spec) {
  std::set<std::string_view> seen;
  for (const auto& p : spec.predicates) {
    const auto& attr = predicate_attr(p);
    if (!seen.insert(attr).second) {
      throw Error(ErrorCode::InvalidFilter, "more than one predicate on '" + attr + "'",
                  nlohmann::json{{"attribute", attr}});
    }
    const auto& col = rel.column(attr);
    if (const auto* k = std::get_if<KeywordSet>(&p)) {
      if (!col.categorical()) {
        throw Error(ErrorCode::TypeMismatch, "keyword predicate on quantitative attribute '" + attr + "'",
                    nlohmann::json{{"attribute", attr}});
      }
      if (k->keywords.empty()) throw Error(ErrorCode::InvalidFilter, "empty keyword set on '" + attr + "'");
    } else {
      const auto& r = std::get<Range>(p);
      if (!col.quantitative()) {
        throw Error(ErrorCode::TypeMismatch, "range predicate on categorical attribute '" + attr + "'",
                    nlohmann::json{{"attribute", attr}});
      }
      if (!(r.lo <= r.hi)) throw Error(ErrorCode::InvalidFilter, "range on '" + attr + "' has lo > hi");
    }
  }
}

Selection apply_filter(const Relation& rel, const FilterSpec& spec) {
  validate_filter(rel, spec);
  std::vector<CompiledPredicate> compiled;
  for (const auto& p : spec.predicates) {
    CompiledPredicate cp;
    cp.col = &rel.column(predicate_attr(p));
    if (const auto* k = std::get_if<KeywordSet>(&p)) {
      const auto& levels = cp.col->levels();
      cp.accept.assign(levels.size(), 0);
      if (k->case_insensitive) {
        std::set<std::string> wanted;
        for (const auto& w : k->keywords) wanted.insert(lower(w));
        for (std::size_t l = 0; l < levels.size(); ++l) cp.accept[l] = wanted.count(lower(levels[l])) ? 1 : 0;
      } else {
        for (const auto& w : k->keywords) {
          if (auto idx = cp.col->level_index(w)) cp.accept[*idx] = 1;
        }
      }
    } else {
      cp.range = &std::get<Range>(p);
    }
    compiled.push_back(std::move(cp));
  }
  Selection out;
  out.relation = rel.name();
  out.relation_instance = rel.instance_id();
  out.provenance = Provenance::Filter;
  const std::size_t n = rel.n_rows();
  for (std::size_t r = 0; r < n; ++r) {
    bool ok = true;
    for (const auto& cp : compiled) {
      if (!cp.matches(r)) {
        ok = false;
        break;
      }
    }
    if (ok) out.rows.push_back(static_cast<RowId>(r));
  }
  return out;
}

Selection select_by_items(const VisualFrame& frame, const std::vector<std::uint32_t>& item_ids,
                          const std::function<RelationPtr(std::uint64_t)>& live_relation) {
  auto rel = live_relation(frame.relation_instance);
  if (!rel) {
    throw Error(ErrorCode::StaleFrame, "frame was built from relation '" + frame.scene.relation +
                                           "' which is no longer loaded");
  }
  std::vector<RowId> rows;
  for (auto id : item_ids) {
    const Item* item = frame.find_item(id);
    if (!item) throw Error(ErrorCode::UnknownItem, "frame has no item " + std::to_string(id), nlohmann::json{{"item", id}});
    if (const auto* node = std::get_if<RadialNode>(&item->geometry)) {
      // A node stands for the rows of its incident links.
      for (const auto& panel : frame.panels) {
        if (panel.items.empty() || id < panel.items.front().id || id > panel.items.back().id) continue;
        for (const auto& other : panel.items) {
          if (const auto* link = std::get_if<RadialLink>(&other.geometry)) {
            if (link->src == node->node || link->dst == node->node) {
              rows.insert(rows.end(), other.rows.begin(), other.rows.end());
            }
          }
        }
      }
      continue;
    }
    rows.insert(rows.end(), item->rows.begin(), item->rows.end());
  }
  return Selection::of(*rel, std::move(rows), Provenance::Pick);
}

nlohmann::json to_json(const FilterSpec& spec) {
  nlohmann::json preds = nlohmann::json::array();
  for (const auto& p : spec.predicates) {
    if (const auto* k = std::get_if<KeywordSet>(&p)) {
      preds.push_back({{"attr", k->attr},
                       {"kind", "keywords"},
                       {"keywords", k->keywords},
                       {"case_insensitive", k->case_insensitive}});
    } else {
      const auto& r = std::get<Range>(p);
      preds.push_back({{"attr", r.attr},
                       {"kind", "range"},
                       {"lo", r.lo},
                       {"hi", r.hi},
                       {"lo_inclusive", r.lo_inclusive},
                       {"hi_inclusive", r.hi_inclusive}});
    }
  }
  return {{"predicates", std::move(preds)}};
}

FilterSpec filter_from_json(const nlohmann::json& j) {
  try {
    FilterSpec spec;
    if (j.is_null()) return spec;
    for (const auto& p : j.at("predicates")) {
      const auto kind = p.at("kind").get<std::string>();
      if (kind == "keywords") {
        KeywordSet k;
        k.attr = p.at("attr").get<std::string>();
        for (const auto& w : p.at("keywords")) k.keywords.insert(w.get<std::string>());
        k.case_insensitive = p.value("case_insensitive", false);
        spec.predicates.emplace_back(std::move(k));
      } else if (kind == "range") {
        Range r;
        r.attr = p.at("attr").get<std::string>();
        r.lo = p.at("lo").get<double>();
        r.hi = p.at("hi").get<double>();
        r.lo_inclusive = p.value("lo_inclusive", true);
        r.hi_inclusive = p.value("hi_inclusive", true);
        spec.predicates.emplace_back(std::move(r));
      } else {
        throw Error(ErrorCode::InvalidFilter, "unknown predicate kind '" + kind + "'");
      }
    }
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidFilter, std::string("malformed filter: ") + e.what());
  }
}

}  // namespace dqlens
