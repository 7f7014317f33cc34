#include "dqlens/scene.hpp"

#include "dqlens/error.hpp"

#include <cmath>
#include <set>

namespace dqlens {

std::string_view to_string(Technique t) {
  switch (t) {
    case Technique::ParallelCoordinates: return "ParallelCoordinates";
    case Technique::HeatMap: return "HeatMap";
    case Technique::ScatterMatrix: return "ScatterMatrix";
    case Technique::TablePlot: return "TablePlot";
    case Technique::RadialGraph: return "RadialGraph";
  }
  return "HeatMap";
}

Technique technique_from_string(std::string_view s) {
  if (s == "ParallelCoordinates") return Technique::ParallelCoordinates;
  if (s == "HeatMap") return Technique::HeatMap;
  if (s == "ScatterMatrix") return Technique::ScatterMatrix;
  if (s == "TablePlot") return Technique::TablePlot;
  if (s == "RadialGraph") return Technique::RadialGraph;
  throw Error(ErrorCode::InvalidScene, "unknown technique '" + std::string(s) + "'");
}

std::vector<std::string> SceneSpec::all_attrs() const {
  std::vector<std::string> out = target_attrs;
  out.insert(out.end(), reference_attrs.begin(), reference_attrs.end());
  return out;
}

namespace {

void arity(bool ok, const SceneSpec& spec, const std::string& what) {
  if (!ok) {
    throw Error(ErrorCode::ArityError, std::string(to_string(spec.technique)) + " " + what,
                nlohmann::json{{"technique", to_string(spec.technique)},
                               {"target_attrs", spec.target_attrs.size()},
                               {"reference_attrs", spec.reference_attrs.size()}});
  }
}

void require_kind(const Column& c, ColumnType kind, std::string_view role) {
  if (c.type() != kind) {
    throw Error(ErrorCode::TypeMismatch,
                std::string(role) + " '" + c.name() + "' must be " + std::string(to_string(kind)),
                nlohmann::json{{"attribute", c.name()}, {"expected", to_string(kind)}});
  }
}

}  // namespace

void validate_scene(const Relation& rel, const SceneSpec& spec) {
  if (spec.target_attrs.empty()) throw Error(ErrorCode::ArityError, "at least one target attribute is required");
  const auto attrs = spec.all_attrs();
  std::set<std::string_view> seen;
  for (const auto& a : attrs) {
    rel.column(a);
    if (!seen.insert(a).second) throw Error(ErrorCode::InvalidScene, "attribute '" + a + "' listed twice");
  }
  if (spec.bins < 1 || spec.bins > 10000) throw Error(ErrorCode::InvalidScene, "bins must lie in [1, 10000]");
  if (spec.row_bins < 1) throw Error(ErrorCode::InvalidScene, "row_bins must be at least 1");
  if (!(spec.opacity > 0.0 && spec.opacity <= 1.0)) throw Error(ErrorCode::InvalidScene, "opacity must lie in (0, 1]");
  spec.color.validate();

  switch (spec.technique) {
    case Technique::HeatMap:
      arity(spec.target_attrs.size() == 2, spec, "needs exactly 2 axis attributes");
      arity(spec.reference_attrs.size() <= 1, spec, "takes at most 1 reference attribute");
      for (const auto& r : spec.reference_attrs) require_kind(rel.column(r), ColumnType::Quantitative, "reference");
      break;
    case Technique::ParallelCoordinates:
      arity(attrs.size() >= 2, spec, "needs at least 2 attributes");
      break;
    case Technique::ScatterMatrix:
      arity(spec.target_attrs.size() >= 2, spec, "needs at least 2 quantitative attributes");
      arity(spec.reference_attrs.size() <= 1, spec, "takes at most 1 reference attribute");
      for (const auto& a : spec.target_attrs) require_kind(rel.column(a), ColumnType::Quantitative, "axis");
      break;
    case Technique::TablePlot:
      if (!spec.ordering) throw Error(ErrorCode::MissingOrdering, "TablePlot requires an ordering attribute");
      break;
    case Technique::RadialGraph:
      arity(spec.target_attrs.size() == 2 && spec.reference_attrs.empty(), spec,
            "needs exactly 2 categorical attributes");
      for (const auto& a : spec.target_attrs) require_kind(rel.column(a), ColumnType::Categorical, "node attribute");
      break;
  }
  if (spec.trellis_by) require_kind(rel.column(*spec.trellis_by), ColumnType::Categorical, "trellis attribute");
  if (spec.ordering) rel.column(spec.ordering->attr);

  for (const auto& [attr, w] : spec.zoom) {
    const auto& c = rel.column(attr);
    if (!c.quantitative()) throw Error(ErrorCode::InvalidScene, "zoom applies to quantitative attributes only");
    if (!(w.lo <= w.hi)) throw Error(ErrorCode::InvalidScene, "zoom window for '" + attr + "' has lo > hi");
    auto dom = c.domain();
    if (!dom || w.lo < dom->first || w.hi > dom->second) {
      throw Error(ErrorCode::ZoomOutOfDomain, "zoom window for '" + attr + "' exceeds its domain",
                  nlohmann::json{{"attribute", attr}});
    }
  }
}

SceneSpec refine_zoom(const Relation& rel, SceneSpec spec, const ZoomWindows& window) {
  for (const auto& [attr, w] : window) {
    const auto& c = rel.column(attr);
    if (!c.quantitative()) throw Error(ErrorCode::InvalidScene, "zoom applies to quantitative attributes only");
    if (!(w.lo <= w.hi)) throw Error(ErrorCode::InvalidScene, "zoom window for '" + attr + "' has lo > hi");
    auto dom = c.domain();
    if (!dom || w.lo < dom->first || w.hi > dom->second) {
      throw Error(ErrorCode::ZoomOutOfDomain, "zoom window for '" + attr + "' exceeds its domain",
                  nlohmann::json{{"attribute", attr}, {"domain", dom ? nlohmann::json{dom->first, dom->second}
                                                                     : nlohmann::json(nullptr)}});
    }
    if (w.lo == dom->first && w.hi == dom->second) {
      spec.zoom.erase(attr);
    } else {
      spec.zoom[attr] = w;
    }
  }
  return spec;
}

SceneSpec reset_zoom(SceneSpec spec) {
  spec.zoom.clear();
  return spec;
}

nlohmann::json to_json(const SceneSpec& spec) {
  nlohmann::json zoom = nlohmann::json::object();
  for (const auto& [attr, w] : spec.zoom) zoom[attr] = {w.lo, w.hi};
  nlohmann::json j = {
      {"relation", spec.relation},
      {"technique", to_string(spec.technique)},
      {"target_attrs", spec.target_attrs},
      {"reference_attrs", spec.reference_attrs},
      {"trellis_by", spec.trellis_by ? nlohmann::json(*spec.trellis_by) : nlohmann::json(nullptr)},
      {"ordering", spec.ordering ? nlohmann::json{{"attr", spec.ordering->attr},
                                                  {"direction", spec.ordering->direction == Direction::Ascending
                                                                    ? "asc"
                                                                    : "desc"}}
                                 : nlohmann::json(nullptr)},
      {"zoom", std::move(zoom)},
      {"bins", spec.bins},
      {"row_bins", spec.row_bins},
      {"compaction", spec.compaction},
      {"opacity", spec.opacity},
      {"color", {{"mode", spec.color.mode == ColorMode::Segmented ? "segmented" : "unsegmented"},
                 {"segments", spec.color.segments},
                 {"base_hue", spec.color.base_hue}}},
      {"seed", spec.seed},
  };
  return j;
}

SceneSpec scene_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object()) throw Error(ErrorCode::InvalidScene, "scene must be a JSON object");
    SceneSpec s;
    s.relation = j.at("relation").get<std::string>();
    s.technique = technique_from_string(j.at("technique").get<std::string>());
    s.target_attrs = j.value("target_attrs", std::vector<std::string>{});
    s.reference_attrs = j.value("reference_attrs", std::vector<std::string>{});
    if (j.contains("trellis_by") && !j["trellis_by"].is_null()) s.trellis_by = j["trellis_by"].get<std::string>();
    if (j.contains("ordering") && !j["ordering"].is_null()) {
      const auto& o = j["ordering"];
      Ordering ord;
      ord.attr = o.at("attr").get<std::string>();
      auto dir = o.value("direction", std::string("asc"));
      if (dir == "asc") {
        ord.direction = Direction::Ascending;
      } else if (dir == "desc") {
        ord.direction = Direction::Descending;
      } else {
        throw Error(ErrorCode::InvalidScene, "ordering direction must be asc or desc");
      }
      s.ordering = ord;
    }
    if (j.contains("zoom") && !j["zoom"].is_null()) {
      for (auto it = j["zoom"].begin(); it != j["zoom"].end(); ++it) {
        const auto& w = it.value();
        if (!w.is_array() || w.size() != 2) throw Error(ErrorCode::InvalidScene, "zoom window must be [lo, hi]");
        s.zoom[it.key()] = ValueWindow{w[0].get<double>(), w[1].get<double>()};
      }
    }
    s.bins = j.value("bins", 50);
    s.row_bins = j.value("row_bins", 100);
    s.compaction = j.value("compaction", false);
    s.opacity = j.value("opacity", 1.0);
    if (j.contains("color") && !j["color"].is_null()) {
      const auto& c = j["color"];
      auto mode = c.value("mode", std::string("unsegmented"));
      if (mode == "segmented") {
        s.color.mode = ColorMode::Segmented;
      } else if (mode == "unsegmented") {
        s.color.mode = ColorMode::Unsegmented;
      } else {
        throw Error(ErrorCode::InvalidScene, "color mode must be segmented or unsegmented");
      }
      s.color.segments = c.value("segments", 7);
      s.color.base_hue = c.value("base_hue", 210.0);
    }
    s.seed = j.value("seed", std::uint64_t{0});
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidScene, std::string("malformed scene: ") + e.what());
  }
}

}  // namespace dqlens
