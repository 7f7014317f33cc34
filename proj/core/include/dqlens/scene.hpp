#pragma once

#include "dqlens/color.hpp"
#include "dqlens/relation.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dqlens {

enum class Technique { ParallelCoordinates, HeatMap, ScatterMatrix, TablePlot, RadialGraph };
enum class Direction { Ascending, Descending };

std::string_view to_string(Technique t);
Technique technique_from_string(std::string_view s);

struct Ordering {
  std::string attr;
  Direction direction = Direction::Ascending;
  friend bool operator==(const Ordering&, const Ordering&) = default;
};

struct ValueWindow {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const ValueWindow&, const ValueWindow&) = default;
};

using ZoomWindows = std::map<std::string, ValueWindow, std::less<>>;

// Full parameterization of one visual scene.
struct SceneSpec {
  std::string relation;
  Technique technique = Technique::HeatMap;
  std::vector<std::string> target_attrs;
  std::vector<std::string> reference_attrs;
  std::optional<std::string> trellis_by;
  std::optional<Ordering> ordering;
  ZoomWindows zoom;
  int bins = 50;
  int row_bins = 100;
  bool compaction = false;
  double opacity = 1.0;
  ColorScaleSpec color;
  std::uint64_t seed = 0;

  // target_attrs followed by reference_attrs.
  std::vector<std::string> all_attrs() const;

  friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

// Checks the scene against the relation: attributes exist, technique arity
// and attribute kinds hold, parameters are in range, zoom windows lie inside
// attribute domains. Throws ArityError, UnknownAttribute, TypeMismatch,
// MissingOrdering, InvalidScene or ZoomOutOfDomain.
void validate_scene(const Relation& rel, const SceneSpec& spec);

// Replaces the zoom windows of the named attributes. Windows covering the
// whole attribute domain are dropped, so zooming to the full extent is the
// identity. Throws ZoomOutOfDomain for windows outside the domain, or
// InvalidScene for categorical attributes and lo > hi.
SceneSpec refine_zoom(const Relation& rel, SceneSpec spec, const ZoomWindows& window);
SceneSpec reset_zoom(SceneSpec spec);

nlohmann::json to_json(const SceneSpec& spec);
// Missing fields take their defaults. Throws InvalidScene on malformed input.
SceneSpec scene_from_json(const nlohmann::json& j);

}  // namespace dqlens
