#pragma once

#include "dqlens/color.hpp"
#include "dqlens/relation.hpp"
#include "dqlens/scene.hpp"
#include "dqlens/selection.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace dqlens {

inline constexpr int kFrameSchemaVersion = 1;

struct FrameLimits {
  std::size_t item_budget = 50'000;
  // Row ids serialized per item; the full membership stays server side.
  std::size_t refs_per_item = 1'000;
  // Cap on row ids serialized across the whole frame.
  std::size_t refs_per_frame = 250'000;
};

struct Polyline {
  std::vector<double> positions;  // one normalized position per axis
};

struct HeatCell {
  int i = 0;  // display bin on the first axis; == axis bin count for the missing bucket
  int j = 0;
  bool missing = false;
  std::optional<double> aggregate;  // mean of the reference attribute
};

struct ScatterPoint {
  int pair = 0;
  double x = 0.0;
  double y = 0.0;
};

struct QuantSummary {
  std::optional<double> mean;  // empty when every value in the bin is missing
  double min = 0.0;
  double max = 0.0;
  std::uint64_t n_missing = 0;
  double size = 0.0;  // |mean| relative to the largest |mean| of the attribute
  HslColor color;
};

struct CatSummary {
  std::vector<double> fractions;  // per level, in the axis' level order
  double missing_fraction = 0.0;
};

struct TableBin {
  int bin = 0;
  std::uint64_t first_rank = 0;  // position of the bin's first row in the sorted panel
  std::vector<std::variant<QuantSummary, CatSummary>> summaries;  // one per displayed attribute
};

struct RadialNode {
  int node = 0;
  int axis = 0;  // 0 = source attribute, 1 = destination attribute
  std::string level;
  double angle = 0.0;
  double x = 0.0;
  double y = 0.0;
};

struct RadialLink {
  int src = 0;  // node index
  int dst = 0;
};

using ItemGeometry = std::variant<Polyline, HeatCell, ScatterPoint, TableBin, RadialNode, RadialLink>;

struct Item {
  std::uint32_t id = 0;
  std::uint64_t count = 0;
  HslColor color;
  double opacity = 1.0;
  // Every member row, sorted. Serialization truncates per FrameLimits.
  std::vector<RowId> rows;
  ItemGeometry geometry;
};

struct Panel {
  std::string label;
  bool missing = false;  // the panel of rows whose trellis value is missing
  std::uint64_t n_rows = 0;
  std::vector<Item> items;
};

struct Axis {
  std::string attr;
  ColumnType type = ColumnType::Categorical;
  // Quantitative: the binning/normalization domain (zoom window or the
  // relation-wide domain).
  double lo = 0.0;
  double hi = 0.0;
  bool degenerate = false;
  bool zoomed = false;
  int bins = 0;
  std::vector<double> ticks;
  // Categorical: levels in display order, with their position on the axis.
  std::vector<std::string> levels;
  std::vector<std::int32_t> level_codes;
  std::vector<HslColor> level_colors;
  std::uint64_t n_missing = 0;
};

struct FrameStats {
  std::uint64_t n_input_rows = 0;
  std::uint64_t n_items = 0;
  std::uint64_t n_missing = 0;
  std::uint64_t n_zoom_excluded = 0;
  double sampling_rate = 1.0;
  bool forced_compaction = false;
  int effective_bins = 0;
  bool empty_window = false;
  bool refs_truncated = false;
  // Row ids serialized per item.
  std::uint64_t ref_cap = 0;
};

struct VisualFrame {
  SceneSpec scene;
  std::uint64_t relation_instance = 0;
  nlohmann::json selection;  // Selection::summary() or null
  std::vector<Axis> axes;
  std::vector<std::pair<int, int>> pairs;  // ScatterMatrix axis pairs
  std::vector<Panel> panels;
  FrameStats stats;
  std::vector<std::string> warnings;

  // Null when no item has that id.
  const Item* find_item(std::uint32_t id) const;
};

// Bin index of v in [lo, hi] split into `bins` equal bins; the top edge
// belongs to the last bin, degenerate domains map to bin 0.
int bin_index(double v, double lo, double hi, int bins);
// Min-max normalization to [0, 1]; degenerate domains map to 0.5.
double normalize(double v, double lo, double hi);

// Stable order of indices by key; NaN keys go last in either direction.
std::vector<std::size_t> stable_order(std::span<const double> keys, Direction direction);

// Display order of a categorical attribute's levels (as level codes). With a
// quantitative ordering attribute, levels are sorted by that attribute's mean
// over `rows` (levels without a defined mean last); when ordering names the
// attribute itself, by frequency in `rows`; otherwise level order.
std::vector<std::int32_t> order_levels(const Relation& rel, std::span<const RowId> rows, const std::string& attr,
                                       const std::optional<Ordering>& ordering);

struct TrellisPanel {
  std::string label;
  bool missing = false;
  std::vector<RowId> rows;
};

// Partitions rows by the levels of a categorical attribute (level order, no
// empty panels, a trailing "missing" panel when needed); without trellis_by
// a single panel "all". Throws TypeMismatch.
std::vector<TrellisPanel> apply_trellis(const Relation& rel, std::span<const RowId> rows,
                                        const std::optional<std::string>& trellis_by);

// Frame preparation. `sel` may be null (all rows). Every function validates
// the scene and throws RelationMismatch when `sel` belongs to another
// relation instance.
VisualFrame prep_heatmap(const Relation& rel, const Selection* sel, const SceneSpec& spec,
                         const FrameLimits& limits = {});
VisualFrame prep_parallel_coordinates(const Relation& rel, const Selection* sel, const SceneSpec& spec,
                                      const FrameLimits& limits = {});
VisualFrame prep_scatter_matrix(const Relation& rel, const Selection* sel, const SceneSpec& spec,
                                const FrameLimits& limits = {});
VisualFrame prep_tableplot(const Relation& rel, const Selection* sel, const SceneSpec& spec,
                           const FrameLimits& limits = {});
VisualFrame prep_radial_graph(const Relation& rel, const Selection* sel, const SceneSpec& spec,
                              const FrameLimits& limits = {});
// Dispatches on spec.technique.
VisualFrame prep_frame(const Relation& rel, const Selection* sel, const SceneSpec& spec,
                       const FrameLimits& limits = {});

// Canonical JSON form (schema version kFrameSchemaVersion).
nlohmann::json to_json(const VisualFrame& frame);
std::string frame_json_text(const VisualFrame& frame);
// SHA-256 of frame_json_text.
std::string frame_digest(const VisualFrame& frame);

}  // namespace dqlens
