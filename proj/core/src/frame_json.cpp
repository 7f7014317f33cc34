#include "dqlens/canonical_json.hpp"
#include "dqlens/frame.hpp"
#include "dqlens/hash.hpp"

namespace dqlens {
namespace {

using nlohmann::json;

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

struct GeometryJson {
  json& out;

  void operator()(const Polyline& g) const {
    out["kind"] = "polyline";
    out["positions"] = g.positions;
  }
  void operator()(const HeatCell& g) const {
    out["kind"] = "cell";
    out["i"] = g.i;
    out["j"] = g.j;
    out["missing"] = g.missing;
    out["aggregate"] = optional_number(g.aggregate);
  }
  void operator()(const ScatterPoint& g) const {
    out["kind"] = "point";
    out["pair"] = g.pair;
    out["x"] = g.x;
    out["y"] = g.y;
  }
  void operator()(const TableBin& g) const {
    out["kind"] = "row_bin";
    out["bin"] = g.bin;
    out["first_rank"] = g.first_rank;
    json summaries = json::array();
    for (const auto& s : g.summaries) {
      if (const auto* q = std::get_if<QuantSummary>(&s)) {
        summaries.push_back({{"type", "quantitative"},
                             {"mean", optional_number(q->mean)},
                             {"mean_defined", q->mean.has_value()},
                             {"min", q->mean ? json(q->min) : json(nullptr)},
                             {"max", q->mean ? json(q->max) : json(nullptr)},
                             {"n_missing", q->n_missing},
                             {"size", q->size},
                             {"color", to_json(q->color)}});
      } else {
        const auto& c = std::get<CatSummary>(s);
        summaries.push_back(
            {{"type", "categorical"}, {"fractions", c.fractions}, {"missing_fraction", c.missing_fraction}});
      }
    }
    out["summaries"] = std::move(summaries);
  }
  void operator()(const RadialNode& g) const {
    out["kind"] = "node";
    out["node"] = g.node;
    out["axis"] = g.axis;
    out["level"] = g.level;
    out["angle"] = g.angle;
    out["x"] = g.x;
    out["y"] = g.y;
  }
  void operator()(const RadialLink& g) const {
    out["kind"] = "link";
    out["src"] = g.src;
    out["dst"] = g.dst;
  }
};

json axis_json(const Axis& a) {
  json j = {{"attr", a.attr}, {"type", to_string(a.type)}, {"n_missing", a.n_missing}, {"bins", a.bins}};
  if (a.type == ColumnType::Quantitative) {
    j["lo"] = a.lo;
    j["hi"] = a.hi;
    j["degenerate"] = a.degenerate;
    j["zoomed"] = a.zoomed;
    j["ticks"] = a.ticks;
  } else {
    j["levels"] = a.levels;
    json colors = json::array();
    for (const auto& c : a.level_colors) colors.push_back(to_json(c));
    j["level_colors"] = std::move(colors);
  }
  return j;
}

}  // namespace

json to_json(const VisualFrame& frame) {
  const auto cap = frame.stats.ref_cap;
  json panels = json::array();
  for (const auto& p : frame.panels) {
    json items = json::array();
    for (const auto& item : p.items) {
      json j = {{"id", item.id}, {"count", item.count}, {"color", to_json(item.color)}, {"opacity", item.opacity}};
      const auto n = std::min<std::size_t>(item.rows.size(), cap);
      j["rows"] = std::vector<RowId>(item.rows.begin(), item.rows.begin() + static_cast<std::ptrdiff_t>(n));
      j["rows_overflow"] = item.rows.size() > cap;
      std::visit(GeometryJson{j}, item.geometry);
      items.push_back(std::move(j));
    }
    panels.push_back({{"label", p.label}, {"missing", p.missing}, {"n_rows", p.n_rows}, {"items", std::move(items)}});
  }
  json axes = json::array();
  for (const auto& a : frame.axes) axes.push_back(axis_json(a));
  json pairs = json::array();
  for (const auto& [a, b] : frame.pairs) pairs.push_back({a, b});
  const auto& s = frame.stats;
  return {
      {"schema_version", kFrameSchemaVersion},
      {"technique", to_string(frame.scene.technique)},
      {"relation", frame.scene.relation},
      {"scene", to_json(frame.scene)},
      {"selection", frame.selection},
      {"axes", std::move(axes)},
      {"pairs", std::move(pairs)},
      {"panels", std::move(panels)},
      {"stats",
       {{"n_input_rows", s.n_input_rows},
        {"n_items", s.n_items},
        {"n_missing", s.n_missing},
        {"n_zoom_excluded", s.n_zoom_excluded},
        {"sampling_rate", s.sampling_rate},
        {"forced_compaction", s.forced_compaction},
        {"effective_bins", s.effective_bins},
        {"empty_window", s.empty_window},
        {"refs_truncated", s.refs_truncated},
        {"ref_cap", s.ref_cap}}},
      {"warnings", frame.warnings},
  };
}

std::string frame_json_text(const VisualFrame& frame) { return canonical_dump(to_json(frame)); }

std::string frame_digest(const VisualFrame& frame) { return sha256_hex(frame_json_text(frame)); }

}  // namespace dqlens
