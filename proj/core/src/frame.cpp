#include "dqlens/frame.hpp"

#include "dqlens/error.hpp"
#include "dqlens/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <unordered_map>

namespace dqlens {

int bin_index(double v, double lo, double hi, int bins) {
  if (!(hi > lo) || bins <= 1) return 0;
  const double t = std::floor((v - lo) / (hi - lo) * bins);
  if (t < 0.0) return 0;
  if (t >= bins) return bins - 1;
  return static_cast<int>(t);
}

double normalize(double v, double lo, double hi) {
  if (!(hi > lo)) return 0.5;
  return std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
}

std::vector<std::size_t> stable_order(std::span<const double> keys, Direction direction) {
  std::vector<std::size_t> idx(keys.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const bool asc = direction == Direction::Ascending;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const double ka = keys[a];
    const double kb = keys[b];
    if (std::isnan(ka)) return false;
    if (std::isnan(kb)) return true;
    return asc ? ka < kb : ka > kb;
  });
  return idx;
}

std::vector<std::int32_t> order_levels(const Relation& rel, std::span<const RowId> rows, const std::string& attr,
                                       const std::optional<Ordering>& ordering) {
  const auto& col = rel.column(attr);
  if (!col.categorical()) {
    throw Error(ErrorCode::TypeMismatch, "attribute '" + attr + "' is not categorical");
  }
  const std::size_t n_levels = col.levels().size();
  std::vector<std::int32_t> natural(n_levels);
  for (std::size_t i = 0; i < n_levels; ++i) natural[i] = static_cast<std::int32_t>(i);
  if (!ordering) return natural;

  std::vector<double> keys(n_levels, std::numeric_limits<double>::quiet_NaN());
  const auto codes = col.codes();
  if (ordering->attr == attr) {
    std::vector<double> freq(n_levels, 0.0);
    for (auto r : rows) {
      if (codes[r] >= 0) freq[codes[r]] += 1.0;
    }
    keys = std::move(freq);
  } else {
    const auto& key_col = rel.column(ordering->attr);
    if (!key_col.quantitative()) return natural;
    const auto values = key_col.values();
    std::vector<double> sum(n_levels, 0.0);
    std::vector<std::uint64_t> cnt(n_levels, 0);
    for (auto r : rows) {
      if (codes[r] < 0 || std::isnan(values[r])) continue;
      sum[codes[r]] += values[r];
      ++cnt[codes[r]];
    }
    for (std::size_t l = 0; l < n_levels; ++l) {
      if (cnt[l] > 0) keys[l] = sum[l] / static_cast<double>(cnt[l]);
    }
  }
  auto order = stable_order(keys, ordering->direction);
  std::vector<std::int32_t> out(n_levels);
  for (std::size_t i = 0; i < n_levels; ++i) out[i] = static_cast<std::int32_t>(order[i]);
  return out;
}

std::vector<TrellisPanel> apply_trellis(const Relation& rel, std::span<const RowId> rows,
                                        const std::optional<std::string>& trellis_by) {
  std::vector<TrellisPanel> out;
  if (!trellis_by) {
    out.push_back(TrellisPanel{"all", false, std::vector<RowId>(rows.begin(), rows.end())});
    return out;
  }
  const auto& col = rel.column(*trellis_by);
  if (!col.categorical()) {
    throw Error(ErrorCode::TypeMismatch, "trellis attribute '" + *trellis_by + "' must be categorical");
  }
  const auto codes = col.codes();
  std::vector<std::vector<RowId>> by_level(col.levels().size());
  std::vector<RowId> missing;
  for (auto r : rows) {
    if (codes[r] < 0) {
      missing.push_back(r);
    } else {
      by_level[codes[r]].push_back(r);
    }
  }
  for (std::size_t l = 0; l < by_level.size(); ++l) {
    if (by_level[l].empty()) continue;
    out.push_back(TrellisPanel{col.levels()[l], false, std::move(by_level[l])});
  }
  if (!missing.empty()) out.push_back(TrellisPanel{"missing", true, std::move(missing)});
  return out;
}

const Item* VisualFrame::find_item(std::uint32_t id) const {
  for (const auto& p : panels) {
    if (p.items.empty() || id < p.items.front().id || id > p.items.back().id) continue;
    return &p.items[id - p.items.front().id];
  }
  return nullptr;
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Prep {
  const Relation& rel;
  const SceneSpec& spec;
  const FrameLimits& limits;
  std::vector<RowId> rows;  // selection rows inside the zoom window
  VisualFrame frame;
};

Prep begin(const Relation& rel, const Selection* sel, const SceneSpec& spec, const FrameLimits& limits) {
  if (!spec.relation.empty() && spec.relation != rel.name()) {
    throw Error(ErrorCode::RelationMismatch,
                "scene targets '" + spec.relation + "' but relation is '" + rel.name() + "'");
  }
  validate_scene(rel, spec);
  if (sel && (sel->relation != rel.name() || sel->relation_instance != rel.instance_id())) {
    throw Error(ErrorCode::RelationMismatch, "selection belongs to another relation");
  }
  Prep p{rel, spec, limits, {}, {}};
  p.frame.scene = spec;
  p.frame.scene.relation = rel.name();
  p.frame.relation_instance = rel.instance_id();
  p.frame.selection = sel ? sel->summary() : nlohmann::json(nullptr);

  std::vector<std::pair<std::span<const double>, ValueWindow>> windows;
  for (const auto& [attr, w] : spec.zoom) windows.emplace_back(rel.column(attr).values(), w);
  auto in_window = [&](RowId r) {
    for (const auto& [vals, w] : windows) {
      const double v = vals[r];
      if (!(v >= w.lo && v <= w.hi)) return false;
    }
    return true;
  };
  std::size_t base = 0;
  if (sel) {
    base = sel->rows.size();
    p.rows.reserve(base);
    for (auto r : sel->rows) {
      if (in_window(r)) p.rows.push_back(r);
    }
  } else {
    base = rel.n_rows();
    p.rows.reserve(base);
    for (std::size_t r = 0; r < base; ++r) {
      if (in_window(static_cast<RowId>(r))) p.rows.push_back(static_cast<RowId>(r));
    }
  }
  p.frame.stats.n_input_rows = p.rows.size();
  p.frame.stats.n_zoom_excluded = base - p.rows.size();
  if (!spec.zoom.empty() && p.rows.empty() && base > 0) {
    p.frame.stats.empty_window = true;
    p.frame.warnings.push_back("empty_window");
  }
  return p;
}

// Per-axis lookup from a row to its bin (quantitative) or display rank
// (categorical); -1 for missing values.
struct AxisMap {
  const Column* col = nullptr;
  Axis axis;
  std::vector<int> rank_of_code;

  int slots() const { return axis.type == ColumnType::Quantitative ? axis.bins : static_cast<int>(axis.levels.size()); }

  bool missing(RowId r) const { return col->is_missing(r); }

  int slot(RowId r) const {
    if (axis.type == ColumnType::Quantitative) {
      const double v = col->value(r);
      if (std::isnan(v)) return -1;
      return bin_index(v, axis.lo, axis.hi, axis.bins);
    }
    const auto c = col->code(r);
    return c < 0 ? -1 : rank_of_code[c];
  }

  // Normalized position of a slot on the axis.
  double slot_position(int s) const {
    if (axis.type == ColumnType::Quantitative) {
      if (axis.degenerate) return 0.5;
      return (s + 0.5) / axis.bins;
    }
    const auto n = axis.levels.size();
    return n <= 1 ? 0.5 : static_cast<double>(s) / static_cast<double>(n - 1);
  }

  // Exact normalized position of a row's value.
  double position(RowId r) const {
    if (axis.type == ColumnType::Quantitative) return normalize(col->value(r), axis.lo, axis.hi);
    return slot_position(rank_of_code[col->code(r)]);
  }
};

AxisMap make_axis(const Prep& p, const std::string& attr, int bins, bool apply_ordering = true) {
  AxisMap m;
  m.col = &p.rel.column(attr);
  m.axis.attr = attr;
  m.axis.type = m.col->type();
  if (m.col->quantitative()) {
    if (auto it = p.spec.zoom.find(attr); it != p.spec.zoom.end()) {
      m.axis.lo = it->second.lo;
      m.axis.hi = it->second.hi;
      m.axis.zoomed = true;
    } else if (auto dom = m.col->domain()) {
      m.axis.lo = dom->first;
      m.axis.hi = dom->second;
    }
    m.axis.degenerate = !(m.axis.hi > m.axis.lo);
    m.axis.bins = bins;
    if (m.axis.degenerate) {
      m.axis.ticks = {m.axis.lo};
    } else {
      for (int k = 0; k <= 4; ++k) m.axis.ticks.push_back(m.axis.lo + (m.axis.hi - m.axis.lo) * k / 4.0);
    }
  } else {
    m.axis.level_codes = order_levels(p.rel, p.rows, attr, apply_ordering ? p.spec.ordering : std::nullopt);
    m.rank_of_code.assign(m.col->levels().size(), 0);
    for (std::size_t rank = 0; rank < m.axis.level_codes.size(); ++rank) {
      m.rank_of_code[m.axis.level_codes[rank]] = static_cast<int>(rank);
      m.axis.levels.push_back(m.col->levels()[m.axis.level_codes[rank]]);
    }
    m.axis.bins = static_cast<int>(m.axis.levels.size());
    const int n = static_cast<int>(m.axis.levels.size());
    const int k = std::max(2, n);
    for (int rank = 0; rank < n; ++rank) {
      m.axis.level_colors.push_back(color_segmented(rank, 0.0, std::max(1, n - 1), k).color);
    }
  }
  for (auto r : p.rows) {
    if (m.col->is_missing(r)) ++m.axis.n_missing;
  }
  return m;
}

void finish(Prep& p) {
  std::uint32_t next = 0;
  std::size_t with_rows = 0;
  for (auto& panel : p.frame.panels) {
    for (auto& item : panel.items) {
      item.id = next++;
      if (!item.rows.empty()) ++with_rows;
    }
  }
  p.frame.stats.n_items = next;
  const std::size_t per_frame = with_rows == 0 ? p.limits.refs_per_item : p.limits.refs_per_frame / with_rows;
  p.frame.stats.ref_cap = std::max<std::size_t>(1, std::min(p.limits.refs_per_item, per_frame));
  for (const auto& panel : p.frame.panels) {
    for (const auto& item : panel.items) {
      if (item.rows.size() > p.frame.stats.ref_cap) p.frame.stats.refs_truncated = true;
    }
  }
}

// Keys for ordering rows: quantitative values or categorical display ranks.
std::vector<double> row_keys(const Prep& p, std::span<const RowId> rows, const Ordering& ord) {
  const auto& col = p.rel.column(ord.attr);
  std::vector<double> keys(rows.size());
  if (col.quantitative()) {
    for (std::size_t i = 0; i < rows.size(); ++i) keys[i] = col.value(rows[i]);
  } else {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto c = col.code(rows[i]);
      keys[i] = c < 0 ? std::numeric_limits<double>::quiet_NaN() : static_cast<double>(c);
    }
  }
  return keys;
}

std::vector<RowId> ordered_rows(const Prep& p, std::vector<RowId> rows) {
  if (!p.spec.ordering) return rows;
  auto keys = row_keys(p, rows, *p.spec.ordering);
  auto order = stable_order(keys, p.spec.ordering->direction);
  std::vector<RowId> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = rows[order[i]];
  return out;
}

int count_segments(const SceneSpec& spec) {
  return spec.color.mode == ColorMode::Segmented ? spec.color.segments : 7;
}

}  // namespace

VisualFrame prep_heatmap(const Relation& rel, const Selection* sel, const SceneSpec& spec, const FrameLimits& limits) {
  if (spec.technique != Technique::HeatMap) throw Error(ErrorCode::InvalidScene, "scene is not a HeatMap");
  Prep p = begin(rel, sel, spec, limits);
  auto ax0 = make_axis(p, spec.target_attrs[0], spec.bins);
  auto ax1 = make_axis(p, spec.target_attrs[1], spec.bins);
  const Column* ref = spec.reference_attrs.empty() ? nullptr : &rel.column(spec.reference_attrs[0]);
  const int n0 = ax0.slots();
  const int n1 = ax1.slots();
  const std::int64_t width = n1 + 1;
  const std::int64_t n_cells = static_cast<std::int64_t>(n0 + 1) * width;

  struct Cell {
    std::int64_t key;
    std::vector<RowId> rows;
    double ref_sum = 0.0;
    std::uint64_t ref_count = 0;
  };
  struct PanelCells {
    std::vector<Cell> cells;
  };

  auto panels = apply_trellis(rel, p.rows, spec.trellis_by);
  std::vector<PanelCells> built(panels.size());
  const bool dense = n_cells <= (1 << 22);
  for (std::size_t pi = 0; pi < panels.size(); ++pi) {
    std::vector<std::int32_t> dense_index;
    std::unordered_map<std::int64_t, std::int32_t> sparse_index;
    if (dense) dense_index.assign(static_cast<std::size_t>(n_cells), -1);
    auto& cells = built[pi].cells;
    for (auto r : panels[pi].rows) {
      int i = ax0.slot(r);
      int j = ax1.slot(r);
      if (i < 0) i = n0;
      if (j < 0) j = n1;
      const std::int64_t key = static_cast<std::int64_t>(i) * width + j;
      std::int32_t idx;
      if (dense) {
        idx = dense_index[key];
        if (idx < 0) {
          idx = dense_index[key] = static_cast<std::int32_t>(cells.size());
          cells.push_back(Cell{key, {}});
        }
      } else {
        auto [it, inserted] = sparse_index.try_emplace(key, static_cast<std::int32_t>(cells.size()));
        if (inserted) cells.push_back(Cell{key, {}});
        idx = it->second;
      }
      auto& cell = cells[idx];
      cell.rows.push_back(r);
      if (ref) {
        const double v = ref->value(r);
        if (!std::isnan(v)) {
          cell.ref_sum += v;
          ++cell.ref_count;
        }
      }
    }
    std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) { return a.key < b.key; });
  }

  // Color domain across all panels, over non-missing cells.
  double vmin = std::numeric_limits<double>::infinity();
  double vmax = -vmin;
  auto cell_value = [&](const Cell& c) -> std::optional<double> {
    if (ref) {
      if (c.ref_count == 0) return std::nullopt;
      return c.ref_sum / static_cast<double>(c.ref_count);
    }
    return static_cast<double>(c.rows.size());
  };
  for (const auto& pc : built) {
    for (const auto& c : pc.cells) {
      const int i = static_cast<int>(c.key / width);
      const int j = static_cast<int>(c.key % width);
      if (i == n0 || j == n1) continue;
      if (auto v = cell_value(c)) {
        vmin = std::min(vmin, *v);
        vmax = std::max(vmax, *v);
      }
    }
  }

  for (std::size_t pi = 0; pi < panels.size(); ++pi) {
    Panel panel;
    panel.label = panels[pi].label;
    panel.missing = panels[pi].missing;
    panel.n_rows = panels[pi].rows.size();
    for (auto& c : built[pi].cells) {
      Item item;
      HeatCell g;
      g.i = static_cast<int>(c.key / width);
      g.j = static_cast<int>(c.key % width);
      g.missing = g.i == n0 || g.j == n1;
      if (ref && c.ref_count > 0) g.aggregate = c.ref_sum / static_cast<double>(c.ref_count);
      item.count = c.rows.size();
      if (g.missing) {
        p.frame.stats.n_missing += item.count;
        item.color = kNeutralColor;
      } else if (auto v = cell_value(c)) {
        item.color = color_for(*v, vmin, vmax, spec.color).color;
      } else {
        item.color = kNeutralColor;
      }
      item.opacity = spec.opacity;
      item.rows = std::move(c.rows);
      item.geometry = g;
      panel.items.push_back(std::move(item));
    }
    p.frame.panels.push_back(std::move(panel));
  }
  p.frame.axes = {std::move(ax0.axis), std::move(ax1.axis)};
  p.frame.stats.effective_bins = spec.bins;
  finish(p);
  return std::move(p.frame);
}

VisualFrame prep_parallel_coordinates(const Relation& rel, const Selection* sel, const SceneSpec& spec,
                                      const FrameLimits& limits) {
  if (spec.technique != Technique::ParallelCoordinates) {
    throw Error(ErrorCode::InvalidScene, "scene is not ParallelCoordinates");
  }
  Prep p = begin(rel, sel, spec, limits);
  const auto attrs = spec.all_attrs();
  std::vector<AxisMap> axes;
  for (const auto& a : attrs) axes.push_back(make_axis(p, a, spec.bins));

  std::vector<RowId> complete;
  complete.reserve(p.rows.size());
  for (auto r : p.rows) {
    bool ok = true;
    for (const auto& ax : axes) {
      if (ax.missing(r)) {
        ok = false;
        break;
      }
    }
    if (ok) complete.push_back(r);
  }
  p.frame.stats.n_missing = p.rows.size() - complete.size();

  bool compact = spec.compaction;
  if (!compact && complete.size() > limits.item_budget) {
    compact = true;
    p.frame.stats.forced_compaction = true;
    p.frame.warnings.push_back("forced_compaction");
  }
  auto panels = apply_trellis(rel, complete, spec.trellis_by);

  if (!compact) {
    for (auto& tp : panels) {
      Panel panel;
      panel.label = tp.label;
      panel.missing = tp.missing;
      panel.n_rows = tp.rows.size();
      for (auto r : ordered_rows(p, std::move(tp.rows))) {
        Item item;
        Polyline g;
        for (const auto& ax : axes) g.positions.push_back(ax.position(r));
        item.count = 1;
        item.color = color_for(g.positions.front(), 0.0, 1.0, spec.color).color;
        item.opacity = spec.opacity;
        item.rows = {r};
        item.geometry = std::move(g);
        panel.items.push_back(std::move(item));
      }
      p.frame.panels.push_back(std::move(panel));
    }
    p.frame.stats.effective_bins = spec.bins;
    for (auto& ax : axes) p.frame.axes.push_back(std::move(ax.axis));
    finish(p);
    return std::move(p.frame);
  }

  // Frequency compaction: one polyline per distinct per-axis bin signature.
  // Quantitative bins are halved until the group count fits the budget.
  using Signature = std::vector<int>;
  struct Group {
    Signature sig;
    std::vector<RowId> rows;
  };
  std::vector<std::vector<Group>> grouped;
  int bins = spec.bins;
  const bool has_quant = std::any_of(axes.begin(), axes.end(),
                                     [](const AxisMap& a) { return a.axis.type == ColumnType::Quantitative; });
  for (;;) {
    for (auto& ax : axes) {
      if (ax.axis.type == ColumnType::Quantitative) ax.axis.bins = bins;
    }
    // Mixed-radix key when it fits in 63 bits, so key order is signature order.
    bool packed = true;
    std::vector<std::uint64_t> radix;
    {
      unsigned __int128 prod = 1;
      for (const auto& ax : axes) {
        const auto slots = static_cast<std::uint64_t>(std::max(1, ax.slots()));
        radix.push_back(slots);
        prod *= slots;
        if (prod > (static_cast<unsigned __int128>(1) << 63)) packed = false;
      }
    }
    grouped.assign(panels.size(), {});
    std::size_t total = 0;
    for (std::size_t pi = 0; pi < panels.size(); ++pi) {
      auto& groups = grouped[pi];
      if (packed) {
        std::unordered_map<std::uint64_t, std::size_t> index;
        std::vector<std::uint64_t> keys;
        for (auto r : panels[pi].rows) {
          std::uint64_t key = 0;
          for (std::size_t a = 0; a < axes.size(); ++a) key = key * radix[a] + static_cast<std::uint64_t>(axes[a].slot(r));
          auto [it, inserted] = index.try_emplace(key, groups.size());
          if (inserted) {
            Signature sig(axes.size());
            for (std::size_t a = 0; a < axes.size(); ++a) sig[a] = axes[a].slot(r);
            groups.push_back(Group{std::move(sig), {}});
            keys.push_back(key);
          }
          groups[it->second].rows.push_back(r);
        }
        std::vector<std::size_t> order(groups.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return keys[a] < keys[b]; });
        std::vector<Group> sorted;
        sorted.reserve(groups.size());
        for (auto i : order) sorted.push_back(std::move(groups[i]));
        groups = std::move(sorted);
      } else {
        std::map<Signature, std::vector<RowId>> index;
        Signature sig(axes.size());
        for (auto r : panels[pi].rows) {
          for (std::size_t a = 0; a < axes.size(); ++a) sig[a] = axes[a].slot(r);
          index[sig].push_back(r);
        }
        for (auto& [s, rows] : index) groups.push_back(Group{s, std::move(rows)});
      }
      total += groups.size();
    }
    if (total <= limits.item_budget || !has_quant || bins == 1) break;
    bins = std::max(1, bins / 2);
  }
  p.frame.stats.effective_bins = bins;
  if (bins != spec.bins) p.frame.warnings.push_back("coarsened_bins");

  double cmin = std::numeric_limits<double>::infinity();
  double cmax = -cmin;
  for (const auto& groups : grouped) {
    for (const auto& g : groups) {
      cmin = std::min(cmin, static_cast<double>(g.rows.size()));
      cmax = std::max(cmax, static_cast<double>(g.rows.size()));
    }
  }
  const int k = count_segments(spec);
  for (std::size_t pi = 0; pi < panels.size(); ++pi) {
    Panel panel;
    panel.label = panels[pi].label;
    panel.missing = panels[pi].missing;
    panel.n_rows = panels[pi].rows.size();
    for (auto& g : grouped[pi]) {
      Item item;
      Polyline line;
      for (std::size_t a = 0; a < axes.size(); ++a) line.positions.push_back(axes[a].slot_position(g.sig[a]));
      item.count = g.rows.size();
      item.color = color_segmented(static_cast<double>(item.count), cmin, cmax, k).color;
      item.opacity = spec.opacity;
      item.rows = std::move(g.rows);
      item.geometry = std::move(line);
      panel.items.push_back(std::move(item));
    }
    p.frame.panels.push_back(std::move(panel));
  }
  for (auto& ax : axes) p.frame.axes.push_back(std::move(ax.axis));
  finish(p);
  return std::move(p.frame);
}

namespace {

// Keeps `quota` of `rows`, thinning dense regions of the (x, y) grid first:
// each occupied cell keeps min(count, level) rows, with the level chosen so
// the total meets the quota. Sparse cells (outliers) survive intact.
std::vector<RowId> density_sample(const std::vector<RowId>& rows, const AxisMap& x, const AxisMap& y, int bins,
                                  std::size_t quota, std::uint64_t seed) {
  std::map<std::int64_t, std::vector<RowId>> cells;
  for (auto r : rows) {
    const int i = bin_index(x.col->value(r), x.axis.lo, x.axis.hi, bins);
    const int j = bin_index(y.col->value(r), y.axis.lo, y.axis.hi, bins);
    cells[static_cast<std::int64_t>(i) * bins + j].push_back(r);
  }
  std::vector<std::size_t> counts;
  for (const auto& [_, v] : cells) counts.push_back(v.size());
  std::vector<std::size_t> sorted = counts;
  std::sort(sorted.begin(), sorted.end());
  // Largest level with sum(min(c, level)) <= quota.
  std::size_t level = 0;
  std::size_t used = 0;
  {
    std::size_t below = 0;  // sum of counts already fully kept
    std::size_t remaining = sorted.size();
    for (std::size_t idx = 0; idx < sorted.size(); ++idx) {
      const std::size_t c = sorted[idx];
      if (below + c * remaining <= quota) {
        below += c;
        --remaining;
        level = c;
        continue;
      }
      level = remaining == 0 ? level : (quota - below) / remaining;
      break;
    }
    for (auto c : counts) used += std::min(c, level);
  }
  std::size_t extra = quota - used;

  Rng rng(seed);
  std::vector<RowId> out;
  out.reserve(quota);
  for (auto& [_, members] : cells) {
    std::size_t take = std::min(members.size(), level);
    if (members.size() > level && extra > 0) {
      ++take;
      --extra;
    }
    if (take == members.size()) {
      out.insert(out.end(), members.begin(), members.end());
      continue;
    }
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t jdx = i + rng.below(members.size() - i);
      std::swap(members[i], members[jdx]);
      out.push_back(members[i]);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

VisualFrame prep_scatter_matrix(const Relation& rel, const Selection* sel, const SceneSpec& spec,
                                const FrameLimits& limits) {
  if (spec.technique != Technique::ScatterMatrix) throw Error(ErrorCode::InvalidScene, "scene is not a ScatterMatrix");
  Prep p = begin(rel, sel, spec, limits);
  std::vector<AxisMap> axes;
  for (const auto& a : spec.target_attrs) axes.push_back(make_axis(p, a, spec.bins));
  const Column* ref = spec.reference_attrs.empty() ? nullptr : &rel.column(spec.reference_attrs[0]);
  std::optional<AxisMap> ref_axis;
  if (ref) ref_axis = make_axis(p, spec.reference_attrs[0], spec.bins);

  for (int a = 0; a < static_cast<int>(axes.size()); ++a) {
    for (int b = a + 1; b < static_cast<int>(axes.size()); ++b) p.frame.pairs.emplace_back(a, b);
  }
  const std::size_t n_pairs = p.frame.pairs.size();

  std::vector<RowId> complete;
  for (auto r : p.rows) {
    bool ok = true;
    for (const auto& ax : axes) ok = ok && !ax.missing(r);
    if (ok) complete.push_back(r);
  }
  p.frame.stats.n_missing = p.rows.size() - complete.size();

  const std::size_t quota = std::max<std::size_t>(1, limits.item_budget / n_pairs);
  if (complete.size() > quota) {
    const std::size_t n = complete.size();
    complete = density_sample(complete, axes[0], axes[1], spec.bins, quota, spec.seed);
    p.frame.stats.sampling_rate = static_cast<double>(quota) / static_cast<double>(n);
    p.frame.warnings.push_back("downsampled");
  }

  auto panels = apply_trellis(rel, complete, spec.trellis_by);
  const HslColor plain{spec.color.base_hue, 70.0, 50.0};
  for (auto& tp : panels) {
    Panel panel;
    panel.label = tp.label;
    panel.missing = tp.missing;
    panel.n_rows = tp.rows.size();
    const auto rows = ordered_rows(p, std::move(tp.rows));
    for (std::size_t pair = 0; pair < n_pairs; ++pair) {
      const auto& ax = axes[p.frame.pairs[pair].first];
      const auto& ay = axes[p.frame.pairs[pair].second];
      for (auto r : rows) {
        Item item;
        ScatterPoint g;
        g.pair = static_cast<int>(pair);
        g.x = ax.position(r);
        g.y = ay.position(r);
        item.count = 1;
        if (!ref) {
          item.color = plain;
        } else if (ref->is_missing(r)) {
          item.color = kNeutralColor;
        } else if (ref->quantitative()) {
          item.color = color_for(ref->value(r), ref_axis->axis.lo, ref_axis->axis.hi, spec.color).color;
        } else {
          item.color = ref_axis->axis.level_colors[ref_axis->rank_of_code[ref->code(r)]];
        }
        item.opacity = spec.opacity;
        item.rows = {r};
        item.geometry = g;
        panel.items.push_back(std::move(item));
      }
    }
    p.frame.panels.push_back(std::move(panel));
  }
  for (auto& ax : axes) p.frame.axes.push_back(std::move(ax.axis));
  if (ref_axis) p.frame.axes.push_back(std::move(ref_axis->axis));
  p.frame.stats.effective_bins = spec.bins;
  finish(p);
  return std::move(p.frame);
}

VisualFrame prep_tableplot(const Relation& rel, const Selection* sel, const SceneSpec& spec,
                           const FrameLimits& limits) {
  if (spec.technique != Technique::TablePlot) throw Error(ErrorCode::InvalidScene, "scene is not a TablePlot");
  if (!spec.ordering) throw Error(ErrorCode::MissingOrdering, "TablePlot requires an ordering attribute");
  Prep p = begin(rel, sel, spec, limits);
  const auto attrs = spec.all_attrs();
  std::vector<AxisMap> axes;
  for (const auto& a : attrs) axes.push_back(make_axis(p, a, spec.bins, false));

  auto panels = apply_trellis(rel, p.rows, spec.trellis_by);
  struct Bin {
    std::uint64_t first_rank;
    std::vector<RowId> rows;
    TableBin geom;
  };
  std::vector<std::vector<Bin>> built(panels.size());
  std::vector<double> max_abs_mean(axes.size(), 0.0);

  for (std::size_t pi = 0; pi < panels.size(); ++pi) {
    const auto sorted = ordered_rows(p, std::move(panels[pi].rows));
    panels[pi].rows.clear();
    const std::size_t n = sorted.size();
    if (n == 0) continue;
    const std::size_t n_bins = std::min<std::size_t>(static_cast<std::size_t>(spec.row_bins), n);
    const std::size_t base = n / n_bins;
    const std::size_t extra = n % n_bins;
    std::size_t start = 0;
    for (std::size_t b = 0; b < n_bins; ++b) {
      const std::size_t size = base + (b < extra ? 1 : 0);
      Bin bin;
      bin.first_rank = start;
      bin.rows.assign(sorted.begin() + static_cast<std::ptrdiff_t>(start),
                      sorted.begin() + static_cast<std::ptrdiff_t>(start + size));
      bin.geom.bin = static_cast<int>(b);
      bin.geom.first_rank = start;
      for (std::size_t a = 0; a < axes.size(); ++a) {
        const auto& ax = axes[a];
        if (ax.axis.type == ColumnType::Quantitative) {
          QuantSummary q;
          double sum = 0.0;
          std::uint64_t cnt = 0;
          double lo = std::numeric_limits<double>::infinity();
          double hi = -lo;
          for (auto r : bin.rows) {
            const double v = ax.col->value(r);
            if (std::isnan(v)) {
              ++q.n_missing;
              continue;
            }
            sum += v;
            ++cnt;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
          }
          if (cnt > 0) {
            q.mean = sum / static_cast<double>(cnt);
            q.min = lo;
            q.max = hi;
            max_abs_mean[a] = std::max(max_abs_mean[a], std::abs(*q.mean));
            q.color = color_for(*q.mean, ax.axis.lo, ax.axis.hi, spec.color).color;
          } else {
            q.color = kNeutralColor;
          }
          bin.geom.summaries.emplace_back(std::move(q));
        } else {
          CatSummary c;
          const auto n_levels = ax.axis.levels.size();
          std::vector<std::uint64_t> counts(n_levels, 0);
          std::uint64_t miss = 0;
          for (auto r : bin.rows) {
            const int s = ax.slot(r);
            if (s < 0) {
              ++miss;
            } else {
              ++counts[s];
            }
          }
          const double total = static_cast<double>(bin.rows.size());
          for (auto cnt : counts) c.fractions.push_back(static_cast<double>(cnt) / total);
          c.missing_fraction = static_cast<double>(miss) / total;
          bin.geom.summaries.emplace_back(std::move(c));
        }
      }
      start += size;
      built[pi].push_back(std::move(bin));
    }
  }

  for (std::size_t pi = 0; pi < panels.size(); ++pi) {
    Panel panel;
    panel.label = panels[pi].label;
    panel.missing = panels[pi].missing;
    for (auto& bin : built[pi]) {
      Item item;
      item.color = kNeutralColor;
      bool colored = false;
      for (std::size_t a = 0; a < axes.size(); ++a) {
        if (auto* q = std::get_if<QuantSummary>(&bin.geom.summaries[a])) {
          if (q->mean && max_abs_mean[a] > 0.0) q->size = std::abs(*q->mean) / max_abs_mean[a];
          if (!colored && q->mean) {
            item.color = q->color;
            colored = true;
          }
        }
      }
      item.count = bin.rows.size();
      panel.n_rows += item.count;
      item.opacity = spec.opacity;
      std::sort(bin.rows.begin(), bin.rows.end());
      item.rows = std::move(bin.rows);
      item.geometry = std::move(bin.geom);
      panel.items.push_back(std::move(item));
    }
    p.frame.panels.push_back(std::move(panel));
  }
  for (auto& ax : axes) p.frame.axes.push_back(std::move(ax.axis));
  p.frame.stats.effective_bins = spec.row_bins;
  finish(p);
  return std::move(p.frame);
}

VisualFrame prep_radial_graph(const Relation& rel, const Selection* sel, const SceneSpec& spec,
                              const FrameLimits& limits) {
  if (spec.technique != Technique::RadialGraph) throw Error(ErrorCode::InvalidScene, "scene is not a RadialGraph");
  Prep p = begin(rel, sel, spec, limits);
  auto src = make_axis(p, spec.target_attrs[0], spec.bins);
  auto dst = make_axis(p, spec.target_attrs[1], spec.bins);
  const int n_src = src.slots();
  const int n_dst = dst.slots();
  const int n_nodes = n_src + n_dst;

  std::vector<RowId> complete;
  for (auto r : p.rows) {
    if (!src.missing(r) && !dst.missing(r)) complete.push_back(r);
  }
  p.frame.stats.n_missing = p.rows.size() - complete.size();
  auto panels = apply_trellis(rel, complete, spec.trellis_by);

  std::vector<std::map<std::pair<int, int>, std::vector<RowId>>> links(panels.size());
  double wmin = std::numeric_limits<double>::infinity();
  double wmax = -wmin;
  for (std::size_t pi = 0; pi < panels.size(); ++pi) {
    for (auto r : panels[pi].rows) links[pi][{src.slot(r), dst.slot(r)}].push_back(r);
    for (const auto& [_, rows] : links[pi]) {
      wmin = std::min(wmin, static_cast<double>(rows.size()));
      wmax = std::max(wmax, static_cast<double>(rows.size()));
    }
  }
  const int k = count_segments(spec);
  for (std::size_t pi = 0; pi < panels.size(); ++pi) {
    Panel panel;
    panel.label = panels[pi].label;
    panel.missing = panels[pi].missing;
    panel.n_rows = panels[pi].rows.size();
    if (!panels[pi].rows.empty()) {
      std::vector<std::uint64_t> occurrences(static_cast<std::size_t>(n_nodes), 0);
      for (auto r : panels[pi].rows) {
        ++occurrences[src.slot(r)];
        ++occurrences[n_src + dst.slot(r)];
      }
      for (int node = 0; node < n_nodes; ++node) {
        Item item;
        RadialNode g;
        g.node = node;
        g.axis = node < n_src ? 0 : 1;
        g.level = node < n_src ? src.axis.levels[node] : dst.axis.levels[node - n_src];
        g.angle = kTwoPi * node / n_nodes;
        g.x = std::clamp(0.5 + 0.5 * std::cos(g.angle), 0.0, 1.0);
        g.y = std::clamp(0.5 + 0.5 * std::sin(g.angle), 0.0, 1.0);
        item.count = occurrences[node];
        item.color = HslColor{spec.color.base_hue, 70.0, g.axis == 0 ? 40.0 : 65.0};
        item.geometry = std::move(g);
        panel.items.push_back(std::move(item));
      }
    }
    for (auto& [key, rows] : links[pi]) {
      Item item;
      item.count = rows.size();
      item.color = color_segmented(static_cast<double>(item.count), wmin, wmax, k).color;
      item.opacity = spec.opacity;
      item.rows = std::move(rows);
      item.geometry = RadialLink{key.first, n_src + key.second};
      panel.items.push_back(std::move(item));
    }
    p.frame.panels.push_back(std::move(panel));
  }
  p.frame.axes = {std::move(src.axis), std::move(dst.axis)};
  finish(p);
  return std::move(p.frame);
}

VisualFrame prep_frame(const Relation& rel, const Selection* sel, const SceneSpec& spec, const FrameLimits& limits) {
  switch (spec.technique) {
    case Technique::HeatMap: return prep_heatmap(rel, sel, spec, limits);
    case Technique::ParallelCoordinates: return prep_parallel_coordinates(rel, sel, spec, limits);
    case Technique::ScatterMatrix: return prep_scatter_matrix(rel, sel, spec, limits);
    case Technique::TablePlot: return prep_tableplot(rel, sel, spec, limits);
    case Technique::RadialGraph: return prep_radial_graph(rel, sel, spec, limits);
  }
  throw Error(ErrorCode::InvalidScene, "unknown technique");
}

}  // namespace dqlens
