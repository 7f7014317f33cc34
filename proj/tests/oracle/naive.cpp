#include "naive.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <tuple>

namespace oracle {

using namespace dqlens;

namespace {

double uni(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t pick(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

bool chance(std::mt19937_64& rng, double p) { return uni(rng, 0.0, 1.0) < p; }

std::string fmt(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string ascii_lower(std::string s) {
  for (auto& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return s;
}

const std::vector<std::string> kC0Pool{"alpha", "beta", "Gamma", "delta", "eps"};
const std::vector<std::string> kC1Pool{"x", "y", "z"};

}  // namespace

std::string random_csv(std::mt19937_64& rng, std::size_t n_rows) {
  const double miss[5] = {chance(rng, 0.5) ? 0.0 : 0.1, chance(rng, 0.5) ? 0.0 : 0.05, chance(rng, 0.7) ? 0.0 : 0.2,
                          chance(rng, 0.5) ? 0.0 : 0.1, chance(rng, 0.5) ? 0.0 : 0.1};
  const bool constant_q2 = chance(rng, 0.15);
  std::vector<std::string> c0(kC0Pool.begin(), kC0Pool.begin() + 1 + static_cast<long>(pick(rng, kC0Pool.size())));
  std::vector<std::string> c1(kC1Pool.begin(), kC1Pool.begin() + 1 + static_cast<long>(pick(rng, kC1Pool.size())));
  const double q0_shift = uni(rng, -50, 50);

  std::string out = "q0,q1,q2,c0,c1\n";
  for (std::size_t r = 0; r < n_rows; ++r) {
    auto missing_token = [&](int col) -> const char* {
      if (r == 0 || !chance(rng, miss[col])) return nullptr;
      return chance(rng, 0.5) ? "" : "NA";
    };
    std::string row;
    if (auto m = missing_token(0)) {
      row += m;
    } else {
      row += fmt(q0_shift + uni(rng, -100, 100), 2);
    }
    row += ',';
    if (auto m = missing_token(1)) {
      row += m;
    } else {
      row += std::to_string(pick(rng, 10));
    }
    row += ',';
    if (auto m = missing_token(2)) {
      row += m;
    } else {
      row += constant_q2 ? "5" : fmt(std::normal_distribution<double>(0, 3)(rng), 3);
    }
    row += ',';
    if (auto m = missing_token(3)) {
      row += m;
    } else {
      row += c0[pick(rng, c0.size())];
    }
    row += ',';
    if (auto m = missing_token(4)) {
      row += m;
    } else {
      row += c1[pick(rng, c1.size())];
    }
    out += row;
    out += '\n';
  }
  return out;
}

RelationPtr random_relation(std::mt19937_64& rng, std::size_t n_rows, const std::string& name) {
  return load_relation(random_csv(rng, std::max<std::size_t>(n_rows, 1)), name, LoadOptions{});
}

bool missing(const Relation& rel, const std::string& attr, RowId row) {
  const auto raw = rel.column(attr).raw(row);
  const auto& tokens = rel.options().missing_tokens;
  return std::find(tokens.begin(), tokens.end(), raw) != tokens.end();
}

double number(const Relation& rel, const std::string& attr, RowId row) {
  if (missing(rel, attr, row)) return std::nan("");
  const std::string raw(rel.column(attr).raw(row));
  return std::strtod(raw.c_str(), nullptr);
}

namespace {

std::vector<std::string> quantitative_attrs(const Relation& rel) {
  std::vector<std::string> out;
  for (const auto& c : rel.columns()) {
    if (c.quantitative()) out.push_back(c.name());
  }
  return out;
}

std::vector<std::string> categorical_attrs(const Relation& rel) {
  std::vector<std::string> out;
  for (const auto& c : rel.columns()) {
    if (c.categorical()) out.push_back(c.name());
  }
  return out;
}

std::vector<std::string> all_attrs(const Relation& rel) {
  std::vector<std::string> out;
  for (const auto& c : rel.columns()) out.push_back(c.name());
  return out;
}

std::pair<double, double> value_extent(const Relation& rel, const std::string& attr) {
  double lo = INFINITY, hi = -INFINITY;
  for (RowId r = 0; r < rel.n_rows(); ++r) {
    const double v = number(rel, attr, r);
    if (std::isnan(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return {lo, hi};
}

std::vector<std::string> distinct_levels(const Relation& rel, const std::string& attr) {
  std::set<std::string> s;
  for (RowId r = 0; r < rel.n_rows(); ++r) {
    if (!missing(rel, attr, r)) s.insert(std::string(rel.column(attr).raw(r)));
  }
  return {s.begin(), s.end()};
}

}  // namespace

FilterSpec random_filter(std::mt19937_64& rng, const Relation& rel) {
  auto attrs = all_attrs(rel);
  std::shuffle(attrs.begin(), attrs.end(), rng);
  const std::size_t k = pick(rng, 4);
  FilterSpec spec;
  for (std::size_t i = 0; i < k && i < attrs.size(); ++i) {
    const auto& a = attrs[i];
    if (rel.column(a).quantitative()) {
      auto draw = [&]() {
        if (chance(rng, 0.5)) {
          const RowId r = static_cast<RowId>(pick(rng, rel.n_rows()));
          const double v = number(rel, a, r);
          if (!std::isnan(v)) return v;
        }
        return uni(rng, -160, 160);
      };
      double lo = draw();
      double hi = chance(rng, 0.1) ? lo : draw();
      if (lo > hi) std::swap(lo, hi);
      spec.predicates.push_back(Range{a, lo, hi, chance(rng, 0.5), chance(rng, 0.5)});
    } else {
      KeywordSet ks{a, {}, chance(rng, 0.4)};
      const std::size_t n = 1 + pick(rng, 3);
      for (std::size_t j = 0; j < n; ++j) {
        const auto& pool = chance(rng, 0.5) ? kC0Pool : kC1Pool;
        std::string w = chance(rng, 0.1) ? "nope" : pool[pick(rng, pool.size())];
        if (chance(rng, 0.3)) w = ascii_lower(w) == w ? std::string(1, static_cast<char>(w[0] - 32)) + w.substr(1) : ascii_lower(w);
        ks.keywords.insert(w);
      }
      spec.predicates.push_back(ks);
    }
  }
  return spec;
}

std::vector<RowId> filter_rows(const Relation& rel, const FilterSpec& spec) {
  std::vector<RowId> out;
  for (RowId r = 0; r < rel.n_rows(); ++r) {
    bool ok = true;
    for (const auto& p : spec.predicates) {
      if (const auto* k = std::get_if<KeywordSet>(&p)) {
        if (missing(rel, k->attr, r)) {
          ok = false;
          break;
        }
        const std::string v(rel.column(k->attr).raw(r));
        bool any = false;
        for (const auto& w : k->keywords) {
          if (k->case_insensitive ? ascii_lower(w) == ascii_lower(v) : w == v) any = true;
        }
        ok = ok && any;
      } else {
        const auto& g = std::get<Range>(p);
        const double v = number(rel, g.attr, r);
        if (std::isnan(v)) {
          ok = false;
          break;
        }
        const bool above = g.lo_inclusive ? v >= g.lo : v > g.lo;
        const bool below = g.hi_inclusive ? v <= g.hi : v < g.hi;
        ok = ok && above && below;
      }
      if (!ok) break;
    }
    if (ok) out.push_back(r);
  }
  return out;
}

SceneSpec random_scene(std::mt19937_64& rng, const Relation& rel, Technique technique) {
  const auto q = quantitative_attrs(rel);
  const auto c = categorical_attrs(rel);
  auto everything = all_attrs(rel);
  std::shuffle(everything.begin(), everything.end(), rng);

  SceneSpec s;
  s.relation = rel.name();
  s.technique = technique;
  s.bins = 1 + static_cast<int>(pick(rng, 20));
  s.row_bins = 1 + static_cast<int>(pick(rng, 30));
  s.opacity = uni(rng, 0.1, 1.0);
  s.seed = rng();
  if (chance(rng, 0.5)) {
    s.color.mode = ColorMode::Segmented;
    s.color.segments = 2 + static_cast<int>(pick(rng, 11));
  }
  auto unused = [&](const std::vector<std::string>& pool) {
    std::vector<std::string> out;
    for (const auto& a : pool) {
      if (std::find(s.target_attrs.begin(), s.target_attrs.end(), a) == s.target_attrs.end()) out.push_back(a);
    }
    return out;
  };

  switch (technique) {
    case Technique::HeatMap: {
      s.target_attrs = {everything[0], everything[1]};
      auto refs = unused(q);
      if (!refs.empty() && chance(rng, 0.5)) s.reference_attrs = {refs[pick(rng, refs.size())]};
      break;
    }
    case Technique::ParallelCoordinates: {
      const std::size_t n = 2 + pick(rng, everything.size() - 1);
      s.target_attrs.assign(everything.begin(), everything.begin() + static_cast<long>(n));
      s.compaction = chance(rng, 0.6);
      break;
    }
    case Technique::ScatterMatrix: {
      auto qq = q;
      std::shuffle(qq.begin(), qq.end(), rng);
      const std::size_t n = 2 + pick(rng, qq.size() - 1);
      s.target_attrs.assign(qq.begin(), qq.begin() + static_cast<long>(n));
      auto refs = unused(all_attrs(rel));
      if (!refs.empty() && chance(rng, 0.5)) s.reference_attrs = {refs[pick(rng, refs.size())]};
      break;
    }
    case Technique::TablePlot: {
      const std::size_t n = 1 + pick(rng, 4);
      s.target_attrs.assign(everything.begin(), everything.begin() + static_cast<long>(n));
      break;
    }
    case Technique::RadialGraph: {
      s.target_attrs = c;
      if (chance(rng, 0.5)) std::swap(s.target_attrs[0], s.target_attrs[1]);
      break;
    }
  }
  if (chance(rng, 0.4)) s.trellis_by = c[pick(rng, c.size())];
  if (technique == Technique::TablePlot || chance(rng, 0.4)) {
    const auto all = all_attrs(rel);
    s.ordering = Ordering{all[pick(rng, all.size())], chance(rng, 0.5) ? Direction::Ascending : Direction::Descending};
  }
  if (chance(rng, 0.3)) {
    const auto& a = q[pick(rng, q.size())];
    const auto [lo, hi] = value_extent(rel, a);
    if (hi > lo) {
      double x = uni(rng, lo, hi), y = uni(rng, lo, hi);
      if (x > y) std::swap(x, y);
      s.zoom[a] = ValueWindow{x, y};
    }
  }
  return s;
}

namespace {

// Brute-force view of one scene: zoom-filtered rows, axis domains, level
// display orders.
struct Naive {
  const Relation& rel;
  const SceneSpec& spec;
  std::vector<RowId> rows;
  std::vector<std::string> errors;
  mutable std::map<std::string, std::pair<double, double>> extents;

  Naive(const Relation& r, const Selection* sel, const SceneSpec& s) : rel(r), spec(s) {
    std::vector<RowId> base;
    if (sel) {
      base = sel->rows;
    } else {
      for (RowId i = 0; i < rel.n_rows(); ++i) base.push_back(i);
    }
    for (auto i : base) {
      bool in = true;
      for (const auto& [attr, w] : spec.zoom) {
        const double v = number(rel, attr, i);
        if (std::isnan(v) || v < w.lo || v > w.hi) in = false;
      }
      if (in) rows.push_back(i);
    }
  }

  bool quant(const std::string& a) const { return rel.column(a).quantitative(); }

  std::pair<double, double> domain(const std::string& a) const {
    if (auto it = spec.zoom.find(a); it != spec.zoom.end()) return {it->second.lo, it->second.hi};
    auto cached = extents.find(a);
    if (cached == extents.end()) cached = extents.emplace(a, value_extent(rel, a)).first;
    if (!std::isfinite(cached->second.first)) return {0.0, 0.0};
    return cached->second;
  }

  int bin(const std::string& a, double v, int bins) const {
    const auto [lo, hi] = domain(a);
    if (!(hi > lo) || bins <= 1) return 0;
    const double t = std::floor((v - lo) / (hi - lo) * bins);
    return static_cast<int>(std::clamp(t, 0.0, static_cast<double>(bins - 1)));
  }

  double norm(const std::string& a, double v) const {
    const auto [lo, hi] = domain(a);
    if (!(hi > lo)) return 0.5;
    return std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
  }

  // Levels in display order.
  std::vector<std::string> display_levels(const std::string& a, bool apply_ordering = true) const {
    const auto levels = distinct_levels(rel, a);
    if (!spec.ordering || !apply_ordering) return levels;
    const auto& key_attr = spec.ordering->attr;
    std::vector<double> key(levels.size(), std::nan(""));
    if (key_attr == a) {
      std::vector<double> freq(levels.size(), 0.0);
      for (auto r : rows) {
        if (missing(rel, a, r)) continue;
        const auto it = std::lower_bound(levels.begin(), levels.end(), std::string(rel.column(a).raw(r)));
        freq[static_cast<std::size_t>(it - levels.begin())] += 1;
      }
      key = freq;
    } else if (quant(key_attr)) {
      std::vector<double> sum(levels.size(), 0.0), cnt(levels.size(), 0.0);
      for (auto r : rows) {
        const double v = number(rel, key_attr, r);
        if (missing(rel, a, r) || std::isnan(v)) continue;
        const auto it = std::lower_bound(levels.begin(), levels.end(), std::string(rel.column(a).raw(r)));
        sum[static_cast<std::size_t>(it - levels.begin())] += v;
        cnt[static_cast<std::size_t>(it - levels.begin())] += 1;
      }
      for (std::size_t l = 0; l < levels.size(); ++l) {
        if (cnt[l] > 0) key[l] = sum[l] / cnt[l];
      }
    } else {
      return levels;
    }
    const double sign = spec.ordering->direction == Direction::Ascending ? 1.0 : -1.0;
    std::vector<std::tuple<int, double, std::size_t>> tagged;
    for (std::size_t l = 0; l < levels.size(); ++l) {
      tagged.emplace_back(std::isnan(key[l]) ? 1 : 0, std::isnan(key[l]) ? 0.0 : sign * key[l], l);
    }
    std::sort(tagged.begin(), tagged.end());
    std::vector<std::string> out;
    for (const auto& t : tagged) out.push_back(levels[std::get<2>(t)]);
    return out;
  }

  int rank(const std::vector<std::string>& order, const std::string& a, RowId r) const {
    if (missing(rel, a, r)) return -1;
    const auto v = std::string(rel.column(a).raw(r));
    return static_cast<int>(std::find(order.begin(), order.end(), v) - order.begin());
  }

  // Trellis partition of `subset`.
  std::vector<std::pair<std::string, std::vector<RowId>>> panels(const std::vector<RowId>& subset) const {
    if (!spec.trellis_by) return {{"all", subset}};
    std::map<std::string, std::vector<RowId>> by;
    std::vector<RowId> miss;
    for (auto r : subset) {
      if (missing(rel, *spec.trellis_by, r)) {
        miss.push_back(r);
      } else {
        by[std::string(rel.column(*spec.trellis_by).raw(r))].push_back(r);
      }
    }
    std::vector<std::pair<std::string, std::vector<RowId>>> out(by.begin(), by.end());
    if (!miss.empty()) out.emplace_back("missing", miss);
    return out;
  }

  std::vector<RowId> ordered(const std::vector<RowId>& subset) const {
    if (!spec.ordering) return subset;
    const double sign = spec.ordering->direction == Direction::Ascending ? 1.0 : -1.0;
    std::vector<std::tuple<int, double, std::size_t>> tagged;
    std::vector<std::string> levels;
    const auto& a = spec.ordering->attr;
    if (!quant(a)) levels = distinct_levels(rel, a);
    for (std::size_t i = 0; i < subset.size(); ++i) {
      double k;
      if (quant(a)) {
        k = number(rel, a, subset[i]);
      } else if (missing(rel, a, subset[i])) {
        k = std::nan("");
      } else {
        k = static_cast<double>(
            std::lower_bound(levels.begin(), levels.end(), std::string(rel.column(a).raw(subset[i]))) -
            levels.begin());
      }
      tagged.emplace_back(std::isnan(k) ? 1 : 0, std::isnan(k) ? 0.0 : sign * k, i);
    }
    std::sort(tagged.begin(), tagged.end());
    std::vector<RowId> out;
    for (const auto& t : tagged) out.push_back(subset[std::get<2>(t)]);
    return out;
  }

  void fail(const std::string& what) { errors.push_back(what); }
};

bool close_rel(double a, double b, double tol = 1e-9) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

std::string str(const std::vector<RowId>& v) {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < v.size() && i < 8; ++i) os << (i ? "," : "") << v[i];
  if (v.size() > 8) os << ",...";
  os << '}';
  return os.str();
}

void check_panels(Naive& nv, const VisualFrame& frame,
                  const std::vector<std::pair<std::string, std::vector<RowId>>>& expected) {
  if (frame.panels.size() != expected.size()) {
    nv.fail("panel count " + std::to_string(frame.panels.size()) + " != " + std::to_string(expected.size()));
    return;
  }
  for (std::size_t p = 0; p < expected.size(); ++p) {
    if (frame.panels[p].label != expected[p].first) {
      nv.fail("panel " + std::to_string(p) + " label " + frame.panels[p].label + " != " + expected[p].first);
    }
    if (frame.panels[p].n_rows != expected[p].second.size()) {
      nv.fail("panel " + expected[p].first + " n_rows " + std::to_string(frame.panels[p].n_rows) +
              " != " + std::to_string(expected[p].second.size()));
    }
  }
}

void check_heatmap(Naive& nv, const VisualFrame& f) {
  const auto& s = nv.spec;
  const auto& a0 = s.target_attrs[0];
  const auto& a1 = s.target_attrs[1];
  const auto o0 = nv.quant(a0) ? std::vector<std::string>{} : nv.display_levels(a0);
  const auto o1 = nv.quant(a1) ? std::vector<std::string>{} : nv.display_levels(a1);
  const int n0 = nv.quant(a0) ? s.bins : static_cast<int>(o0.size());
  const int n1 = nv.quant(a1) ? s.bins : static_cast<int>(o1.size());
  auto slot = [&](const std::string& a, const std::vector<std::string>& order, int n, RowId r) {
    if (nv.quant(a)) {
      const double v = number(nv.rel, a, r);
      return std::isnan(v) ? n : nv.bin(a, v, s.bins);
    }
    const int k = nv.rank(order, a, r);
    return k < 0 ? n : k;
  };
  const std::string ref = s.reference_attrs.empty() ? "" : s.reference_attrs[0];

  struct Acc {
    std::vector<RowId> rows;
    double sum = 0;
    std::uint64_t n = 0;
  };
  const auto panels = nv.panels(nv.rows);
  check_panels(nv, f, panels);
  if (f.panels.size() != panels.size()) return;
  std::uint64_t missing_total = 0;
  for (std::size_t p = 0; p < panels.size(); ++p) {
    std::map<std::pair<int, int>, Acc> cells;
    for (auto r : panels[p].second) {
      auto& c = cells[{slot(a0, o0, n0, r), slot(a1, o1, n1, r)}];
      c.rows.push_back(r);
      if (!ref.empty()) {
        const double v = number(nv.rel, ref, r);
        if (!std::isnan(v)) {
          c.sum += v;
          ++c.n;
        }
      }
    }
    const auto& items = f.panels[p].items;
    if (items.size() != cells.size()) {
      nv.fail("panel " + panels[p].first + ": " + std::to_string(items.size()) + " cells, oracle " +
              std::to_string(cells.size()));
      continue;
    }
    auto it = cells.begin();
    for (const auto& item : items) {
      const auto& [key, acc] = *it++;
      const auto* g = std::get_if<HeatCell>(&item.geometry);
      if (!g) {
        nv.fail("heatmap item without HeatCell geometry");
        continue;
      }
      const std::string where = "cell (" + std::to_string(key.first) + "," + std::to_string(key.second) + ")";
      if (g->i != key.first || g->j != key.second) {
        nv.fail(where + " found at (" + std::to_string(g->i) + "," + std::to_string(g->j) + ")");
        continue;
      }
      const bool miss = key.first == n0 || key.second == n1;
      if (g->missing != miss) nv.fail(where + " missing flag");
      if (miss) missing_total += acc.rows.size();
      if (item.count != acc.rows.size()) {
        nv.fail(where + " count " + std::to_string(item.count) + " != " + std::to_string(acc.rows.size()));
      }
      if (item.rows != acc.rows) nv.fail(where + " rows " + str(item.rows) + " != " + str(acc.rows));
      if (!ref.empty() && acc.n > 0) {
        if (!g->aggregate || !close_rel(*g->aggregate, acc.sum / static_cast<double>(acc.n))) {
          nv.fail(where + " aggregate mismatch");
        }
      } else if (g->aggregate) {
        nv.fail(where + " unexpected aggregate");
      }
    }
  }
  if (f.stats.n_missing != missing_total) nv.fail("heatmap n_missing");
}

// Rows with every listed attribute present.
std::vector<RowId> complete_rows(const Naive& nv, const std::vector<std::string>& attrs) {
  std::vector<RowId> out;
  for (auto r : nv.rows) {
    bool ok = true;
    for (const auto& a : attrs) ok = ok && !missing(nv.rel, a, r);
    if (ok) out.push_back(r);
  }
  return out;
}

void check_parallel(Naive& nv, const VisualFrame& f) {
  const auto& s = nv.spec;
  const auto attrs = s.all_attrs();
  std::vector<std::vector<std::string>> orders;
  for (const auto& a : attrs) orders.push_back(nv.quant(a) ? std::vector<std::string>{} : nv.display_levels(a));
  const auto complete = complete_rows(nv, attrs);
  if (f.stats.n_missing != nv.rows.size() - complete.size()) nv.fail("pc n_missing");
  const auto panels = nv.panels(complete);
  check_panels(nv, f, panels);
  if (f.panels.size() != panels.size()) return;

  auto cat_pos = [](int rank, std::size_t n) { return n <= 1 ? 0.5 : static_cast<double>(rank) / double(n - 1); };
  const bool compact = s.compaction || f.stats.forced_compaction;
  if (compact && f.stats.effective_bins != s.bins) {
    nv.fail("pc bins were coarsened; oracle assumes a large budget");
    return;
  }
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const auto& items = f.panels[p].items;
    if (compact) {
      std::map<std::vector<int>, std::vector<RowId>> groups;
      for (auto r : panels[p].second) {
        std::vector<int> sig;
        for (std::size_t k = 0; k < attrs.size(); ++k) {
          sig.push_back(nv.quant(attrs[k]) ? nv.bin(attrs[k], number(nv.rel, attrs[k], r), s.bins)
                                           : nv.rank(orders[k], attrs[k], r));
        }
        groups[sig].push_back(r);
      }
      if (items.size() != groups.size()) {
        nv.fail("pc panel " + panels[p].first + ": " + std::to_string(items.size()) + " polylines, oracle " +
                std::to_string(groups.size()));
        continue;
      }
      auto it = groups.begin();
      for (const auto& item : items) {
        const auto& [sig, rows] = *it++;
        if (item.count != rows.size() || item.rows != rows) {
          nv.fail("pc group count/rows " + std::to_string(item.count) + " vs " + std::to_string(rows.size()));
        }
        const auto& pos = std::get<Polyline>(item.geometry).positions;
        for (std::size_t k = 0; k < attrs.size(); ++k) {
          double want;
          if (nv.quant(attrs[k])) {
            const auto [lo, hi] = nv.domain(attrs[k]);
            want = hi > lo ? (sig[k] + 0.5) / s.bins : 0.5;
          } else {
            want = cat_pos(sig[k], orders[k].size());
          }
          if (!close_rel(pos[k], want, 1e-12)) nv.fail("pc group position mismatch on " + attrs[k]);
        }
      }
    } else {
      const auto rows = nv.ordered(panels[p].second);
      if (items.size() != rows.size()) {
        nv.fail("pc panel " + panels[p].first + ": " + std::to_string(items.size()) + " lines, oracle " +
                std::to_string(rows.size()));
        continue;
      }
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& item = items[i];
        if (item.rows != std::vector<RowId>{rows[i]} || item.count != 1) {
          nv.fail("pc line " + std::to_string(i) + " holds " + str(item.rows) + ", oracle row " +
                  std::to_string(rows[i]));
          break;
        }
        const auto& pos = std::get<Polyline>(item.geometry).positions;
        for (std::size_t k = 0; k < attrs.size(); ++k) {
          const double want = nv.quant(attrs[k]) ? nv.norm(attrs[k], number(nv.rel, attrs[k], rows[i]))
                                                 : cat_pos(nv.rank(orders[k], attrs[k], rows[i]), orders[k].size());
          if (!close_rel(pos[k], want, 1e-12)) nv.fail("pc line position mismatch on " + attrs[k]);
          if (pos[k] < 0.0 || pos[k] > 1.0) nv.fail("pc position outside [0,1]");
        }
      }
    }
  }
}

void check_scatter(Naive& nv, const VisualFrame& f) {
  const auto& s = nv.spec;
  const auto& attrs = s.target_attrs;
  const auto complete = complete_rows(nv, attrs);
  if (f.stats.n_missing != nv.rows.size() - complete.size()) nv.fail("scatter n_missing");
  if (f.stats.sampling_rate != 1.0) {
    nv.fail("scatter was downsampled; oracle assumes a large budget");
    return;
  }
  std::vector<std::pair<int, int>> pairs;
  for (int a = 0; a < static_cast<int>(attrs.size()); ++a) {
    for (int b = a + 1; b < static_cast<int>(attrs.size()); ++b) pairs.emplace_back(a, b);
  }
  if (f.pairs != pairs) nv.fail("scatter pairs");
  const auto panels = nv.panels(complete);
  check_panels(nv, f, panels);
  if (f.panels.size() != panels.size()) return;
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const auto& items = f.panels[p].items;
    if (items.size() != panels[p].second.size() * pairs.size()) {
      nv.fail("scatter panel " + panels[p].first + " point count");
      continue;
    }
    std::set<std::pair<int, RowId>> seen;
    for (const auto& item : items) {
      const auto& g = std::get<ScatterPoint>(item.geometry);
      if (item.rows.size() != 1) {
        nv.fail("scatter point with " + std::to_string(item.rows.size()) + " rows");
        continue;
      }
      const RowId r = item.rows[0];
      seen.emplace(g.pair, r);
      const auto& ax = attrs[static_cast<std::size_t>(pairs[static_cast<std::size_t>(g.pair)].first)];
      const auto& ay = attrs[static_cast<std::size_t>(pairs[static_cast<std::size_t>(g.pair)].second)];
      if (!close_rel(g.x, nv.norm(ax, number(nv.rel, ax, r)), 1e-12) ||
          !close_rel(g.y, nv.norm(ay, number(nv.rel, ay, r)), 1e-12)) {
        nv.fail("scatter coordinates of row " + std::to_string(r));
      }
    }
    std::set<std::pair<int, RowId>> want;
    for (int k = 0; k < static_cast<int>(pairs.size()); ++k) {
      for (auto r : panels[p].second) want.emplace(k, r);
    }
    if (seen != want) nv.fail("scatter point membership in panel " + panels[p].first);
  }
}

void check_tableplot(Naive& nv, const VisualFrame& f) {
  const auto& s = nv.spec;
  const auto attrs = s.all_attrs();
  const auto panels = nv.panels(nv.rows);
  // Tableplot panels report their binned row totals; same as partition sizes.
  check_panels(nv, f, panels);
  if (f.panels.size() != panels.size()) return;

  std::map<std::string, std::vector<std::string>> natural;
  for (const auto& a : attrs) {
    if (!nv.quant(a)) natural[a] = distinct_levels(nv.rel, a);
  }
  // Largest |mean| per attribute over every bin.
  std::vector<double> max_abs(attrs.size(), 0.0);
  struct Expected {
    std::vector<RowId> rows;
    std::size_t first_rank;
  };
  std::vector<std::vector<Expected>> bins(panels.size());
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const auto sorted = nv.ordered(panels[p].second);
    const std::size_t n = sorted.size();
    if (n == 0) continue;
    const std::size_t nb = std::min<std::size_t>(static_cast<std::size_t>(s.row_bins), n);
    std::size_t start = 0;
    for (std::size_t b = 0; b < nb; ++b) {
      const std::size_t size = n / nb + (b < n % nb ? 1 : 0);
      Expected e{{sorted.begin() + static_cast<long>(start), sorted.begin() + static_cast<long>(start + size)}, start};
      for (std::size_t k = 0; k < attrs.size(); ++k) {
        if (!nv.quant(attrs[k])) continue;
        double sum = 0, cnt = 0;
        for (auto r : e.rows) {
          const double v = number(nv.rel, attrs[k], r);
          if (!std::isnan(v)) sum += v, cnt += 1;
        }
        if (cnt > 0) max_abs[k] = std::max(max_abs[k], std::abs(sum / cnt));
      }
      bins[p].push_back(std::move(e));
      start += size;
    }
  }
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const auto& items = f.panels[p].items;
    if (items.size() != bins[p].size()) {
      nv.fail("tableplot panel " + panels[p].first + " bin count");
      continue;
    }
    for (std::size_t b = 0; b < items.size(); ++b) {
      const auto& item = items[b];
      auto e = bins[p][b];
      const auto& g = std::get<TableBin>(item.geometry);
      if (g.bin != static_cast<int>(b) || g.first_rank != e.first_rank) nv.fail("tableplot bin index/rank");
      if (item.count != e.rows.size()) nv.fail("tableplot bin size");
      auto sorted_rows = e.rows;
      std::sort(sorted_rows.begin(), sorted_rows.end());
      if (item.rows != sorted_rows) nv.fail("tableplot bin membership");
      if (g.summaries.size() != attrs.size()) {
        nv.fail("tableplot summary count");
        continue;
      }
      for (std::size_t k = 0; k < attrs.size(); ++k) {
        const auto& a = attrs[k];
        if (nv.quant(a)) {
          const auto* q = std::get_if<QuantSummary>(&g.summaries[k]);
          if (!q) {
            nv.fail("tableplot summary kind for " + a);
            continue;
          }
          double sum = 0, lo = INFINITY, hi = -INFINITY;
          std::uint64_t cnt = 0, miss = 0;
          for (auto r : e.rows) {
            const double v = number(nv.rel, a, r);
            if (std::isnan(v)) {
              ++miss;
              continue;
            }
            sum += v;
            ++cnt;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
          }
          if (q->n_missing != miss) nv.fail("tableplot n_missing for " + a);
          if (cnt == 0) {
            if (q->mean || q->size != 0.0) nv.fail("tableplot all-missing bin should have no mean and size 0");
            continue;
          }
          const double mean = sum / static_cast<double>(cnt);
          if (!q->mean || !close_rel(*q->mean, mean)) nv.fail("tableplot mean for " + a);
          if (q->min != lo || q->max != hi) nv.fail("tableplot min/max for " + a);
          const double size = max_abs[k] > 0 ? std::abs(mean) / max_abs[k] : 0.0;
          if (!close_rel(q->size, size)) nv.fail("tableplot size for " + a);
        } else {
          const auto* c = std::get_if<CatSummary>(&g.summaries[k]);
          if (!c) {
            nv.fail("tableplot summary kind for " + a);
            continue;
          }
          const auto& levels = natural[a];
          std::vector<double> counts(levels.size(), 0.0);
          double miss = 0;
          for (auto r : e.rows) {
            const int k2 = nv.rank(levels, a, r);
            if (k2 < 0) {
              miss += 1;
            } else {
              counts[static_cast<std::size_t>(k2)] += 1;
            }
          }
          const double total = static_cast<double>(e.rows.size());
          double sum = c->missing_fraction;
          if (c->fractions.size() != levels.size()) {
            nv.fail("tableplot fraction vector length for " + a);
            continue;
          }
          for (std::size_t l = 0; l < levels.size(); ++l) {
            if (!close_rel(c->fractions[l], counts[l] / total, 1e-12)) nv.fail("tableplot fraction for " + a);
            sum += c->fractions[l];
          }
          if (!close_rel(c->missing_fraction, miss / total, 1e-12)) nv.fail("tableplot missing fraction");
          if (!close_rel(sum, 1.0, 1e-12)) nv.fail("tableplot fractions do not sum to 1");
        }
      }
    }
  }
}

void check_radial(Naive& nv, const VisualFrame& f) {
  const auto& s = nv.spec;
  const auto& a = s.target_attrs[0];
  const auto& b = s.target_attrs[1];
  const auto oa = nv.display_levels(a);
  const auto ob = nv.display_levels(b);
  const int na = static_cast<int>(oa.size());
  const int n_nodes = na + static_cast<int>(ob.size());
  const auto complete = complete_rows(nv, {a, b});
  if (f.stats.n_missing != nv.rows.size() - complete.size()) nv.fail("radial n_missing");
  const auto panels = nv.panels(complete);
  check_panels(nv, f, panels);
  if (f.panels.size() != panels.size()) return;
  for (std::size_t p = 0; p < panels.size(); ++p) {
    std::map<std::pair<int, int>, std::vector<RowId>> links;
    std::vector<std::uint64_t> occ(static_cast<std::size_t>(n_nodes), 0);
    for (auto r : panels[p].second) {
      const int i = nv.rank(oa, a, r);
      const int j = nv.rank(ob, b, r);
      links[{i, j}].push_back(r);
      ++occ[static_cast<std::size_t>(i)];
      ++occ[static_cast<std::size_t>(na + j)];
    }
    const auto& items = f.panels[p].items;
    const std::size_t n_node_items = panels[p].second.empty() ? 0 : static_cast<std::size_t>(n_nodes);
    if (items.size() != n_node_items + links.size()) {
      nv.fail("radial panel " + panels[p].first + " item count");
      continue;
    }
    for (int k = 0; k < static_cast<int>(n_node_items); ++k) {
      const auto* g = std::get_if<RadialNode>(&items[static_cast<std::size_t>(k)].geometry);
      if (!g) {
        nv.fail("radial node expected");
        continue;
      }
      const std::string level = k < na ? oa[static_cast<std::size_t>(k)] : ob[static_cast<std::size_t>(k - na)];
      if (g->node != k || g->level != level) nv.fail("radial node label/order");
      if (!close_rel(g->angle, 2.0 * std::numbers::pi * k / n_nodes, 1e-12)) nv.fail("radial node angle");
      if (items[static_cast<std::size_t>(k)].count != occ[static_cast<std::size_t>(k)]) nv.fail("radial node count");
    }
    auto it = links.begin();
    for (std::size_t k = n_node_items; k < items.size(); ++k) {
      const auto& [key, rows] = *it++;
      const auto* g = std::get_if<RadialLink>(&items[k].geometry);
      if (!g || g->src != key.first || g->dst != na + key.second) {
        nv.fail("radial link endpoints");
        continue;
      }
      if (items[k].count != rows.size() || items[k].rows != rows) nv.fail("radial link weight");
    }
  }
}

}  // namespace

std::vector<std::string> check_frame(const Relation& rel, const Selection* sel, const SceneSpec& spec,
                                     const VisualFrame& frame) {
  Naive nv(rel, sel, spec);
  if (frame.stats.n_input_rows != nv.rows.size()) {
    nv.fail("n_input_rows " + std::to_string(frame.stats.n_input_rows) + " != " + std::to_string(nv.rows.size()));
  }
  const std::size_t base = sel ? sel->rows.size() : rel.n_rows();
  if (frame.stats.n_zoom_excluded != base - nv.rows.size()) nv.fail("n_zoom_excluded");
  switch (spec.technique) {
    case Technique::HeatMap: check_heatmap(nv, frame); break;
    case Technique::ParallelCoordinates: check_parallel(nv, frame); break;
    case Technique::ScatterMatrix: check_scatter(nv, frame); break;
    case Technique::TablePlot: check_tableplot(nv, frame); break;
    case Technique::RadialGraph: check_radial(nv, frame); break;
  }
  std::uint32_t next = 0;
  for (const auto& p : frame.panels) {
    for (const auto& item : p.items) {
      if (item.id != next++) {
        nv.fail("item ids are not sequential");
        return nv.errors;
      }
    }
  }
  if (frame.stats.n_items != next) nv.fail("stats.n_items");
  return nv.errors;
}

bool conserves_counts(const VisualFrame& f) {
  std::uint64_t sum = 0;
  for (const auto& p : f.panels) {
    for (const auto& item : p.items) {
      switch (f.scene.technique) {
        case Technique::HeatMap:
          if (!std::get<HeatCell>(item.geometry).missing) sum += item.count;
          break;
        case Technique::RadialGraph:
          if (std::holds_alternative<RadialLink>(item.geometry)) sum += item.count;
          break;
        default: sum += item.count;
      }
    }
  }
  if (f.scene.technique == Technique::ScatterMatrix) {
    if (f.stats.sampling_rate != 1.0) return true;
    const auto n_pairs = f.pairs.size();
    if (n_pairs == 0 || sum % n_pairs != 0) return false;
    sum /= n_pairs;
  }
  return f.stats.n_input_rows == sum + f.stats.n_missing;
}

std::vector<RowId> robust_outliers(const Relation& rel, const std::string& attr, double z) {
  std::vector<double> xs;
  for (RowId r = 0; r < rel.n_rows(); ++r) {
    const double v = number(rel, attr, r);
    if (!std::isnan(v)) xs.push_back(v);
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
  };
  const double med = median(xs);
  std::vector<double> dev;
  for (double x : xs) dev.push_back(std::abs(x - med));
  const double scale = 1.4826 * median(dev);
  std::vector<RowId> out;
  for (RowId r = 0; r < rel.n_rows(); ++r) {
    const double v = number(rel, attr, r);
    if (!std::isnan(v) && std::abs(v - med) / scale > z) out.push_back(r);
  }
  return out;
}

std::vector<double> mahalanobis_sq(const Relation& rel, const std::vector<std::string>& attrs) {
  const std::size_t d = attrs.size();
  std::vector<std::vector<double>> rows;
  std::vector<RowId> ids;
  for (RowId r = 0; r < rel.n_rows(); ++r) {
    std::vector<double> x;
    for (const auto& a : attrs) x.push_back(number(rel, a, r));
    if (std::none_of(x.begin(), x.end(), [](double v) { return std::isnan(v); })) {
      rows.push_back(x);
      ids.push_back(r);
    }
  }
  const double n = static_cast<double>(rows.size());
  std::vector<double> mean(d, 0.0);
  for (const auto& x : rows) {
    for (std::size_t i = 0; i < d; ++i) mean[i] += x[i] / n;
  }
  std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
  for (const auto& x : rows) {
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) cov[i][j] += (x[i] - mean[i]) * (x[j] - mean[j]) / (n - 1);
    }
  }
  // Gauss-Jordan with partial pivoting on [cov | I].
  std::vector<std::vector<double>> aug(d, std::vector<double>(2 * d, 0.0));
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) aug[i][j] = cov[i][j];
    aug[i][d + i] = 1.0;
  }
  for (std::size_t c = 0; c < d; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < d; ++r) {
      if (std::abs(aug[r][c]) > std::abs(aug[piv][c])) piv = r;
    }
    std::swap(aug[c], aug[piv]);
    const double div = aug[c][c];
    for (auto& v : aug[c]) v /= div;
    for (std::size_t r = 0; r < d; ++r) {
      if (r == c) continue;
      const double f = aug[r][c];
      for (std::size_t k = 0; k < 2 * d; ++k) aug[r][k] -= f * aug[c][k];
    }
  }
  std::vector<double> out(rel.n_rows(), std::nan(""));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    double m = 0;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) m += (rows[k][i] - mean[i]) * aug[i][d + j] * (rows[k][j] - mean[j]);
    }
    out[ids[k]] = m;
  }
  return out;
}

Confusion confusion(const std::vector<RowId>& detected, const std::vector<RowId>& truth) {
  std::set<RowId> d(detected.begin(), detected.end()), t(truth.begin(), truth.end());
  Confusion c;
  for (auto r : d) (t.count(r) ? c.tp : c.fp) += 1;
  for (auto r : t) c.fn += d.count(r) ? 0 : 1;
  return c;
}

}  // namespace oracle
