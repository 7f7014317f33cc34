#include "dqlens/defect_lab.hpp"

#include "dqlens/error.hpp"
#include "dqlens/hash.hpp"
#include "dqlens/rng.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

namespace dqlens {
namespace {

using nlohmann::json;

std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s(buf);
  // "-0.00" would read back as 0 anyway; keep the text tidy.
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
};

MeanSd mean_sd(const std::vector<double>& xs) {
  MeanSd m;
  m.n = xs.size();
  if (xs.empty()) return m;
  m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    m.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return m;
}

double median_of(std::vector<double> xs) {
  const auto n = xs.size();
  const auto mid = xs.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(xs.begin(), mid, xs.end());
  const double hi = *mid;
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(xs.begin(), mid);
  return 0.5 * (lo + hi);
}

// Fractional digits used by the column's raw text (at least 2).
int column_decimals(const Column& col) {
  int best = 2;
  const std::size_t n = std::min<std::size_t>(col.size(), 1000);
  for (std::size_t r = 0; r < n; ++r) {
    if (col.is_missing(r)) continue;
    const auto raw = col.raw(r);
    const auto dot = raw.find('.');
    if (dot == std::string_view::npos) continue;
    auto end = raw.find_first_of("eE", dot);
    if (end == std::string_view::npos) end = raw.size();
    else best = std::max(best, 6);
    best = std::max(best, static_cast<int>(end - dot - 1));
  }
  return std::min(best, 10);
}

const Column& quantitative_target(const Relation& rel, const std::string& attr,
                                  ErrorCode code = ErrorCode::TargetTypeError) {
  const auto& col = rel.column(attr);
  if (!col.quantitative()) {
    throw Error(code, "attribute '" + attr + "' is not quantitative",
                json{{"attribute", attr}});
  }
  return col;
}

std::vector<double> present_values(const Column& col) {
  std::vector<double> out;
  out.reserve(col.size());
  for (double v : col.values()) {
    if (!std::isnan(v)) out.push_back(v);
  }
  return out;
}

// Picks `count` distinct rows from the candidates, uniformly.
std::vector<RowId> sample_rows(std::vector<RowId> candidates, std::size_t count, Rng& rng) {
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + rng.below(candidates.size() - i);
    std::swap(candidates[i], candidates[j]);
  }
  candidates.resize(count);
  return candidates;
}

RelationPtr rebuild(const Relation& rel, const std::map<std::string, std::map<RowId, std::string>>& edits) {
  std::vector<Column> cols;
  cols.reserve(rel.n_columns());
  for (const auto& col : rel.columns()) {
    auto it = edits.find(col.name());
    if (it == edits.end()) {
      cols.push_back(col);
      continue;
    }
    TextColumn text;
    text.reserve(col.size(), col.raw_text().bytes().size() + it->second.size() * 16);
    auto next = it->second.begin();
    for (std::size_t r = 0; r < col.size(); ++r) {
      if (next != it->second.end() && next->first == r) {
        text.push_back(next->second);
        ++next;
      } else {
        text.push_back(col.raw(r));
      }
    }
    cols.push_back(Column::with_type(col.name(), std::move(text), col.type(), rel.options()));
  }
  Relation draft(rel.name(), cols, rel.options(), "");
  auto digest = sha256_hex(serialize_delimited(draft, rel.options()));
  return std::make_shared<const Relation>(rel.name(), std::move(cols), rel.options(), std::move(digest));
}

std::size_t injection_count(double rate, std::size_t n) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(rate * static_cast<double>(n))));
}

}  // namespace

void SchemaSpec::validate() const {
  if (attributes.empty()) throw Error(ErrorCode::InvalidSchema, "schema has no attributes");
  std::map<std::string, const AttributeSpec*> seen;
  for (const auto& a : attributes) {
    if (a.name.empty()) throw Error(ErrorCode::InvalidSchema, "attribute without a name");
    if (seen.count(a.name)) throw Error(ErrorCode::InvalidSchema, "duplicate attribute '" + a.name + "'");
    if (a.decimals < 0 || a.decimals > 10) throw Error(ErrorCode::InvalidSchema, "decimals out of range for '" + a.name + "'");
    auto check_sd = [&](const NormalGen& g) {
      if (!(g.sd > 0.0) || !std::isfinite(g.mean) || !std::isfinite(g.sd)) {
        throw Error(ErrorCode::InvalidSchema, "bad normal parameters for '" + a.name + "'");
      }
    };
    if (const auto* g = std::get_if<NormalGen>(&a.gen)) {
      check_sd(*g);
    } else if (const auto* g = std::get_if<CategoricalGen>(&a.gen)) {
      if (g->levels.empty() || g->levels.size() != g->probs.size()) {
        throw Error(ErrorCode::InvalidSchema, "levels and probabilities of '" + a.name + "' do not match");
      }
      double total = 0.0;
      std::set<std::string> distinct;
      for (std::size_t i = 0; i < g->levels.size(); ++i) {
        double dummy;
        if (g->levels[i].empty() || parse_decimal(g->levels[i], dummy)) {
          throw Error(ErrorCode::InvalidSchema, "level '" + g->levels[i] + "' of '" + a.name + "' would not read back as a category");
        }
        if (!distinct.insert(g->levels[i]).second) throw Error(ErrorCode::InvalidSchema, "duplicate level in '" + a.name + "'");
        if (!(g->probs[i] >= 0.0)) throw Error(ErrorCode::InvalidSchema, "negative probability in '" + a.name + "'");
        total += g->probs[i];
      }
      if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorCode::InvalidSchema, "probabilities of '" + a.name + "' do not sum to 1");
    } else if (const auto* g = std::get_if<PerCategoryNormalGen>(&a.gen)) {
      auto it = seen.find(g->by);
      if (it == seen.end()) throw Error(ErrorCode::InvalidSchema, "'" + a.name + "' depends on unknown or later attribute '" + g->by + "'");
      const auto* cat = std::get_if<CategoricalGen>(&it->second->gen);
      if (!cat) throw Error(ErrorCode::InvalidSchema, "'" + g->by + "' is not categorical");
      for (const auto& level : cat->levels) {
        auto p = g->per_level.find(level);
        if (p == g->per_level.end()) throw Error(ErrorCode::InvalidSchema, "'" + a.name + "' has no parameters for level '" + level + "'");
        check_sd(p->second);
      }
    } else {
      const auto& lin = std::get<LinearGen>(a.gen);
      auto it = seen.find(lin.base);
      if (it == seen.end()) throw Error(ErrorCode::InvalidSchema, "'" + a.name + "' depends on unknown or later attribute '" + lin.base + "'");
      if (std::holds_alternative<CategoricalGen>(it->second->gen)) {
        throw Error(ErrorCode::InvalidSchema, "'" + lin.base + "' is not quantitative");
      }
      if (!(lin.noise_sd >= 0.0)) throw Error(ErrorCode::InvalidSchema, "negative noise for '" + a.name + "'");
    }
    seen.emplace(a.name, &a);
  }
}

SchemaSpec SchemaSpec::employees(std::uint64_t seed) {
  SchemaSpec s;
  s.seed = seed;
  s.attributes.push_back({"position", CategoricalGen{{"clerk", "analyst", "engineer", "manager"}, {0.4, 0.3, 0.2, 0.1}}});
  s.attributes.push_back({"salary", PerCategoryNormalGen{"position",
                                                         {{"clerk", {2000, 200}},
                                                          {"analyst", {4000, 300}},
                                                          {"engineer", {6500, 400}},
                                                          {"manager", {10000, 600}}}}});
  s.attributes.push_back({"age", NormalGen{42, 8}});
  s.attributes.push_back({"years", LinearGen{"age", -22, 1, 2}});
  return s;
}

json to_json(const SchemaSpec& s) {
  json attrs = json::array();
  for (const auto& a : s.attributes) {
    json j = {{"name", a.name}, {"decimals", a.decimals}};
    if (const auto* g = std::get_if<NormalGen>(&a.gen)) {
      j["normal"] = {{"mean", g->mean}, {"sd", g->sd}};
    } else if (const auto* g = std::get_if<CategoricalGen>(&a.gen)) {
      j["categorical"] = {{"levels", g->levels}, {"probs", g->probs}};
    } else if (const auto* g = std::get_if<PerCategoryNormalGen>(&a.gen)) {
      json levels = json::object();
      for (const auto& [level, p] : g->per_level) levels[level] = {{"mean", p.mean}, {"sd", p.sd}};
      j["per_category"] = {{"by", g->by}, {"levels", std::move(levels)}};
    } else {
      const auto& l = std::get<LinearGen>(a.gen);
      j["linear"] = {{"base", l.base}, {"intercept", l.intercept}, {"slope", l.slope}, {"noise_sd", l.noise_sd}};
    }
    attrs.push_back(std::move(j));
  }
  return {{"attributes", std::move(attrs)}, {"seed", s.seed}};
}

SchemaSpec schema_from_json(const json& j) {
  try {
    SchemaSpec s;
    s.seed = j.value("seed", std::uint64_t{0});
    for (const auto& a : j.at("attributes")) {
      AttributeSpec spec;
      spec.name = a.at("name").get<std::string>();
      spec.decimals = a.value("decimals", 2);
      if (a.contains("normal")) {
        spec.gen = NormalGen{a["normal"].at("mean").get<double>(), a["normal"].at("sd").get<double>()};
      } else if (a.contains("categorical")) {
        spec.gen = CategoricalGen{a["categorical"].at("levels").get<std::vector<std::string>>(),
                                  a["categorical"].at("probs").get<std::vector<double>>()};
      } else if (a.contains("per_category")) {
        PerCategoryNormalGen g;
        g.by = a["per_category"].at("by").get<std::string>();
        for (const auto& [level, p] : a["per_category"].at("levels").items()) {
          g.per_level[level] = NormalGen{p.at("mean").get<double>(), p.at("sd").get<double>()};
        }
        spec.gen = std::move(g);
      } else if (a.contains("linear")) {
        const auto& l = a["linear"];
        spec.gen = LinearGen{l.at("base").get<std::string>(), l.value("intercept", 0.0), l.value("slope", 1.0),
                             l.value("noise_sd", 0.0)};
      } else {
        throw Error(ErrorCode::InvalidSchema, "attribute '" + spec.name + "' has no generator");
      }
      s.attributes.push_back(std::move(spec));
    }
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidSchema, std::string("malformed schema: ") + e.what());
  }
}

RelationPtr generate_base(const SchemaSpec& schema, std::size_t n, const std::string& name) {
  schema.validate();
  if (n == 0) throw Error(ErrorCode::InvalidSchema, "fixture needs at least one row");
  Rng rng(schema.seed);
  LoadOptions opts;
  std::map<std::string, std::vector<double>> numeric;
  std::map<std::string, std::vector<std::size_t>> level_of;
  std::vector<Column> cols;
  for (const auto& a : schema.attributes) {
    TextColumn text;
    text.reserve(n, n * 10);
    if (const auto* g = std::get_if<CategoricalGen>(&a.gen)) {
      std::vector<double> cdf(g->probs.size());
      std::partial_sum(g->probs.begin(), g->probs.end(), cdf.begin());
      const double total = cdf.back();
      auto& codes = level_of[a.name];
      codes.resize(n);
      for (std::size_t r = 0; r < n; ++r) {
        const double u = rng.uniform() * total;
        auto k = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        k = std::min(k, cdf.size() - 1);
        codes[r] = k;
        text.push_back(g->levels[k]);
      }
      cols.push_back(Column::with_type(a.name, std::move(text), ColumnType::Categorical, opts));
      continue;
    }
    auto& vals = numeric[a.name];
    vals.resize(n);
    if (const auto* g = std::get_if<NormalGen>(&a.gen)) {
      for (auto& v : vals) v = rng.normal(g->mean, g->sd);
    } else if (const auto* g = std::get_if<PerCategoryNormalGen>(&a.gen)) {
      const auto& by = std::get<CategoricalGen>(
          std::find_if(schema.attributes.begin(), schema.attributes.end(),
                       [&](const AttributeSpec& x) { return x.name == g->by; })
              ->gen);
      std::vector<NormalGen> params;
      for (const auto& level : by.levels) params.push_back(g->per_level.at(level));
      const auto& codes = level_of.at(g->by);
      for (std::size_t r = 0; r < n; ++r) vals[r] = rng.normal(params[codes[r]].mean, params[codes[r]].sd);
    } else {
      const auto& l = std::get<LinearGen>(a.gen);
      const auto& base = numeric.at(l.base);
      for (std::size_t r = 0; r < n; ++r) vals[r] = l.intercept + l.slope * base[r] + rng.normal(0.0, l.noise_sd);
    }
    for (auto& v : vals) {
      auto s = format_fixed(v, a.decimals);
      parse_decimal(s, v);  // later generators see the value as written
      text.push_back(s);
    }
    cols.push_back(Column::with_type(a.name, std::move(text), ColumnType::Quantitative, opts));
  }
  Relation draft(name, cols, opts, "");
  auto digest = sha256_hex(serialize_delimited(draft, opts));
  return std::make_shared<const Relation>(name, std::move(cols), opts, std::move(digest));
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::V1: return "V1";
    case Variant::V2: return "V2";
    case Variant::V3: return "V3";
    case Variant::V4: return "V4";
  }
  return "V1";
}

Variant variant_from_string(std::string_view s) {
  if (s == "V1") return Variant::V1;
  if (s == "V2") return Variant::V2;
  if (s == "V3") return Variant::V3;
  if (s == "V4") return Variant::V4;
  throw Error(ErrorCode::InvalidDefect, "unknown defect variant '" + std::string(s) + "'");
}

void DefectSpec::validate() const {
  if (!(rate > 0.0)) throw Error(ErrorCode::InvalidDefect, "rate must be positive");
  if (rate > kMaxDefectRate) {
    throw Error(ErrorCode::RateTooHigh, "rate above " + std::to_string(kMaxDefectRate), json{{"rate", rate}});
  }
  if (!(magnitude > 0.0) || !std::isfinite(magnitude)) throw Error(ErrorCode::InvalidDefect, "magnitude must be positive");
  if (!(superimposition >= 0.0 && superimposition <= 1.0)) {
    throw Error(ErrorCode::InvalidDefect, "superimposition must lie in [0, 1]");
  }
  switch (variant) {
    case Variant::V1:
    case Variant::V2:
      if (target_attrs.size() != 1) throw Error(ErrorCode::InvalidDefect, "V1/V2 take exactly one target attribute");
      break;
    case Variant::V3:
      if (target_attrs.size() != 1) throw Error(ErrorCode::InvalidDefect, "V3 takes exactly one target attribute");
      if (!category_attr) throw Error(ErrorCode::InvalidDefect, "V3 needs a category attribute");
      break;
    case Variant::V4:
      if (target_attrs.size() < 2) throw Error(ErrorCode::InvalidDefect, "V4 needs at least two target attributes");
      if (target_attrs[0] == target_attrs[1]) throw Error(ErrorCode::InvalidDefect, "V4 targets must differ");
      break;
  }
}

json to_json(const DefectSpec& d) {
  json j = {{"variant", to_string(d.variant)},
            {"rate", d.rate},
            {"target_attrs", d.target_attrs},
            {"magnitude", d.magnitude},
            {"superimposition", d.superimposition}};
  j["category_attr"] = d.category_attr ? json(*d.category_attr) : json(nullptr);
  return j;
}

DefectSpec defect_from_json(const json& j) {
  try {
    DefectSpec d;
    d.variant = variant_from_string(j.at("variant").get<std::string>());
    d.rate = j.value("rate", d.rate);
    d.target_attrs = j.at("target_attrs").get<std::vector<std::string>>();
    d.magnitude = j.value("magnitude", d.magnitude);
    d.superimposition = j.value("superimposition", d.superimposition);
    if (j.contains("category_attr") && !j["category_attr"].is_null()) {
      d.category_attr = j["category_attr"].get<std::string>();
    }
    return d;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidDefect, std::string("malformed defect spec: ") + e.what());
  }
}

json to_json(const GroundTruth& g) {
  return {{"variant", to_string(g.variant)}, {"injected_rows", g.injected_rows}, {"original_values", g.original_values}};
}

GroundTruth ground_truth_from_json(const json& j) {
  try {
    GroundTruth g;
    g.variant = variant_from_string(j.at("variant").get<std::string>());
    g.injected_rows = j.at("injected_rows").get<std::vector<RowId>>();
    g.original_values = j.at("original_values").get<std::map<std::string, std::vector<std::string>>>();
    return g;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadRequest, std::string("malformed ground truth: ") + e.what());
  }
}

Injection inject(const Relation& rel, const DefectSpec& spec, std::uint64_t seed, std::span<const RowId> exclude) {
  spec.validate();
  Rng rng(seed);
  const std::set<RowId> excluded(exclude.begin(), exclude.end());
  std::vector<const Column*> targets;
  for (const auto& a : spec.target_attrs) targets.push_back(&quantitative_target(rel, a));
  const std::size_t count = injection_count(spec.rate, rel.n_rows());

  auto candidates_where = [&](auto&& pred) {
    std::vector<RowId> out;
    for (std::size_t r = 0; r < rel.n_rows(); ++r) {
      const auto row = static_cast<RowId>(r);
      if (excluded.count(row)) continue;
      bool ok = true;
      for (const auto* c : targets) ok = ok && !c->is_missing(r);
      if (ok && pred(r)) out.push_back(row);
    }
    if (out.size() < count) {
      throw Error(ErrorCode::RateTooHigh, "not enough eligible rows for the requested rate",
                  json{{"eligible", out.size()}, {"requested", count}});
    }
    return out;
  };

  std::map<std::string, std::map<RowId, std::string>> edits;
  GroundTruth truth;
  truth.variant = spec.variant;

  switch (spec.variant) {
    case Variant::V1:
    case Variant::V2: {
      const Column& col = *targets[0];
      const auto stats = mean_sd(present_values(col));
      if (!(stats.sd > 0.0)) throw Error(ErrorCode::ZeroSpread, "'" + col.name() + "' has no spread");
      const int decimals = column_decimals(col);
      const double step = std::pow(10.0, -decimals);
      const double shift = spec.magnitude * stats.sd;
      auto rows = sample_rows(candidates_where([](std::size_t) { return true; }), count, rng);
      for (auto row : rows) {
        const bool up = rng.coin();
        const double target = up ? stats.mean + shift : stats.mean - shift;
        // Round away from the mean so the written value keeps the full shift.
        double v = up ? std::ceil(target / step) * step : std::floor(target / step) * step;
        std::string text = format_fixed(v, decimals);
        double back = 0.0;
        parse_decimal(text, back);
        while (std::abs(back - stats.mean) < shift) {
          v += up ? step : -step;
          text = format_fixed(v, decimals);
          parse_decimal(text, back);
        }
        edits[col.name()][row] = text;
      }
      break;
    }
    case Variant::V3: {
      const Column& col = *targets[0];
      const Column& cat = rel.column(*spec.category_attr);
      if (!cat.categorical()) {
        throw Error(ErrorCode::TargetTypeError, "'" + cat.name() + "' is not categorical",
                    json{{"attribute", cat.name()}});
      }
      std::vector<std::vector<double>> per_level(cat.levels().size());
      for (std::size_t r = 0; r < rel.n_rows(); ++r) {
        if (cat.code(r) >= 0 && !col.is_missing(r)) per_level[cat.code(r)].push_back(col.value(r));
      }
      std::vector<MeanSd> stats(per_level.size());
      std::vector<std::int32_t> usable;
      for (std::size_t l = 0; l < per_level.size(); ++l) {
        stats[l] = mean_sd(per_level[l]);
        if (stats[l].n >= 2) usable.push_back(static_cast<std::int32_t>(l));
      }
      if (usable.size() < 2) throw Error(ErrorCode::InvalidDefect, "V3 needs at least two populated categories");
      std::sort(usable.begin(), usable.end(), [&](auto a, auto b) { return stats[a].mean < stats[b].mean; });
      std::vector<int> rank(per_level.size(), -1);
      for (std::size_t i = 0; i < usable.size(); ++i) rank[usable[i]] = static_cast<int>(i);
      const int decimals = column_decimals(col);
      auto rows = sample_rows(
          candidates_where([&](std::size_t r) { return cat.code(r) >= 0 && rank[cat.code(r)] >= 0; }), count, rng);
      for (auto row : rows) {
        const int pos = rank[cat.code(row)];
        int nb;
        if (pos == 0) nb = 1;
        else if (pos + 1 == static_cast<int>(usable.size())) nb = pos - 1;
        else nb = rng.coin() ? pos + 1 : pos - 1;
        const auto& own = stats[usable[pos]];
        const auto& other = stats[usable[nb]];
        const double s = other.mean >= own.mean ? 1.0 : -1.0;
        const double v = other.mean - s * (1.0 - spec.superimposition) * 2.0 * other.sd +
                         rng.uniform(-0.25, 0.25) * other.sd;
        edits[col.name()][row] = format_fixed(v, decimals);
      }
      break;
    }
    case Variant::V4: {
      const Column& xc = *targets[0];
      const Column& yc = *targets[1];
      std::vector<double> xs, ys;
      for (std::size_t r = 0; r < rel.n_rows(); ++r) {
        if (!xc.is_missing(r) && !yc.is_missing(r)) {
          xs.push_back(xc.value(r));
          ys.push_back(yc.value(r));
        }
      }
      const auto mx = mean_sd(xs);
      const auto my = mean_sd(ys);
      if (!(mx.sd > 0.0) || !(my.sd > 0.0)) throw Error(ErrorCode::ZeroSpread, "V4 targets need spread");
      double sxy = 0.0;
      for (std::size_t i = 0; i < xs.size(); ++i) sxy += (xs[i] - mx.mean) * (ys[i] - my.mean);
      const double slope = sxy / (static_cast<double>(xs.size() - 1) * mx.sd * mx.sd);
      const double intercept = my.mean - slope * mx.mean;
      double ss = 0.0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        const double e = ys[i] - (intercept + slope * xs[i]);
        ss += e * e;
      }
      const double resid_sd = std::sqrt(ss / static_cast<double>(xs.size() > 2 ? xs.size() - 2 : 1));
      const auto rx = robust_stats(xs);
      const auto ry = robust_stats(ys);
      if (!(rx.scale > 0.0) || !(ry.scale > 0.0) || !(resid_sd > 0.0)) {
        throw Error(ErrorCode::ZeroSpread, "V4 targets need spread");
      }
      const int dx = column_decimals(xc);
      const int dy = column_decimals(yc);
      auto rows = sample_rows(candidates_where([](std::size_t) { return true; }), count, rng);
      for (auto row : rows) {
        bool placed = false;
        for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
          const double x = rx.median + rx.scale * rng.uniform(-1.5, 1.5);
          const double fit = intercept + slope * x;
          const bool first_up = rng.coin();
          for (int k = 0; k < 2 && !placed; ++k) {
            const bool up = (k == 0) == first_up;
            const double y = fit + (up ? 1.0 : -1.0) * spec.magnitude * resid_sd;
            if (std::abs(y - ry.median) <= 1.9 * ry.scale) {
              edits[xc.name()][row] = format_fixed(x, dx);
              edits[yc.name()][row] = format_fixed(y, dy);
              placed = true;
            }
          }
        }
        if (!placed) {
          throw Error(ErrorCode::InvalidDefect,
                      "the dependency between the targets is too weak to hide a joint violation inside the marginals");
        }
      }
      break;
    }
  }

  for (const auto& [attr, by_row] : edits) {
    const auto& col = rel.column(attr);
    auto& orig = truth.original_values[attr];
    for (const auto& [row, text] : by_row) orig.emplace_back(col.raw(row));
    if (truth.injected_rows.empty()) {
      for (const auto& [row, text] : by_row) truth.injected_rows.push_back(row);
    }
  }
  return Injection{rebuild(rel, edits), std::move(truth)};
}

RelationPtr restore(const Relation& rel, const GroundTruth& truth) {
  std::map<std::string, std::map<RowId, std::string>> edits;
  for (const auto& [attr, values] : truth.original_values) {
    if (values.size() != truth.injected_rows.size()) {
      throw Error(ErrorCode::BadRequest, "ground truth values for '" + attr + "' do not match its rows");
    }
    rel.column(attr);
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (truth.injected_rows[i] >= rel.n_rows()) throw Error(ErrorCode::UnknownItem, "ground truth row out of range");
      edits[attr][truth.injected_rows[i]] = values[i];
    }
  }
  return rebuild(rel, edits);
}

RobustStats robust_stats(std::span<const double> values) {
  std::vector<double> xs;
  xs.reserve(values.size());
  for (double v : values) {
    if (!std::isnan(v)) xs.push_back(v);
  }
  RobustStats s;
  if (xs.empty()) return s;
  s.median = median_of(xs);
  for (auto& x : xs) x = std::abs(x - s.median);
  s.scale = 1.4826 * median_of(std::move(xs));
  return s;
}

std::vector<RowId> detect_univariate(const Relation& rel, const std::string& attr, double z) {
  const auto& col = quantitative_target(rel, attr, ErrorCode::TypeMismatch);
  const auto s = robust_stats(col.values());
  if (!(s.scale > 0.0)) throw Error(ErrorCode::ZeroSpread, "'" + attr + "' has zero median absolute deviation");
  std::vector<RowId> out;
  for (std::size_t r = 0; r < col.size(); ++r) {
    const double v = col.value(r);
    if (!std::isnan(v) && std::abs(v - s.median) / s.scale > z) out.push_back(static_cast<RowId>(r));
  }
  return out;
}

CategoryDetection detect_within_category(const Relation& rel, const std::string& attr, const std::string& by,
                                         double z) {
  const auto& col = quantitative_target(rel, attr, ErrorCode::TypeMismatch);
  const auto& cat = rel.column(by);
  if (!cat.categorical()) {
    throw Error(ErrorCode::TypeMismatch, "'" + by + "' is not categorical", json{{"attribute", by}});
  }
  std::vector<std::vector<RowId>> members(cat.levels().size());
  for (std::size_t r = 0; r < rel.n_rows(); ++r) {
    if (cat.code(r) >= 0 && !col.is_missing(r)) members[cat.code(r)].push_back(static_cast<RowId>(r));
  }
  CategoryDetection out;
  for (std::size_t l = 0; l < members.size(); ++l) {
    if (members[l].size() < 5) {
      out.warnings.push_back("skipped category '" + cat.levels()[l] + "' with " + std::to_string(members[l].size()) +
                             " values");
      continue;
    }
    std::vector<double> xs;
    xs.reserve(members[l].size());
    for (auto r : members[l]) xs.push_back(col.value(r));
    const auto s = robust_stats(xs);
    if (!(s.scale > 0.0)) {
      out.warnings.push_back("skipped category '" + cat.levels()[l] + "' with zero spread");
      continue;
    }
    for (auto r : members[l]) {
      if (std::abs(col.value(r) - s.median) / s.scale > z) out.rows.push_back(r);
    }
  }
  std::sort(out.rows.begin(), out.rows.end());
  return out;
}

std::vector<RowId> detect_joint(const Relation& rel, const std::vector<std::string>& attrs, double quantile) {
  if (attrs.empty()) throw Error(ErrorCode::InvalidDefect, "joint detection needs attributes");
  if (!(quantile > 0.0 && quantile < 1.0)) throw Error(ErrorCode::InvalidDefect, "quantile must lie in (0, 1)");
  std::vector<const Column*> cols;
  for (const auto& a : attrs) cols.push_back(&quantitative_target(rel, a, ErrorCode::TypeMismatch));
  const auto d = static_cast<Eigen::Index>(cols.size());
  std::vector<RowId> rows;
  for (std::size_t r = 0; r < rel.n_rows(); ++r) {
    bool ok = true;
    for (const auto* c : cols) ok = ok && !c->is_missing(r);
    if (ok) rows.push_back(static_cast<RowId>(r));
  }
  if (rows.size() <= cols.size()) throw Error(ErrorCode::SingularCovariance, "too few complete rows");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Eigen::Index k = 0; k < d; ++k) x(static_cast<Eigen::Index>(i), k) = cols[k]->value(rows[i]);
  }
  const Eigen::RowVectorXd mu = x.colwise().mean();
  x.rowwise() -= mu;
  Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(rows.size() - 1);
  const double eps = 1e-12 * std::max(cov.trace() / static_cast<double>(d), 1e-300);
  cov.diagonal().array() += eps;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || lo / hi < 1e-10) {
    throw Error(ErrorCode::SingularCovariance, "covariance of the attributes is singular",
                json{{"rcond", hi > 0.0 ? lo / hi : 0.0}});
  }
  const Eigen::MatrixXd inv = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
                              eig.eigenvectors().transpose();
  const double threshold = boost::math::quantile(boost::math::chi_squared(static_cast<double>(d)), quantile);
  std::vector<RowId> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Eigen::VectorXd v = x.row(static_cast<Eigen::Index>(i)).transpose();
    if (v.dot(inv * v) > threshold) out.push_back(rows[i]);
  }
  return out;
}

Score score(std::span<const RowId> detected, std::span<const RowId> truth) {
  const std::set<RowId> det(detected.begin(), detected.end());
  const std::set<RowId> tru(truth.begin(), truth.end());
  Score s;
  for (auto r : det) {
    if (tru.count(r)) ++s.true_positives;
  }
  s.false_positives = det.size() - s.true_positives;
  s.false_negatives = tru.size() - s.true_positives;
  if (det.empty() && tru.empty()) {
    s.precision = s.recall = s.f1 = 1.0;
    return s;
  }
  s.precision = det.empty() ? 0.0 : static_cast<double>(s.true_positives) / static_cast<double>(det.size());
  s.recall = tru.empty() ? 1.0 : static_cast<double>(s.true_positives) / static_cast<double>(tru.size());
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

json to_json(const Score& s) {
  return {{"precision", s.precision},
          {"recall", s.recall},
          {"f1", s.f1},
          {"true_positives", s.true_positives},
          {"false_positives", s.false_positives},
          {"false_negatives", s.false_negatives}};
}

}  // namespace dqlens
