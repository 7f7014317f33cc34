#pragma once

#include "dqlens/relation.hpp"
#include "dqlens/selection.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dqlens {

// Synthetic fixtures. Every attribute is drawn by one generator; generators
// may only depend on attributes listed before them.
struct NormalGen {
  double mean = 0.0;
  double sd = 1.0;
};

// Normal with parameters chosen by the level of an earlier categorical
// attribute.
struct PerCategoryNormalGen {
  std::string by;
  std::map<std::string, NormalGen> per_level;
};

struct CategoricalGen {
  std::vector<std::string> levels;
  std::vector<double> probs;
};

// intercept + slope * base + N(0, noise_sd), base being an earlier
// quantitative attribute.
struct LinearGen {
  std::string base;
  double intercept = 0.0;
  double slope = 1.0;
  double noise_sd = 0.0;
};

using Generator = std::variant<NormalGen, PerCategoryNormalGen, CategoricalGen, LinearGen>;

struct AttributeSpec {
  std::string name;
  Generator gen;
  int decimals = 2;
};

struct SchemaSpec {
  std::vector<AttributeSpec> attributes;
  std::uint64_t seed = 0;

  // Throws InvalidSchema.
  void validate() const;
  // position, salary (per position), age, years (linear in age).
  static SchemaSpec employees(std::uint64_t seed = 0);
};

nlohmann::json to_json(const SchemaSpec& s);
SchemaSpec schema_from_json(const nlohmann::json& j);

// Deterministic for a given (schema, n). Throws InvalidSchema.
RelationPtr generate_base(const SchemaSpec& schema, std::size_t n, const std::string& name = "fixture");

enum class Variant { V1, V2, V3, V4 };
std::string_view to_string(Variant v);
Variant variant_from_string(std::string_view s);

// V1/V2: a quantitative value moved magnitude sample standard deviations
// from the attribute mean. V3: a value moved into the range of a
// neighbouring category (superimposition 0 keeps it at the edge of that
// range, 1 puts it at the neighbour's mean). V4: a pair of values that
// breaks the linear dependency between two attributes while each stays
// inside its own marginal range.
struct DefectSpec {
  Variant variant = Variant::V1;
  double rate = 0.001;
  std::vector<std::string> target_attrs;
  double magnitude = 8.0;
  double superimposition = 0.5;
  std::optional<std::string> category_attr;

  // Throws InvalidDefect or RateTooHigh.
  void validate() const;
};

inline constexpr double kMaxDefectRate = 0.05;

nlohmann::json to_json(const DefectSpec& d);
DefectSpec defect_from_json(const nlohmann::json& j);

struct GroundTruth {
  Variant variant = Variant::V1;
  std::vector<RowId> injected_rows;  // sorted
  // Original raw text of each target attribute, aligned with injected_rows.
  std::map<std::string, std::vector<std::string>> original_values;
};

nlohmann::json to_json(const GroundTruth& g);
GroundTruth ground_truth_from_json(const nlohmann::json& j);

struct Injection {
  RelationPtr relation;
  GroundTruth truth;
};

// Rows in `exclude` (earlier injections) are never chosen again. Throws
// InvalidDefect, RateTooHigh, UnknownAttribute or TargetTypeError.
Injection inject(const Relation& rel, const DefectSpec& spec, std::uint64_t seed,
                 std::span<const RowId> exclude = {});

// Puts the original values back.
RelationPtr restore(const Relation& rel, const GroundTruth& truth);

// Median and 1.4826 * MAD of the non-missing values.
struct RobustStats {
  double median = 0.0;
  double scale = 0.0;
};
RobustStats robust_stats(std::span<const double> values);

// Rows whose robust z-score exceeds z. Throws ZeroSpread or TypeMismatch.
std::vector<RowId> detect_univariate(const Relation& rel, const std::string& attr, double z);

struct CategoryDetection {
  std::vector<RowId> rows;
  std::vector<std::string> warnings;
};
// Robust z-scores computed within each level of `by`; levels with fewer than
// five values are skipped with a warning.
CategoryDetection detect_within_category(const Relation& rel, const std::string& attr, const std::string& by,
                                         double z);

// Rows whose squared Mahalanobis distance exceeds the chi-squared quantile
// with d degrees of freedom. Rows missing any attribute are skipped. Throws
// SingularCovariance.
std::vector<RowId> detect_joint(const Relation& rel, const std::vector<std::string>& attrs, double quantile);

struct Score {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t true_positives = 0;
  std::uint64_t false_positives = 0;
  std::uint64_t false_negatives = 0;
};

// Empty detection scores precision 0 unless the truth is also empty, which
// scores 1 throughout.
Score score(std::span<const RowId> detected, std::span<const RowId> truth);

nlohmann::json to_json(const Score& s);

}  // namespace dqlens
