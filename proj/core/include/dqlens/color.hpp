#pragma once

#include <nlohmann/json.hpp>

#include <string>

namespace dqlens {

struct HslColor {
  double h = 0.0;  // degrees, [0, 360)
  double s = 0.0;  // percent
  double l = 0.0;  // percent

  friend bool operator==(const HslColor&, const HslColor&) = default;
};

enum class ColorMode { Unsegmented, Segmented };

struct ColorScaleSpec {
  ColorMode mode = ColorMode::Unsegmented;
  int segments = 7;
  double base_hue = 210.0;

  // Throws InvalidScene.
  void validate() const;
  friend bool operator==(const ColorScaleSpec&, const ColorScaleSpec&) = default;
};

// `degenerate` reports vmin == vmax; the mid color (or segment 0) is returned.
struct ScaledColor {
  HslColor color;
  bool degenerate = false;
  int segment = -1;
};

// Continuous, order-isomorphic scale: hue fixed at base_hue, s = 70, lightness
// falling linearly from 90 (vmin) to 25 (vmax). Values outside the domain are
// clamped.
ScaledColor color_unsegmented(double v, double vmin, double vmax, const ColorScaleSpec& spec = {});

// k equal-width segments over the domain, hue 0..270 degrees, s = 70, l = 50.
ScaledColor color_segmented(double v, double vmin, double vmax, int k);

// Colors a value with the scene's configured scale.
ScaledColor color_for(double v, double vmin, double vmax, const ColorScaleSpec& spec);

inline constexpr HslColor kNeutralColor{0.0, 0.0, 75.0};

std::string to_css(const HslColor& c);
nlohmann::json to_json(const HslColor& c);

}  // namespace dqlens
