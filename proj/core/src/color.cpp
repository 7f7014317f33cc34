#include "dqlens/color.hpp"

#include "dqlens/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace dqlens {

void ColorScaleSpec::validate() const {
  if (mode == ColorMode::Segmented && segments < 2) {
    throw Error(ErrorCode::InvalidScene, "segmented color scale needs at least 2 segments");
  }
  if (!(base_hue >= 0.0 && base_hue < 360.0)) {
    throw Error(ErrorCode::InvalidScene, "base hue must lie in [0, 360)");
  }
}

ScaledColor color_unsegmented(double v, double vmin, double vmax, const ColorScaleSpec& spec) {
  ScaledColor out;
  out.color.h = spec.base_hue;
  out.color.s = 70.0;
  if (!(vmax > vmin)) {
    out.color.l = 57.5;
    out.degenerate = true;
    return out;
  }
  const double x = std::clamp(v, vmin, vmax);
  out.color.l = 90.0 - 65.0 * (x - vmin) / (vmax - vmin);
  return out;
}

ScaledColor color_segmented(double v, double vmin, double vmax, int k) {
  if (k < 2) throw Error(ErrorCode::InvalidScene, "segmented color scale needs at least 2 segments");
  ScaledColor out;
  out.color.s = 70.0;
  out.color.l = 50.0;
  int i = 0;
  if (!(vmax > vmin)) {
    out.degenerate = true;
  } else {
    const double x = std::clamp(v, vmin, vmax);
    const double t = std::floor(k * (x - vmin) / (vmax - vmin));
    i = std::min(static_cast<int>(t), k - 1);
  }
  out.segment = i;
  out.color.h = (270.0 * i) / (k - 1);
  return out;
}

ScaledColor color_for(double v, double vmin, double vmax, const ColorScaleSpec& spec) {
  if (spec.mode == ColorMode::Segmented) return color_segmented(v, vmin, vmax, spec.segments);
  return color_unsegmented(v, vmin, vmax, spec);
}

std::string to_css(const HslColor& c) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "hsl(%.6g, %.6g%%, %.6g%%)", c.h, c.s, c.l);
  return buf;
}

nlohmann::json to_json(const HslColor& c) { return {{"h", c.h}, {"s", c.s}, {"l", c.l}}; }

}  // namespace dqlens
