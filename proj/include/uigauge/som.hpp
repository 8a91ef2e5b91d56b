#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "uigauge/dataset.hpp"
#include "uigauge/raster.hpp"

namespace uigauge {

enum class MarkerType { Box, BoxWithArrow };

struct MarkerColor {
  std::string name;  // used in prompt text; never contains digits
  Rgb rgb;
};

/// Looks up a palette color by name ("red") or maps "#rrggbb" to the nearest
/// palette entry's name while keeping the exact RGB value.
std::optional<MarkerColor> parse_marker_color(std::string_view text);
std::optional<MarkerType> parse_marker_type(std::string_view text);

struct MarkerStyle {
  MarkerColor color{"red", {255, 0, 0}};
  MarkerType marker_type = MarkerType::BoxWithArrow;
  int stroke_width = 3;
  int arrow_length = 40;

  void validate() const;
};

/// Renders one Set-of-Mark prompt image. The outline is drawn `stroke_width`
/// pixels inward from every box edge. With an arrow, the box edge facing the
/// image interior is the one opposite the image border nearest to the box
/// centroid (ties resolved left, right, top, bottom). A filled triangular head
/// has its tip on the pixel adjacent to that edge's midpoint, and a straight
/// shaft of `arrow_length` pixels continues away from the box, perpendicular to
/// the nearest border. Everything is clipped to the canvas; no anti-aliasing.
Raster render_som(const Raster& image, const BoundingBox& box, const MarkerStyle& style);

/// Geometry of the arrow head used by render_som, exposed for tests.
struct ArrowGeometry {
  int head_length;
  int head_half_width;
};
ArrowGeometry arrow_geometry(const MarkerStyle& style);

std::string color_phrase(const MarkerStyle& style);
std::string marker_phrase(const MarkerStyle& style);

/// "red bounding box", "green bounding box with arrow".
std::string style_phrase(const MarkerStyle& style);

}  // namespace uigauge
