#include "uigauge/som.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <limits>

#include "uigauge/error.hpp"

namespace uigauge {

namespace {

constexpr std::array<std::pair<const char*, Rgb>, 12> kPalette = {{
    {"red", {255, 0, 0}},
    {"green", {0, 200, 0}},
    {"blue", {0, 0, 255}},
    {"yellow", {255, 255, 0}},
    {"orange", {255, 165, 0}},
    {"magenta", {255, 0, 255}},
    {"cyan", {0, 255, 255}},
    {"purple", {128, 0, 128}},
    {"pink", {255, 105, 180}},
    {"white", {255, 255, 255}},
    {"black", {0, 0, 0}},
    {"gray", {128, 128, 128}},
}};

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

void fill_span(Raster& img, int x, int y, Rgb c) {
  if (img.in_bounds(x, y)) img.set(x, y, c);
}

}  // namespace

std::optional<MarkerColor> parse_marker_color(std::string_view text) {
  std::string lowered(text);
  for (auto& ch : lowered) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  for (const auto& [name, rgb] : kPalette) {
    if (lowered == name) return MarkerColor{name, rgb};
  }
  if (lowered.size() == 7 && lowered[0] == '#') {
    int v[6];
    for (int i = 0; i < 6; ++i) {
      v[i] = hex_value(lowered[static_cast<std::size_t>(i + 1)]);
      if (v[i] < 0) return std::nullopt;
    }
    Rgb rgb{static_cast<std::uint8_t>(v[0] * 16 + v[1]), static_cast<std::uint8_t>(v[2] * 16 + v[3]),
            static_cast<std::uint8_t>(v[4] * 16 + v[5])};
    const char* best = kPalette[0].first;
    long best_d = std::numeric_limits<long>::max();
    for (const auto& [name, p] : kPalette) {
      long dr = rgb.r - p.r, dg = rgb.g - p.g, db = rgb.b - p.b;
      long d = dr * dr + dg * dg + db * db;
      if (d < best_d) {
        best_d = d;
        best = name;
      }
    }
    return MarkerColor{best, rgb};
  }
  return std::nullopt;
}

std::optional<MarkerType> parse_marker_type(std::string_view text) {
  if (text == "box") return MarkerType::Box;
  if (text == "box-with-arrow" || text == "arrow" || text == "box_with_arrow") return MarkerType::BoxWithArrow;
  return std::nullopt;
}

void MarkerStyle::validate() const {
  if (stroke_width < 1) throw Error(ErrorCode::ConfigError, "marker stroke_width must be >= 1");
  if (arrow_length < 0) throw Error(ErrorCode::ConfigError, "marker arrow_length must be >= 0");
}

ArrowGeometry arrow_geometry(const MarkerStyle& style) {
  return {std::max(4, 3 * style.stroke_width), std::max(2, 2 * style.stroke_width)};
}

Raster render_som(const Raster& image, const BoundingBox& box, const MarkerStyle& style) {
  style.validate();
  if (!box.valid_for(image.width(), image.height())) {
    throw Error(ErrorCode::BoxOutOfBounds, "marker box lies outside the image");
  }
  Raster out = image;
  const Rgb c = style.color.rgb;

  // Outline, drawn inward.
  const int sx = std::min(style.stroke_width, box.width());
  const int sy = std::min(style.stroke_width, box.height());
  for (int y = box.y0; y < box.y1; ++y) {
    bool horizontal_band = y < box.y0 + sy || y >= box.y1 - sy;
    if (horizontal_band) {
      for (int x = box.x0; x < box.x1; ++x) out.set(x, y, c);
    } else {
      for (int x = box.x0; x < box.x0 + sx; ++x) out.set(x, y, c);
      for (int x = box.x1 - sx; x < box.x1; ++x) out.set(x, y, c);
    }
  }

  if (style.marker_type != MarkerType::BoxWithArrow) return out;

  const PointF center = box.centroid();
  const double d_left = center.x;
  const double d_right = image.width() - center.x;
  const double d_top = center.y;
  const double d_bottom = image.height() - center.y;
  const double nearest = std::min({d_left, d_right, d_top, d_bottom});

  // Tip pixel and unit direction pointing away from the box along the shaft.
  const int mid_x = (box.x0 + box.x1 - 1) / 2;
  const int mid_y = (box.y0 + box.y1 - 1) / 2;
  int tip_x, tip_y, dx, dy;
  if (nearest == d_left) {
    tip_x = box.x1, tip_y = mid_y, dx = 1, dy = 0;
  } else if (nearest == d_right) {
    tip_x = box.x0 - 1, tip_y = mid_y, dx = -1, dy = 0;
  } else if (nearest == d_top) {
    tip_x = mid_x, tip_y = box.y1, dx = 0, dy = 1;
  } else {
    tip_x = mid_x, tip_y = box.y0 - 1, dx = 0, dy = -1;
  }
  const int px = -dy;  // perpendicular
  const int py = dx;

  const ArrowGeometry g = arrow_geometry(style);
  for (int t = 0; t < g.head_length; ++t) {
    int half = t * g.head_half_width / (g.head_length - 1);
    for (int s = -half; s <= half; ++s) fill_span(out, tip_x + t * dx + s * px, tip_y + t * dy + s * py, c);
  }
  const int lo = -(style.stroke_width - 1) / 2;
  const int hi = style.stroke_width / 2;
  for (int t = g.head_length; t < g.head_length + style.arrow_length; ++t) {
    for (int s = lo; s <= hi; ++s) fill_span(out, tip_x + t * dx + s * px, tip_y + t * dy + s * py, c);
  }
  return out;
}

std::string color_phrase(const MarkerStyle& style) { return style.color.name; }

std::string marker_phrase(const MarkerStyle& style) {
  return style.marker_type == MarkerType::Box ? "bounding box" : "bounding box with arrow";
}

std::string style_phrase(const MarkerStyle& style) { return color_phrase(style) + " " + marker_phrase(style); }

}  // namespace uigauge
