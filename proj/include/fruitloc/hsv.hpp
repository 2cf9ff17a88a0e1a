#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <vector>

#include "fruitloc/detection.hpp"
#include "fruitloc/geometry.hpp"
#include "fruitloc/image.hpp"

namespace fruitloc::hsv {

// Hue in degrees [0, 360); saturation and value as fractions in [0, 1].
struct HsvPixel {
  double h = 0.0;
  double s = 0.0;
  double v = 0.0;
};

// Hexcone conversion of channels already scaled to [0, 1]. Hue is 0 for
// achromatic input and saturation is 0 when value is 0.
HsvPixel rgb_to_hsv(double r, double g, double b);
HsvPixel rgb_to_hsv(std::uint8_t r, std::uint8_t g, std::uint8_t b);
inline HsvPixel rgb_to_hsv(Rgb c) { return rgb_to_hsv(c.r, c.g, c.b); }

struct UnitRgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;
};

// Inverse hexcone conversion, channels in [0, 1].
UnitRgb hsv_to_unit_rgb(const HsvPixel& p);
// Inverse conversion rounded to 8 bits.
Rgb hsv_to_rgb(const HsvPixel& p);

// Closed box in HSV space. When h_lo > h_hi the hue interval wraps through
// 360 -> 0.
struct HsvRange {
  double h_lo = 0.0;
  double h_hi = 360.0;
  double s_lo = 0.0;
  double s_hi = 1.0;
  double v_lo = 0.0;
  double v_hi = 1.0;

  void validate() const;
  bool contains(const HsvPixel& p) const;
};

struct LabelledRange {
  detect::FruitLabel label = detect::FruitLabel::apple();
  HsvRange range;
};

LabelledRange default_apple_range();
LabelledRange default_orange_range();
std::vector<LabelledRange> default_ranges();

// {"label": "apple", "h": [lo, hi], "s": [lo, hi], "v": [lo, hi]}
LabelledRange range_from_json(const nlohmann::json& doc);
nlohmann::ordered_json range_to_json(const LabelledRange& range);
// A file holds either one range object or an array of them.
std::vector<LabelledRange> read_ranges(const std::filesystem::path& path);

struct BinaryMask {
  BinaryMask(int width, int height)
      : width(width), height(height), bits(static_cast<std::size_t>(width) * height, 0) {}

  bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool on = true) {
    bits[static_cast<std::size_t>(y) * width + x] = on ? 1 : 0;
  }
  std::size_t count() const;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

  int width;
  int height;
  std::vector<std::uint8_t> bits;
};

BinaryMask threshold_mask(const RgbImage& image, const HsvRange& range);

// Square structuring element of side 2r + 1. Pixels outside the image are
// ignored, i.e. the window is clipped at the border.
BinaryMask erode(const BinaryMask& mask, int radius);
BinaryMask dilate(const BinaryMask& mask, int radius);
BinaryMask morphological_open(const BinaryMask& mask, int radius);
BinaryMask morphological_close(const BinaryMask& mask, int radius);
// Opening followed by closing. radius 0 returns the mask unchanged.
BinaryMask morphological_open_close(const BinaryMask& mask, int radius);

struct PixelCoord {
  int x = 0;
  int y = 0;

  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

// Outer boundary of one 8-connected component, traced clockwise (on screen)
// by Moore-neighbour following from the topmost-then-leftmost pixel. Components
// thinner than three boundary pixels yield one or two points.
struct Contour {
  std::vector<geometry::PixelPoint> points;
  std::size_t area = 0;  // pixel count of the filled component
  PixelCoord anchor;     // topmost, then leftmost pixel
};

// Ordered by area descending, ties by anchor in raster order.
std::vector<Contour> extract_components(const BinaryMask& mask, std::size_t min_area);

// Bounding box = axis-aligned extent of the contour, confidence 1.0.
std::vector<detect::Detection> detections_from_contours(const std::vector<Contour>& contours,
                                                        const detect::FruitLabel& label);

struct SegmentationParams {
  int kernel_radius = 2;
  std::size_t min_area = 400;
};

}  // namespace fruitloc::hsv
