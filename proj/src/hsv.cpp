#include "fruitloc/hsv.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>

#include "fruitloc/error.hpp"
#include "fruitloc/io.hpp"

namespace fruitloc::hsv {

HsvPixel rgb_to_hsv(double r, double g, double b) {
  const double max = std::max({r, g, b});
  const double min = std::min({r, g, b});
  const double delta = max - min;

  HsvPixel out;
  out.v = max;
  out.s = max > 0.0 ? delta / max : 0.0;
  if (delta > 0.0) {
    if (max == r) {
      out.h = 60.0 * ((g - b) / delta);
    } else if (max == g) {
      out.h = 60.0 * ((b - r) / delta) + 120.0;
    } else {
      out.h = 60.0 * ((r - g) / delta) + 240.0;
    }
    if (out.h < 0.0) out.h += 360.0;
    if (out.h >= 360.0) out.h -= 360.0;
  }
  return out;
}

HsvPixel rgb_to_hsv(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return rgb_to_hsv(r / 255.0, g / 255.0, b / 255.0);
}

UnitRgb hsv_to_unit_rgb(const HsvPixel& p) {
  const double c = p.v * p.s;
  const double hp = std::fmod(p.h, 360.0) / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  const double m = p.v - c;
  double r = 0.0, g = 0.0, b = 0.0;
  switch (static_cast<int>(hp)) {
    case 0:
      r = c;
      g = x;
      break;
    case 1:
      r = x;
      g = c;
      break;
    case 2:
      g = c;
      b = x;
      break;
    case 3:
      g = x;
      b = c;
      break;
    case 4:
      r = x;
      b = c;
      break;
    default:
      r = c;
      b = x;
      break;
  }
  return {r + m, g + m, b + m};
}

Rgb hsv_to_rgb(const HsvPixel& p) {
  const UnitRgb u = hsv_to_unit_rgb(p);
  auto q = [](double c) {
    return static_cast<std::uint8_t>(std::clamp(std::nearbyint(c * 255.0), 0.0, 255.0));
  };
  return {q(u.r), q(u.g), q(u.b)};
}

void HsvRange::validate() const {
  auto in = [](double a, double lo, double hi) { return a >= lo && a <= hi; };
  if (!in(h_lo, 0.0, 360.0) || !in(h_hi, 0.0, 360.0)) {
    throw Error(ErrorCode::kInvalidArgument, "hue bounds must lie in [0, 360]");
  }
  if (!in(s_lo, 0.0, 1.0) || !in(s_hi, 0.0, 1.0) || s_lo > s_hi) {
    throw Error(ErrorCode::kInvalidArgument, "saturation bounds must satisfy 0 <= lo <= hi <= 1");
  }
  if (!in(v_lo, 0.0, 1.0) || !in(v_hi, 0.0, 1.0) || v_lo > v_hi) {
    throw Error(ErrorCode::kInvalidArgument, "value bounds must satisfy 0 <= lo <= hi <= 1");
  }
}

bool HsvRange::contains(const HsvPixel& p) const {
  const bool hue_ok = h_lo <= h_hi ? (p.h >= h_lo && p.h <= h_hi) : (p.h >= h_lo || p.h <= h_hi);
  return hue_ok && p.s >= s_lo && p.s <= s_hi && p.v >= v_lo && p.v <= v_hi;
}

LabelledRange default_apple_range() {
  return {detect::FruitLabel::apple(), HsvRange{345.0, 10.0, 0.45, 1.0, 0.3, 1.0}};
}

LabelledRange default_orange_range() {
  return {detect::FruitLabel::orange(), HsvRange{10.0, 45.0, 0.5, 1.0, 0.4, 1.0}};
}

std::vector<LabelledRange> default_ranges() {
  return {default_apple_range(), default_orange_range()};
}

LabelledRange range_from_json(const nlohmann::json& doc) {
  try {
    auto pair = [&](const char* key) {
      const auto& a = doc.at(key);
      if (!a.is_array() || a.size() != 2) {
        throw Error(ErrorCode::kInvalidArgument,
                    std::string("HSV range field '") + key + "' must be [lo, hi]");
      }
      return std::pair{a[0].get<double>(), a[1].get<double>()};
    };
    LabelledRange out;
    out.label = detect::FruitLabel::from_name(doc.at("label").get<std::string>());
    std::tie(out.range.h_lo, out.range.h_hi) = pair("h");
    std::tie(out.range.s_lo, out.range.s_hi) = pair("s");
    std::tie(out.range.v_lo, out.range.v_hi) = pair("v");
    out.range.validate();
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("invalid HSV range: ") + e.what());
  }
}

nlohmann::ordered_json range_to_json(const LabelledRange& r) {
  nlohmann::ordered_json doc;
  doc["label"] = r.label.name();
  doc["h"] = {r.range.h_lo, r.range.h_hi};
  doc["s"] = {r.range.s_lo, r.range.s_hi};
  doc["v"] = {r.range.v_lo, r.range.v_hi};
  return doc;
}

std::vector<LabelledRange> read_ranges(const std::filesystem::path& path) {
  const nlohmann::json doc = io::read_json_file(path);
  std::vector<LabelledRange> out;
  if (doc.is_array()) {
    for (const auto& item : doc) out.push_back(range_from_json(item));
  } else {
    out.push_back(range_from_json(doc));
  }
  return out;
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1));
}

BinaryMask threshold_mask(const RgbImage& image, const HsvRange& range) {
  BinaryMask mask(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      if (range.contains(rgb_to_hsv(image.at(x, y)))) mask.set(x, y);
    }
  }
  return mask;
}

namespace {

// One separable pass along rows (horizontal) or columns. For erosion a pixel
// survives when every in-image pixel of its window is set; for dilation when
// any is.
BinaryMask window_pass(const BinaryMask& in, int radius, bool horizontal, bool erosion) {
  BinaryMask out(in.width, in.height);
  const int lines = horizontal ? in.height : in.width;
  const int len = horizontal ? in.width : in.height;
  std::vector<int> prefix(static_cast<std::size_t>(len) + 1);
  for (int line = 0; line < lines; ++line) {
    prefix[0] = 0;
    for (int i = 0; i < len; ++i) {
      const bool bit = horizontal ? in.at(i, line) : in.at(line, i);
      prefix[i + 1] = prefix[i] + (bit ? 1 : 0);
    }
    for (int i = 0; i < len; ++i) {
      const int lo = std::max(0, i - radius);
      const int hi = std::min(len - 1, i + radius);
      const int set = prefix[hi + 1] - prefix[lo];
      const bool on = erosion ? set == hi - lo + 1 : set > 0;
      if (horizontal) {
        out.set(i, line, on);
      } else {
        out.set(line, i, on);
      }
    }
  }
  return out;
}

void check_radius(int radius) {
  if (radius < 0) {
    throw Error(ErrorCode::kInvalidArgument, "kernel radius must be >= 0");
  }
}

}  // namespace

BinaryMask erode(const BinaryMask& mask, int radius) {
  check_radius(radius);
  if (radius == 0) return mask;
  return window_pass(window_pass(mask, radius, true, true), radius, false, true);
}

BinaryMask dilate(const BinaryMask& mask, int radius) {
  check_radius(radius);
  if (radius == 0) return mask;
  return window_pass(window_pass(mask, radius, true, false), radius, false, false);
}

BinaryMask morphological_open(const BinaryMask& mask, int radius) {
  return dilate(erode(mask, radius), radius);
}

BinaryMask morphological_close(const BinaryMask& mask, int radius) {
  return erode(dilate(mask, radius), radius);
}

BinaryMask morphological_open_close(const BinaryMask& mask, int radius) {
  check_radius(radius);
  if (radius == 0) return mask;
  return morphological_close(morphological_open(mask, radius), radius);
}

namespace {

// Clockwise on screen (y grows downwards), starting west.
constexpr std::array<PixelCoord, 8> kMoore = {{
    {-1, 0},
    {-1, -1},
    {0, -1},
    {1, -1},
    {1, 0},
    {1, 1},
    {0, 1},
    {-1, 1},
}};

int direction_of(int dx, int dy) {
  for (int d = 0; d < 8; ++d) {
    if (kMoore[d].x == dx && kMoore[d].y == dy) return d;
  }
  return 0;
}

std::vector<geometry::PixelPoint> trace_boundary(const std::vector<int>& labels, int width,
                                                 int height, int label, PixelCoord start,
                                                 std::size_t area) {
  auto inside = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < width && y < height &&
           labels[static_cast<std::size_t>(y) * width + x] == label;
  };
  // Finds the next boundary pixel clockwise from the backtrack direction.
  // Returns false for an isolated pixel.
  auto step = [&](PixelCoord p, int& backtrack, PixelCoord& next) {
    for (int k = 1; k <= 8; ++k) {
      const int d = (backtrack + k) % 8;
      const PixelCoord q{p.x + kMoore[d].x, p.y + kMoore[d].y};
      if (inside(q.x, q.y)) {
        const PixelCoord& prev = kMoore[(d + 7) % 8];
        backtrack = direction_of(p.x + prev.x - q.x, p.y + prev.y - q.y);
        next = q;
        return true;
      }
    }
    return false;
  };

  std::vector<geometry::PixelPoint> points;
  auto push = [&](PixelCoord c) {
    points.push_back({static_cast<double>(c.x), static_cast<double>(c.y)});
  };
  push(start);

  // The anchor is the first pixel in raster order, so its west neighbour is
  // background.
  int backtrack = 0;
  PixelCoord first_move;
  if (!step(start, backtrack, first_move)) return points;
  push(first_move);

  PixelCoord p = first_move;
  const std::size_t limit = 4 * area + 16;
  while (points.size() <= limit) {
    PixelCoord q;
    step(p, backtrack, q);
    if (p == start && q == first_move) {
      points.pop_back();  // start was appended again on re-entry
      break;
    }
    push(q);
    p = q;
  }
  return points;
}

}  // namespace

std::vector<Contour> extract_components(const BinaryMask& mask, std::size_t min_area) {
  const int w = mask.width;
  const int h = mask.height;
  std::vector<int> labels(static_cast<std::size_t>(w) * h, 0);
  std::vector<Contour> out;

  int next_label = 0;
  std::deque<PixelCoord> queue;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * w + x;
      if (!mask.bits[idx] || labels[idx] != 0) continue;
      const int label = ++next_label;
      labels[idx] = label;
      queue.push_back({x, y});
      std::size_t area = 0;
      while (!queue.empty()) {
        const PixelCoord p = queue.front();
        queue.pop_front();
        ++area;
        for (const auto& d : kMoore) {
          const int nx = p.x + d.x;
          const int ny = p.y + d.y;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const std::size_t n = static_cast<std::size_t>(ny) * w + nx;
          if (mask.bits[n] && labels[n] == 0) {
            labels[n] = label;
            queue.push_back({nx, ny});
          }
        }
      }
      if (area < min_area) continue;
      Contour c;
      c.area = area;
      c.anchor = {x, y};
      c.points = trace_boundary(labels, w, h, label, c.anchor, area);
      out.push_back(std::move(c));
    }
  }

  std::stable_sort(out.begin(), out.end(), [](const Contour& a, const Contour& b) {
    if (a.area != b.area) return a.area > b.area;
    if (a.anchor.y != b.anchor.y) return a.anchor.y < b.anchor.y;
    return a.anchor.x < b.anchor.x;
  });
  return out;
}

std::vector<detect::Detection> detections_from_contours(const std::vector<Contour>& contours,
                                                        const detect::FruitLabel& label) {
  std::vector<detect::Detection> out;
  out.reserve(contours.size());
  for (const auto& c : contours) {
    if (c.points.empty()) continue;
    double x1 = c.points.front().u, x2 = x1;
    double y1 = c.points.front().v, y2 = y1;
    for (const auto& p : c.points) {
      x1 = std::min(x1, p.u);
      x2 = std::max(x2, p.u);
      y1 = std::min(y1, p.v);
      y2 = std::max(y2, p.v);
    }
    out.emplace_back(label, 1.0, geometry::BoundingBox(x1, y1, x2, y2));
  }
  return out;
}

}  // namespace fruitloc::hsv
