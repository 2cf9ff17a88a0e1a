#include "fruitloc/scene.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "fruitloc/error.hpp"
#include "fruitloc/hsv.hpp"
#include "fruitloc/io.hpp"

namespace fruitloc::scene {
namespace {

using geometry::PixelPoint;
using geometry::WorldPoint;

constexpr double kRadialShadingStrength = 0.3;

// Stream tags so that toggling one disturbance never perturbs another's draws.
constexpr std::uint64_t kPatternStream = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kLeafStream = 0xbf58476d1ce4e5b9ULL;
constexpr std::uint64_t kJitterStream = 0x94d049bb133111ebULL;

const Rgb kTableColour{120, 105, 90};
const Rgb kPlateColour{170, 170, 175};
const Rgb kHoleColour{60, 60, 65};

// mt19937_64 is fully specified by the standard; the distributions are not,
// so draws are derived from raw engine output here.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream) : engine_(seed ^ stream) {}

  double uniform(double lo, double hi) {
    const double unit = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * unit;
  }

  // Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % span;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return lo + static_cast<int>(x % span);
  }

 private:
  std::mt19937_64 engine_;
};

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

std::uint8_t jitter_channel(Rng& rng, std::uint8_t c, int amount) {
  return static_cast<std::uint8_t>(
      std::clamp(static_cast<int>(c) + rng.uniform_int(-amount, amount), 0, 255));
}

struct Colour {
  double r = 0.0, g = 0.0, b = 0.0;  // 0..255, unquantized
};

Colour to_colour(Rgb c) { return {double(c.r), double(c.g), double(c.b)}; }

Colour rotate_hue(Colour c, double degrees) {
  hsv::HsvPixel p = hsv::rgb_to_hsv(c.r / 255.0, c.g / 255.0, c.b / 255.0);
  p.h = std::fmod(p.h + degrees + 360.0, 360.0);
  const hsv::UnitRgb u = hsv::hsv_to_unit_rgb(p);
  return {u.r * 255.0, u.g * 255.0, u.b * 255.0};
}

// Normalized elliptical radius squared of `w` relative to an ellipse.
double ellipse_q(const WorldPoint& w, const WorldPoint& centre, double a, double b,
                 double orientation_deg) {
  const double c = std::cos(deg2rad(orientation_deg));
  const double s = std::sin(deg2rad(orientation_deg));
  const double dx = w.x - centre.x;
  const double dy = w.y - centre.y;
  const double along = c * dx + s * dy;
  const double across = -s * dx + c * dy;
  return (along * along) / (a * a) + (across * across) / (b * b);
}

struct Leaf {
  WorldPoint centre;
  double a = 1.0, b = 1.0, orientation_deg = 0.0;
  Rgb colour;
};

const FruitAppearance& appearance(const SceneConfig& cfg, const detect::FruitLabel& l) {
  return l.kind() == detect::FruitKind::kOrange ? cfg.orange : cfg.apple;
}

}  // namespace

void SceneConfig::validate() const {
  auto bad = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidArgument, "scene config: " + what);
  };
  if (image_width < 1 || image_height < 1) bad("image size must be positive");
  if (grid.cols < 1 || grid.rows < 1) bad("grid must have at least one hole");
  if (!(grid.spacing_cm > 0.0)) bad("spacing_cm must be > 0");
  if (!(camera_height_cm > 0.0)) bad("camera_height_cm must be > 0");
  if (!(std::abs(camera_tilt_deg) < 60.0)) bad("camera_tilt_deg must be within +/-60");
  if (fruit_count_per_class < 0) bad("fruit_count_per_class must be >= 0");
  for (const auto* a : {&apple, &orange}) {
    if (!(a->radius_min_cm > 0.0) || a->radius_min_cm > a->radius_max_cm) {
      bad("fruit radius range must satisfy 0 < min <= max");
    }
    if (a->channel_jitter < 0) bad("channel_jitter must be >= 0");
  }
  if (!(max_eccentricity >= 0.0 && max_eccentricity < 1.0)) {
    bad("max_eccentricity must lie in [0, 1)");
  }
  if (!(min_gap_cm >= 0.0)) bad("min_gap_cm must be >= 0");
  intrinsics.validate();
}

geometry::ExtrinsicPose SceneConfig::camera_pose() const {
  const double t = deg2rad(camera_tilt_deg);
  geometry::ExtrinsicPose pose;
  pose.rotation << 1.0, 0.0, 0.0, 0.0, std::cos(t), -std::sin(t), 0.0, std::sin(t), std::cos(t);
  // World Z points into the plate, so the camera centre has Z = -height.
  const Eigen::Vector3d centre((grid.cols - 1) * grid.spacing_cm / 2.0,
                               (grid.rows - 1) * grid.spacing_cm / 2.0, -camera_height_cm);
  pose.translation = -pose.rotation * centre;
  return pose;
}

geometry::CameraMatrix SceneConfig::camera_matrix() const {
  return geometry::compose_camera_matrix(intrinsics, camera_pose());
}

geometry::Homography SceneConfig::pixel_to_world() const {
  return geometry::Homography(geometry::plane_to_image(camera_matrix()).inverse());
}

void DisturbanceConfig::validate() const {
  auto bad = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidArgument, "disturbance config: " + what);
  };
  if (!(lighting_gain > 0.0) || !std::isfinite(lighting_gain)) bad("gain must be > 0");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) bad("gamma must be > 0");
  if (!(shadow.opacity >= 0.0 && shadow.opacity <= 1.0)) bad("opacity must lie in [0, 1]");
  if (clutter.leaf_count < 0) bad("leaf_count must be >= 0");
  if (!(clutter.size_min_cm > 0.0) || clutter.size_min_cm > clutter.size_max_cm) {
    bad("leaf size range must satisfy 0 < min <= max");
  }
  if (!(colour_jitter_deg >= 0.0 && colour_jitter_deg <= 180.0)) {
    bad("colour_jitter_deg must lie in [0, 180]");
  }
}

bool is_lighting_preset(std::string_view name) {
  return name == "indoor" || name == "shaded" || name == "direct_sun";
}

DisturbanceConfig lighting_preset(std::string_view name) {
  DisturbanceConfig d;
  if (name == "indoor") return d;
  if (name == "shaded") {
    d.lighting_gain = 0.7;
    d.gamma = 0.9;
    return d;
  }
  if (name == "direct_sun") {
    d.lighting_gain = 1.6;
    d.gamma = 1.2;
    d.shadow = {true, 0.0, 0.5};
    return d;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown lighting preset '" + std::string(name) + "'");
}

DisturbanceConfig with_background_disturbances(DisturbanceConfig base) {
  base.clutter.leaf_count = 8;
  base.colour_jitter_deg = 15.0;
  return base;
}

double radial_shading(double q) { return 1.0 - kRadialShadingStrength * q; }

std::vector<FruitSpec> generate_pattern(const SceneConfig& cfg) {
  cfg.validate();
  const int holes = cfg.grid.cols * cfg.grid.rows;
  const int total = 2 * cfg.fruit_count_per_class;
  if (total > holes) {
    throw Error(ErrorCode::kGridTooSmall, std::to_string(total) +
                                              " fruits need distinct holes but the grid has " +
                                              std::to_string(holes));
  }

  Rng rng(cfg.rng_seed, kPatternStream);
  std::vector<FruitSpec> out;
  std::vector<bool> taken(static_cast<std::size_t>(holes), false);
  constexpr int kMaxAttempts = 10000;

  for (const auto& label : {detect::FruitLabel::apple(), detect::FruitLabel::orange()}) {
    const FruitAppearance& look = appearance(cfg, label);
    for (int i = 0; i < cfg.fruit_count_per_class; ++i) {
      bool placed = false;
      for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
        const int h = rng.uniform_int(0, holes - 1);
        FruitSpec f;
        f.label = label;
        f.col = h % cfg.grid.cols;
        f.row = h / cfg.grid.cols;
        f.position = cfg.hole(f.col, f.row);
        f.radius_cm = rng.uniform(look.radius_min_cm, look.radius_max_cm);
        f.axis_ratio = 1.0 - rng.uniform(0.0, cfg.max_eccentricity);
        f.orientation_deg = rng.uniform(0.0, 180.0);
        f.base_colour = {jitter_channel(rng, look.base.r, look.channel_jitter),
                         jitter_channel(rng, look.base.g, look.channel_jitter),
                         jitter_channel(rng, look.base.b, look.channel_jitter)};
        if (taken[static_cast<std::size_t>(h)]) continue;
        const bool collides = std::any_of(out.begin(), out.end(), [&](const FruitSpec& o) {
          const double d = std::hypot(o.position.x - f.position.x, o.position.y - f.position.y);
          return d < o.radius_cm + f.radius_cm + cfg.min_gap_cm;
        });
        if (collides) continue;
        taken[static_cast<std::size_t>(h)] = true;
        out.push_back(f);
        placed = true;
      }
      if (!placed) {
        throw Error(ErrorCode::kGridTooSmall,
                    "no collision-free layout found for " + std::to_string(total) + " fruits");
      }
    }
  }
  return out;
}

std::vector<geometry::Correspondence> grid_correspondences(const SceneConfig& cfg) {
  cfg.validate();
  const Eigen::Matrix3d to_image = geometry::plane_to_image(cfg.camera_matrix());
  std::vector<geometry::Correspondence> out;
  out.reserve(static_cast<std::size_t>(cfg.grid.cols * cfg.grid.rows));
  for (int r = 0; r < cfg.grid.rows; ++r) {
    for (int c = 0; c < cfg.grid.cols; ++c) {
      const WorldPoint w = cfg.hole(c, r);
      const Eigen::Vector3d p = to_image * Eigen::Vector3d(w.x, w.y, 1.0);
      out.push_back({{p.x() / p.z(), p.y() / p.z()}, w});
    }
  }
  return out;
}

RenderedScene render_scene(const SceneConfig& cfg, const std::vector<FruitSpec>& fruits,
                           const DisturbanceConfig& dist) {
  cfg.validate();
  dist.validate();

  const geometry::Homography to_world = cfg.pixel_to_world();
  const Eigen::Matrix3d to_image = geometry::plane_to_image(cfg.camera_matrix());
  const Eigen::Matrix3d& hw = to_world.matrix();

  // Leaves scatter over the plate and a margin around it.
  std::vector<Leaf> leaves;
  {
    Rng rng(cfg.rng_seed, kLeafStream);
    const double s = cfg.grid.spacing_cm;
    const auto& cl = dist.clutter;
    for (int i = 0; i < cl.leaf_count; ++i) {
      Leaf leaf;
      leaf.centre = {rng.uniform(-s, cfg.grid.cols * s), rng.uniform(-s, cfg.grid.rows * s)};
      leaf.a = rng.uniform(cl.size_min_cm, cl.size_max_cm);
      leaf.b = leaf.a * rng.uniform(0.35, 0.55);
      leaf.orientation_deg = rng.uniform(0.0, 180.0);
      leaf.colour = {static_cast<std::uint8_t>(rng.uniform_int(cl.colour_lo.r, cl.colour_hi.r)),
                     static_cast<std::uint8_t>(rng.uniform_int(cl.colour_lo.g, cl.colour_hi.g)),
                     static_cast<std::uint8_t>(rng.uniform_int(cl.colour_lo.b, cl.colour_hi.b))};
      leaves.push_back(leaf);
    }
  }

  std::vector<Colour> fruit_colours;
  {
    Rng rng(cfg.rng_seed, kJitterStream);
    for (const auto& f : fruits) {
      const double offset = rng.uniform(-dist.colour_jitter_deg, dist.colour_jitter_deg);
      fruit_colours.push_back(dist.colour_jitter_deg > 0.0
                                  ? rotate_hue(to_colour(f.base_colour), offset)
                                  : to_colour(f.base_colour));
    }
  }

  const double s = cfg.grid.spacing_cm;
  const double hole_r = std::min(0.35, 0.15 * s);
  const double plate_x0 = -s / 2.0, plate_x1 = (cfg.grid.cols - 0.5) * s;
  const double plate_y0 = -s / 2.0, plate_y1 = (cfg.grid.rows - 0.5) * s;
  const double shadow_nx = std::cos(deg2rad(dist.shadow.direction_deg));
  const double shadow_ny = std::sin(deg2rad(dist.shadow.direction_deg));
  const double mid_x = (cfg.image_width - 1) / 2.0;
  const double mid_y = (cfg.image_height - 1) / 2.0;

  RgbImage image(cfg.image_width, cfg.image_height);
  for (int y = 0; y < cfg.image_height; ++y) {
    for (int x = 0; x < cfg.image_width; ++x) {
      const Eigen::Vector3d hp = hw * Eigen::Vector3d(x, y, 1.0);
      const WorldPoint w{hp.x() / hp.z(), hp.y() / hp.z()};

      Colour c = to_colour(kTableColour);
      if (w.x >= plate_x0 && w.x <= plate_x1 && w.y >= plate_y0 && w.y <= plate_y1) {
        const double hx = std::round(w.x / s) * s;
        const double hy = std::round(w.y / s) * s;
        c = std::hypot(w.x - hx, w.y - hy) <= hole_r ? to_colour(kHoleColour)
                                                     : to_colour(kPlateColour);
      }
      for (const auto& leaf : leaves) {
        if (ellipse_q(w, leaf.centre, leaf.a, leaf.b, leaf.orientation_deg) <= 1.0) {
          c = to_colour(leaf.colour);
        }
      }
      for (std::size_t i = 0; i < fruits.size(); ++i) {
        const FruitSpec& f = fruits[i];
        const double q =
            ellipse_q(w, f.position, f.radius_cm, f.radius_cm * f.axis_ratio, f.orientation_deg);
        if (q <= 1.0) {
          const double k = radial_shading(q);
          c = {fruit_colours[i].r * k, fruit_colours[i].g * k, fruit_colours[i].b * k};
        }
      }
      if (dist.shadow.enabled && (x - mid_x) * shadow_nx + (y - mid_y) * shadow_ny > 0.0) {
        const double k = 1.0 - dist.shadow.opacity;
        c = {c.r * k, c.g * k, c.b * k};
      }

      auto finish = [&](double in) {
        double v = 255.0 * std::pow(dist.lighting_gain * (in / 255.0), 1.0 / dist.gamma);
        v = std::clamp(v, 0.0, 255.0);
        return static_cast<std::uint8_t>(std::nearbyint(v));
      };
      image.set(x, y, {finish(c.r), finish(c.g), finish(c.b)});
    }
  }

  GroundTruth truth;
  truth.homography = to_world;
  truth.config_digest = config_digest(cfg, fruits);
  for (const auto& f : fruits) {
    const Eigen::Vector3d p = to_image * Eigen::Vector3d(f.position.x, f.position.y, 1.0);
    const Eigen::Vector3d e =
        to_image * Eigen::Vector3d(f.position.x + f.radius_cm, f.position.y, 1.0);
    const PixelPoint centre{p.x() / p.z(), p.y() / p.z()};
    const double radius = std::hypot(e.x() / e.z() - centre.u, e.y() / e.z() - centre.v);
    truth.fruits.push_back({f.label, f.position, centre, radius});
  }
  return {std::move(image), std::move(truth)};
}

namespace {

nlohmann::json rgb_json(Rgb c) { return {c.r, c.g, c.b}; }

Rgb rgb_from(const nlohmann::json& a) {
  return {a.at(0).get<std::uint8_t>(), a.at(1).get<std::uint8_t>(), a.at(2).get<std::uint8_t>()};
}

nlohmann::json appearance_json(const FruitAppearance& a) {
  return {{"base_rgb", rgb_json(a.base)},
          {"channel_jitter", a.channel_jitter},
          {"radius_cm", {a.radius_min_cm, a.radius_max_cm}}};
}

FruitAppearance appearance_from(const nlohmann::json& doc, FruitAppearance a) {
  if (doc.contains("base_rgb")) a.base = rgb_from(doc["base_rgb"]);
  a.channel_jitter = doc.value("channel_jitter", a.channel_jitter);
  if (doc.contains("radius_cm")) {
    a.radius_min_cm = doc["radius_cm"].at(0).get<double>();
    a.radius_max_cm = doc["radius_cm"].at(1).get<double>();
  }
  return a;
}

nlohmann::json homography_json(const geometry::Homography& h) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({h(r, 0), h(r, 1), h(r, 2)});
  return rows;
}

template <typename F>
auto wrap_json(const char* what, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("invalid ") + what + ": " + e.what());
  }
}

}  // namespace

nlohmann::json to_json(const SceneConfig& cfg) {
  return {
      {"image_size", {cfg.image_width, cfg.image_height}},
      {"grid",
       {{"cols", cfg.grid.cols}, {"rows", cfg.grid.rows}, {"spacing_cm", cfg.grid.spacing_cm}}},
      {"camera_height_cm", cfg.camera_height_cm},
      {"camera_tilt_deg", cfg.camera_tilt_deg},
      {"intrinsics",
       {{"fx", cfg.intrinsics.fx},
        {"fy", cfg.intrinsics.fy},
        {"cx", cfg.intrinsics.cx},
        {"cy", cfg.intrinsics.cy}}},
      {"fruit_count_per_class", cfg.fruit_count_per_class},
      {"rng_seed", cfg.rng_seed},
      {"apple", appearance_json(cfg.apple)},
      {"orange", appearance_json(cfg.orange)},
      {"max_eccentricity", cfg.max_eccentricity},
      {"min_gap_cm", cfg.min_gap_cm},
  };
}

SceneConfig scene_config_from_json(const nlohmann::json& doc) {
  return wrap_json("scene config", [&] {
    SceneConfig cfg;
    if (doc.contains("image_size")) {
      cfg.image_width = doc["image_size"].at(0).get<int>();
      cfg.image_height = doc["image_size"].at(1).get<int>();
    }
    if (doc.contains("grid")) {
      const auto& g = doc["grid"];
      cfg.grid.cols = g.value("cols", cfg.grid.cols);
      cfg.grid.rows = g.value("rows", cfg.grid.rows);
      cfg.grid.spacing_cm = g.value("spacing_cm", cfg.grid.spacing_cm);
    }
    cfg.camera_height_cm = doc.value("camera_height_cm", cfg.camera_height_cm);
    cfg.camera_tilt_deg = doc.value("camera_tilt_deg", cfg.camera_tilt_deg);
    if (doc.contains("intrinsics")) {
      const auto& k = doc["intrinsics"];
      cfg.intrinsics.fx = k.value("fx", cfg.intrinsics.fx);
      cfg.intrinsics.fy = k.value("fy", cfg.intrinsics.fy);
      cfg.intrinsics.cx = k.value("cx", cfg.intrinsics.cx);
      cfg.intrinsics.cy = k.value("cy", cfg.intrinsics.cy);
    }
    cfg.fruit_count_per_class = doc.value("fruit_count_per_class", cfg.fruit_count_per_class);
    cfg.rng_seed = doc.value("rng_seed", cfg.rng_seed);
    if (doc.contains("apple")) cfg.apple = appearance_from(doc["apple"], cfg.apple);
    if (doc.contains("orange")) cfg.orange = appearance_from(doc["orange"], cfg.orange);
    cfg.max_eccentricity = doc.value("max_eccentricity", cfg.max_eccentricity);
    cfg.min_gap_cm = doc.value("min_gap_cm", cfg.min_gap_cm);
    cfg.validate();
    return cfg;
  });
}

nlohmann::json to_json(const DisturbanceConfig& d) {
  return {
      {"lighting_gain", d.lighting_gain},
      {"gamma", d.gamma},
      {"shadow",
       {{"enabled", d.shadow.enabled},
        {"direction_deg", d.shadow.direction_deg},
        {"opacity", d.shadow.opacity}}},
      {"clutter",
       {{"leaf_count", d.clutter.leaf_count},
        {"colour_lo", rgb_json(d.clutter.colour_lo)},
        {"colour_hi", rgb_json(d.clutter.colour_hi)},
        {"size_cm", {d.clutter.size_min_cm, d.clutter.size_max_cm}}}},
      {"colour_jitter_deg", d.colour_jitter_deg},
  };
}

DisturbanceConfig disturbance_from_json(const nlohmann::json& doc) {
  return wrap_json("disturbance config", [&] {
    DisturbanceConfig d;
    d.lighting_gain = doc.value("lighting_gain", d.lighting_gain);
    d.gamma = doc.value("gamma", d.gamma);
    if (doc.contains("shadow")) {
      const auto& s = doc["shadow"];
      d.shadow.enabled = s.value("enabled", d.shadow.enabled);
      d.shadow.direction_deg = s.value("direction_deg", d.shadow.direction_deg);
      d.shadow.opacity = s.value("opacity", d.shadow.opacity);
    }
    if (doc.contains("clutter")) {
      const auto& c = doc["clutter"];
      d.clutter.leaf_count = c.value("leaf_count", d.clutter.leaf_count);
      if (c.contains("colour_lo")) d.clutter.colour_lo = rgb_from(c["colour_lo"]);
      if (c.contains("colour_hi")) d.clutter.colour_hi = rgb_from(c["colour_hi"]);
      if (c.contains("size_cm")) {
        d.clutter.size_min_cm = c["size_cm"].at(0).get<double>();
        d.clutter.size_max_cm = c["size_cm"].at(1).get<double>();
      }
    }
    d.colour_jitter_deg = doc.value("colour_jitter_deg", d.colour_jitter_deg);
    d.validate();
    return d;
  });
}

nlohmann::ordered_json to_json(const GroundTruth& truth) {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json fruits = nlohmann::ordered_json::array();
  for (const auto& f : truth.fruits) {
    nlohmann::ordered_json item;
    item["label"] = f.label.name();
    item["world_cm"] = {f.world.x, f.world.y};
    item["pixel"] = {f.pixel.u, f.pixel.v};
    item["pixel_radius"] = f.pixel_radius;
    fruits.push_back(std::move(item));
  }
  doc["fruits"] = std::move(fruits);
  doc["homography"] = homography_json(truth.homography);
  doc["config_digest"] = truth.config_digest;
  return doc;
}

GroundTruth ground_truth_from_json(const nlohmann::json& doc) {
  return wrap_json("ground truth", [&] {
    GroundTruth truth;
    for (const auto& f : doc.at("fruits")) {
      GroundTruthFruit g;
      g.label = detect::FruitLabel::from_name(f.at("label").get<std::string>());
      g.world = {f.at("world_cm").at(0).get<double>(), f.at("world_cm").at(1).get<double>()};
      g.pixel = {f.at("pixel").at(0).get<double>(), f.at("pixel").at(1).get<double>()};
      g.pixel_radius = f.at("pixel_radius").get<double>();
      truth.fruits.push_back(std::move(g));
    }
    Eigen::Matrix3d m;
    const auto& rows = doc.at("homography");
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) m(r, c) = rows.at(r).at(c).get<double>();
    }
    truth.homography = geometry::Homography(m);
    truth.config_digest = doc.value("config_digest", std::string());
    return truth;
  });
}

nlohmann::json to_json(const std::vector<geometry::Correspondence>& corrs) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& c : corrs) {
    items.push_back({{"pixel", {c.pixel.u, c.pixel.v}}, {"world_cm", {c.world.x, c.world.y}}});
  }
  return {{"correspondences", items}};
}

std::vector<geometry::Correspondence> correspondences_from_json(const nlohmann::json& doc) {
  return wrap_json("correspondence file", [&] {
    std::vector<geometry::Correspondence> out;
    for (const auto& item : doc.at("correspondences")) {
      out.push_back(
          {{item.at("pixel").at(0).get<double>(), item.at("pixel").at(1).get<double>()},
           {item.at("world_cm").at(0).get<double>(), item.at("world_cm").at(1).get<double>()}});
    }
    return out;
  });
}

std::string config_digest(const SceneConfig& cfg, const std::vector<FruitSpec>& fruits) {
  nlohmann::json doc = to_json(cfg);
  nlohmann::json items = nlohmann::json::array();
  for (const auto& f : fruits) {
    items.push_back({f.label.name(), f.col, f.row, f.radius_cm, f.axis_ratio, f.orientation_deg,
                     rgb_json(f.base_colour)});
  }
  doc["fruits"] = items;
  return io::hex_digest(doc.dump());
}

void write_bundle(const std::filesystem::path& dir, const std::string& name,
                  const RenderedScene& scene) {
  write_png(dir / (name + ".png"), scene.image);
  io::write_text_file(dir / (name + ".truth.json"), to_json(scene.truth).dump(2) + "\n");
}

GroundTruth read_truth(const std::filesystem::path& path) {
  return ground_truth_from_json(io::read_json_file(path));
}

}  // namespace fruitloc::scene
