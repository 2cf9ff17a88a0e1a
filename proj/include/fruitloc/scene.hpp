#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <vector>

#include "fruitloc/detection.hpp"
#include "fruitloc/geometry.hpp"
#include "fruitloc/image.hpp"

namespace fruitloc::scene {

struct GridSpec {
  int cols = 8;
  int rows = 6;
  double spacing_cm = 8.0;
};

struct FruitAppearance {
  Rgb base;
  int channel_jitter = 10;  // uniform +/- per channel
  double radius_min_cm = 2.8;
  double radius_max_cm = 3.4;
};

// A camera looking down on a holed plate. The world origin is the top-left
// hole, X runs along the columns and Y along the rows, and the camera sits
// camera_height_cm above the centre of the grid.
struct SceneConfig {
  int image_width = 640;
  int image_height = 480;
  GridSpec grid;
  double camera_height_cm = 61.5;
  double camera_tilt_deg = 0.0;  // rotation about the world X axis
  geometry::CameraIntrinsics intrinsics;
  int fruit_count_per_class = 6;
  std::uint64_t rng_seed = 0;

  FruitAppearance apple{{200, 30, 40}, 10, 2.8, 3.4};
  FruitAppearance orange{{245, 140, 20}, 10, 3.0, 3.5};
  double max_eccentricity = 0.1;  // minor/major axis ratio >= 1 - this
  double min_gap_cm = 0.8;        // clearance between neighbouring fruits

  void validate() const;

  geometry::ExtrinsicPose camera_pose() const;
  geometry::CameraMatrix camera_matrix() const;
  // The exact pixel -> world map of the plate under this camera.
  geometry::Homography pixel_to_world() const;
  geometry::WorldPoint hole(int col, int row) const {
    return {col * grid.spacing_cm, row * grid.spacing_cm};
  }
};

struct FruitSpec {
  detect::FruitLabel label = detect::FruitLabel::apple();
  int col = 0;
  int row = 0;
  geometry::WorldPoint position;
  double radius_cm = 3.0;      // semi-major axis
  double axis_ratio = 1.0;     // semi-minor / semi-major
  double orientation_deg = 0;  // of the major axis
  Rgb base_colour;
};

struct ShadowConfig {
  bool enabled = false;
  double direction_deg = 0.0;  // normal of the shadowed half-plane, in pixels
  double opacity = 0.5;
};

struct ClutterConfig {
  int leaf_count = 0;
  Rgb colour_lo{40, 90, 20};
  Rgb colour_hi{110, 170, 60};
  double size_min_cm = 1.5;  // semi-major axis
  double size_max_cm = 3.0;
};

struct DisturbanceConfig {
  double lighting_gain = 1.0;
  double gamma = 1.0;
  ShadowConfig shadow;
  ClutterConfig clutter;
  double colour_jitter_deg = 0.0;  // per-fruit hue offset drawn from +/- this

  void validate() const;
};

// Lighting presets: "indoor", "shaded", "direct_sun".
DisturbanceConfig lighting_preset(std::string_view name);
bool is_lighting_preset(std::string_view name);
// Adds leaf clutter and per-fruit colour jitter on top of any lighting.
DisturbanceConfig with_background_disturbances(DisturbanceConfig base);

struct GroundTruthFruit {
  detect::FruitLabel label = detect::FruitLabel::apple();
  geometry::WorldPoint world;
  geometry::PixelPoint pixel;
  double pixel_radius = 0.0;
};

struct GroundTruth {
  std::vector<GroundTruthFruit> fruits;
  geometry::Homography homography;  // pixel -> world
  std::string config_digest;
};

struct RenderedScene {
  RgbImage image;
  GroundTruth truth;
};

// Places fruit_count_per_class apples then oranges on distinct holes with
// at least min_gap_cm between neighbouring outlines. Deterministic in the seed.
// Throws kGridTooSmall when there are fewer holes than fruits or no
// collision-free layout is found.
std::vector<FruitSpec> generate_pattern(const SceneConfig& cfg);

// Renders plate, leaves, fruits with radial shading, the shadow half-plane
// and finally gain/gamma: out = clamp(255 * (gain * in / 255)^(1 / gamma)),
// quantized round-half-even.
RenderedScene render_scene(const SceneConfig& cfg, const std::vector<FruitSpec>& fruits,
                           const DisturbanceConfig& dist);

// Multiplier applied to a fruit's colour at normalized elliptical radius^2 q.
double radial_shading(double q);

// Pixel/world pairs for every grid hole, row by row.
std::vector<geometry::Correspondence> grid_correspondences(const SceneConfig& cfg);

nlohmann::json to_json(const SceneConfig& cfg);
SceneConfig scene_config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const DisturbanceConfig& dist);
DisturbanceConfig disturbance_from_json(const nlohmann::json& doc);
nlohmann::ordered_json to_json(const GroundTruth& truth);
GroundTruth ground_truth_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const std::vector<geometry::Correspondence>& corrs);
std::vector<geometry::Correspondence> correspondences_from_json(const nlohmann::json& doc);

// Hex digest of the scene config and fruit layout.
std::string config_digest(const SceneConfig& cfg, const std::vector<FruitSpec>& fruits);

// Writes <dir>/<name>.png and <dir>/<name>.truth.json.
void write_bundle(const std::filesystem::path& dir, const std::string& name,
                  const RenderedScene& scene);
GroundTruth read_truth(const std::filesystem::path& path);

}  // namespace fruitloc::scene
