#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fruitloc/detection.hpp"
#include "fruitloc/geometry.hpp"
#include "fruitloc/image.hpp"
#include "fruitloc/scene.hpp"

namespace fruitloc::eval {

inline constexpr double kDefaultMatchThresholdCm = 2.0;

struct MatchedPair {
  std::size_t truth_index = 0;
  std::size_t detection_index = 0;
  geometry::WorldPoint localised;  // detection picking point on the plane
  double dx_cm = 0.0;              // localised - truth
  double dy_cm = 0.0;

  double distance_cm() const;
};

// One frame's one-to-one assignment of fruit detections to ground truth.
// Indices refer to `truths` and `detections`.
struct MatchResult {
  std::string frame_id;
  std::vector<scene::GroundTruthFruit> truths;
  std::vector<detect::Detection> detections;
  std::vector<MatchedPair> pairs;
  std::vector<std::size_t> misses;  // unmatched truths
  std::vector<std::size_t> ghosts;  // unmatched fruit-labelled detections

  // Same frame with only truths, pairs and ghosts of one fruit class.
  MatchResult restricted_to(detect::FruitKind crop) const;
};

// Localises each detection's picking point through `h` and pairs same-label
// detections with truths greedily by ascending world distance, never beyond
// `threshold_cm`. Distance ties go to the higher confidence, then the earlier
// detection. Detections labelled other(...) are ignored, and detections whose
// picking point maps to infinity count as ghosts.
MatchResult match_detections(const scene::GroundTruth& truth,
                             std::span<const detect::Detection> detections,
                             const geometry::Homography& h, double threshold_cm,
                             std::string frame_id = {});

// 100 * matched / ground-truth fruits, pooled over frames. Throws kEmptyInput
// when there is no ground truth at all.
double detection_rate(std::span<const MatchResult> results);

struct AxisErrors {
  double x_mean_cm = 0.0;  // mean |dx| over matched pairs
  double y_mean_cm = 0.0;  // mean |dy|
};

// Throws kNoMatches when no pair exists.
AxisErrors localisation_error(std::span<const MatchResult> results);

// JSON lines, one record per pair, miss and ghost:
//   {"kind":"pair","frame":...,"truth_id":i,"det_id":j,"label":...,"dx_cm":...,"dy_cm":...}
//   {"kind":"miss","frame":...,"truth_id":i,"label":...}
//   {"kind":"ghost","frame":...,"det_id":j,"label":...}
std::string pair_dump(std::span<const MatchResult> results);

struct MetricsRow {
  std::string crop;       // "orange" | "apple"
  std::string condition;  // environment preset name
  bool disturbances = false;
  std::optional<double> x_mean_cm;  // empty when nothing matched
  std::optional<double> y_mean_cm;
  double detection_pct = 0.0;
  std::size_t n_patterns = 0;
  std::size_t n_fruits = 0;
  std::size_t n_matched = 0;
  std::size_t n_ghosts = 0;
};

struct MetricsReport {
  std::vector<MetricsRow> rows;
};

struct FrameOutcome {
  std::string condition;
  bool disturbances = false;
  MatchResult match;
};

// One row per (crop, condition, disturbances) present in `outcomes`, ordered
// orange before apple, with disturbances before without, and conditions as
// indoor, shaded, direct_sun followed by any others alphabetically.
MetricsReport aggregate(std::span<const FrameOutcome> outcomes);

enum class ReportFormat { kTable, kJson, kCsv };

ReportFormat parse_report_format(std::string_view name);

// CSV columns: crop, condition, disturbances, x_mean_cm, y_mean_cm,
// detection_pct, n_patterns, n_fruits.
std::string emit_report(const MetricsReport& report, ReportFormat format);
MetricsReport report_from_json(const nlohmann::json& doc);

// A frame to evaluate: a rendered scene on disk and/or in memory.
struct Frame {
  std::string frame_id;
  std::string condition;
  bool disturbances = false;
  std::filesystem::path image_path;
  std::optional<RgbImage> image;
  scene::GroundTruth truth;
};

using Detector = std::function<std::vector<detect::Detection>(const Frame&)>;

struct BenchmarkResult {
  std::vector<FrameOutcome> outcomes;
  MetricsReport report;
};

// Runs `detector` on every frame in order, matches and aggregates.
BenchmarkResult run_benchmark(std::span<const Frame> frames, const Detector& detector,
                              const geometry::Homography& h,
                              double threshold_cm = kDefaultMatchThresholdCm);

}  // namespace fruitloc::eval
