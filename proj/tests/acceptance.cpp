// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <unistd.h>

#include <Eigen/SVD>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fruitloc/backend.hpp"
#include "fruitloc/detector.hpp"
#include "fruitloc/error.hpp"
#include "fruitloc/eval.hpp"
#include "fruitloc/geometry.hpp"
#include "fruitloc/hsv.hpp"
#include "fruitloc/io.hpp"
#include "fruitloc/scene.hpp"

using namespace fruitloc;
using namespace std::chrono_literals;

namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kDltTolerance = 1e-9;
constexpr double kAc1BudgetS = 5.0;
constexpr double kAc2BudgetS = 1.0;
constexpr double kIndoorErrorCm = 0.6;
constexpr double kAc3BudgetS = 30.0;
constexpr double kOracleErrorCm = 0.05;
constexpr double kAc5BudgetS = 60.0;
constexpr double kCoverageFloor = 0.5;
constexpr double kAc6BudgetS = 10.0;
constexpr double kAc7BudgetS = 10.0;
constexpr int kSeeds = 10;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

bool has_near_collinear_triple(const std::vector<geometry::PixelPoint>& p) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = i + 1; j < p.size(); ++j) {
      for (std::size_t k = j + 1; k < p.size(); ++k) {
        const double area =
            (p[j].u - p[i].u) * (p[k].v - p[i].v) - (p[k].u - p[i].u) * (p[j].v - p[i].v);
        if (std::abs(area) < 2000.0) return true;
      }
    }
  }
  return false;
}

Outcome ac1_dlt_exactness() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> px(0.0, 640.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    Eigen::Matrix3d truth;
    for (;;) {
      truth = Eigen::Matrix3d::Identity() * 0.1;
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) truth(r, c) += 0.05 * unit(rng);
      }
      truth(2, 0) = 1e-4 * unit(rng);
      truth(2, 1) = 1e-4 * unit(rng);
      truth(2, 2) = 1.0 + 0.2 * unit(rng);
      Eigen::JacobiSVD<Eigen::Matrix3d> svd(truth);
      if (svd.singularValues()(2) > 0.05 * svd.singularValues()(0)) break;
    }
    const int n = 4 + i % 9;
    std::vector<geometry::PixelPoint> pts;
    do {
      pts.clear();
      for (int k = 0; k < n; ++k) pts.push_back({px(rng), px(rng) * 0.75});
    } while (has_near_collinear_triple(pts));
    std::vector<geometry::Correspondence> corrs;
    for (const auto& p : pts) {
      const Eigen::Vector3d w = truth * Eigen::Vector3d(p.u, p.v, 1.0);
      corrs.push_back({p, {w.x() / w.z(), w.y() / w.z()}});
    }
    const Eigen::Matrix3d diff =
        geometry::estimate_homography(corrs).matrix() - geometry::Homography(truth).matrix();
    worst = std::max(worst, diff.cwiseAbs().maxCoeff());
  }
  const double secs = seconds_since(t0);
  return {worst <= kDltTolerance && secs < kAc1BudgetS,
          fmt("max entry error %.2e over 1000 homographies, 4-12 points (tol %.0e); %.2f s "
              "(budget %.0f s)",
              worst, kDltTolerance, secs, kAc1BudgetS)};
}

Outcome ac2_midpoint_law() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1e4, 1e4);
  std::size_t bad = 0;
  for (int i = 0; i < 100000; ++i) {
    double x1 = u(rng), x2 = u(rng), y1 = u(rng), y2 = u(rng);
    if (x1 > x2) std::swap(x1, x2);
    if (y1 > y2) std::swap(y1, y2);
    const geometry::PixelPoint m = geometry::bbox_midpoint({x1, y1, x2, y2});
    if (m.u != (x1 + x2) / 2 || m.v != (y1 + y2) / 2) ++bad;
    const geometry::PixelPoint r = geometry::bbox_midpoint({-x2, -y2, -x1, -y1});
    if (r.u != -m.u || r.v != -m.v) ++bad;
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < kAc2BudgetS,
          fmt("%zu violations over 1e5 boxes (exact equality, reflection included); %.3f s "
              "(budget %.0f s)",
              bad, secs, kAc2BudgetS)};
}

// ---------------------------------------------------------------------------

struct SceneSet {
  std::vector<eval::Frame> frames;
  geometry::Homography calibration;
};

SceneSet synthesize(const std::vector<std::string>& presets, bool both_disturbances,
                    const fs::path* dir = nullptr) {
  SceneSet set;
  scene::SceneConfig base;
  set.calibration = geometry::estimate_homography(scene::grid_correspondences(base));
  for (const auto& preset : presets) {
    for (int seed = 1; seed <= kSeeds; ++seed) {
      scene::SceneConfig cfg = base;
      cfg.rng_seed = static_cast<std::uint64_t>(seed);
      const auto fruits = scene::generate_pattern(cfg);
      for (const bool dist : {false, true}) {
        if (dist && !both_disturbances) continue;
        auto d = scene::lighting_preset(preset);
        if (dist) d = scene::with_background_disturbances(d);
        auto rendered = scene::render_scene(cfg, fruits, d);
        eval::Frame f;
        f.frame_id = preset + "_s" + std::to_string(seed) + (dist ? "_dist" : "_clean");
        f.condition = preset;
        f.disturbances = dist;
        if (dir != nullptr) {
          scene::write_bundle(*dir, f.frame_id, rendered);
          f.image_path = *dir / (f.frame_id + ".png");
        }
        f.truth = std::move(rendered.truth);
        f.image = std::move(rendered.image);
        set.frames.push_back(std::move(f));
      }
    }
  }
  return set;
}

const eval::Detector kHsv = [](const eval::Frame& f) {
  return detect::detect_hsv(*f.image, hsv::default_ranges());
};

Outcome ac3_indoor() {
  const auto t0 = std::chrono::steady_clock::now();
  const SceneSet set = synthesize({"indoor"}, false);
  const auto result = eval::run_benchmark(set.frames, kHsv, set.calibration);
  const double secs = seconds_since(t0);
  bool ok = secs < kAc3BudgetS && result.report.rows.size() == 2;
  std::string detail;
  for (const auto& row : result.report.rows) {
    ok = ok && row.detection_pct == 100.0 && row.x_mean_cm && *row.x_mean_cm <= kIndoorErrorCm &&
         *row.y_mean_cm <= kIndoorErrorCm;
    detail += fmt("%s %zu/%zu detected, X %.3f Y %.3f cm; ", row.crop.c_str(), row.n_matched,
                  row.n_fruits, row.x_mean_cm.value_or(NAN), row.y_mean_cm.value_or(NAN));
  }
  return {ok, detail + fmt("(need 100%%, <= %.2f cm) %.2f s (budget %.0f s)", kIndoorErrorCm, secs,
                           kAc3BudgetS)};
}

Outcome ac4_oracle_backend() {
  const fs::path dir =
      fs::temp_directory_path() / ("fruitloc-acceptance-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const SceneSet set = synthesize({"indoor"}, false, &dir);
  Outcome out;
  try {
    detect::BackendProcess backend("'" + detect::default_stub_executable().string() + "' --oracle");
    const eval::Detector oracle = [&](const eval::Frame& f) {
      return detect::detect_external(backend, {f.frame_id, f.image_path});
    };
    const auto result = eval::run_benchmark(set.frames, oracle, set.calibration);
    backend.close();
    out.pass = result.report.rows.size() == 2;
    for (const auto& row : result.report.rows) {
      out.pass = out.pass && row.detection_pct == 100.0 && row.x_mean_cm &&
                 *row.x_mean_cm <= kOracleErrorCm && *row.y_mean_cm <= kOracleErrorCm;
      out.detail += fmt("%s X %.2e Y %.2e cm; ", row.crop.c_str(), row.x_mean_cm.value_or(NAN),
                        row.y_mean_cm.value_or(NAN));
    }
    out.detail += fmt("(need <= %.2f cm) via stub backend truth boxes", kOracleErrorCm);
  } catch (const Error& e) {
    out = {false, e.what()};
  }
  fs::remove_all(dir);
  return out;
}

Outcome ac5_degradation_direction() {
  const auto t0 = std::chrono::steady_clock::now();
  const SceneSet set = synthesize({"indoor", "shaded", "direct_sun"}, true);
  const auto result = eval::run_benchmark(set.frames, kHsv, set.calibration);
  const double secs = seconds_since(t0);

  std::map<std::string, std::pair<double, double>> pooled;  // condition -> matched, total
  std::map<std::string, double> rate;
  for (const auto& row : result.report.rows) {
    pooled[row.condition].first += static_cast<double>(row.n_matched);
    pooled[row.condition].second += static_cast<double>(row.n_fruits);
    rate[row.crop + "/" + row.condition + (row.disturbances ? "/with" : "/without")] =
        row.detection_pct;
  }
  auto pct = [&](const std::string& c) { return 100.0 * pooled[c].first / pooled[c].second; };
  bool ok = pct("direct_sun") < pct("indoor") && secs < kAc5BudgetS;
  std::string detail = fmt(
      "pooled indoor %.1f%% direct_sun %.1f%% shaded %.1f%%; orange with/without:", pct("indoor"),
      pct("direct_sun"), pct("shaded"));
  for (const char* c : {"indoor", "shaded", "direct_sun"}) {
    const double with = rate[std::string("orange/") + c + "/with"];
    const double without = rate[std::string("orange/") + c + "/without"];
    ok = ok && with <= without;
    detail += fmt(" %s %.1f/%.1f", c, with, without);
  }
  detail += "; apple with/without (not asserted):";
  for (const char* c : {"indoor", "shaded", "direct_sun"}) {
    detail += fmt(" %s %.1f/%.1f", c, rate[std::string("apple/") + c + "/with"],
                  rate[std::string("apple/") + c + "/without"]);
  }
  return {ok, detail + fmt("; %.2f s (budget %.0f s)", secs, kAc5BudgetS)};
}

Outcome ac6_gain_fragility() {
  const auto t0 = std::chrono::steady_clock::now();
  scene::SceneConfig cfg;
  cfg.rng_seed = 1;
  const auto fruits = scene::generate_pattern(cfg);
  const auto ranges = hsv::default_ranges();
  // Per fruit, the share of its rendered disk that the fixed range keeps.
  auto coverage = [&](double gain) {
    scene::DisturbanceConfig d;
    d.lighting_gain = gain;
    const auto r = scene::render_scene(cfg, fruits, d);
    std::vector<double> cov;
    for (const auto& f : r.truth.fruits) {
      const auto& range =
          f.label == detect::FruitLabel::apple() ? ranges[0].range : ranges[1].range;
      std::size_t inside = 0, kept = 0;
      const int r0 = static_cast<int>(f.pixel_radius * 0.8);
      for (int dy = -r0; dy <= r0; ++dy) {
        for (int dx = -r0; dx <= r0; ++dx) {
          if (dx * dx + dy * dy > r0 * r0) continue;
          const int x = static_cast<int>(std::lround(f.pixel.u)) + dx;
          const int y = static_cast<int>(std::lround(f.pixel.v)) + dy;
          if (x < 0 || y < 0 || x >= r.image.width() || y >= r.image.height()) continue;
          ++inside;
          kept += range.contains(hsv::rgb_to_hsv(r.image.at(x, y)));
        }
      }
      cov.push_back(static_cast<double>(kept) / static_cast<double>(inside));
    }
    return cov;
  };
  const auto calibrated = coverage(1.0);
  double lowest = 1.0, at_gain = 1.0;
  std::string which;
  for (int i = 0; i <= 16; ++i) {
    const double g = 0.4 + 0.1 * i;
    const auto cov = coverage(g);
    for (std::size_t k = 0; k < cov.size(); ++k) {
      const double rel = cov[k] / calibrated[k];
      if (rel < lowest) {
        lowest = rel;
        at_gain = g;
        which = k < 6 ? "apple" : "orange";
      }
    }
  }
  const double secs = seconds_since(t0);
  return {lowest < kCoverageFloor && secs < kAc6BudgetS,
          fmt("lowest relative mask coverage %.2f (%s at gain %.1f; need < %.2f); %.2f s "
              "(budget %.0f s)",
              lowest, which.c_str(), at_gain, kCoverageFloor, secs, kAc6BudgetS)};
}

// ---------------------------------------------------------------------------

std::size_t brute_force_count(const scene::GroundTruth& truth,
                              const std::vector<detect::Detection>& dets,
                              const geometry::Homography& h, double threshold) {
  std::vector<std::vector<std::size_t>> options(truth.fruits.size());
  for (std::size_t t = 0; t < truth.fruits.size(); ++t) {
    for (std::size_t d = 0; d < dets.size(); ++d) {
      if (dets[d].label() != truth.fruits[t].label) continue;
      const auto w = geometry::apply_homography(h, dets[d].picking_point());
      if (std::hypot(w.x - truth.fruits[t].world.x, w.y - truth.fruits[t].world.y) <= threshold) {
        options[t].push_back(d);
      }
    }
  }
  std::vector<bool> used(dets.size(), false);
  std::size_t best = 0;
  std::function<void(std::size_t, std::size_t)> go = [&](std::size_t t, std::size_t n) {
    if (n + (truth.fruits.size() - t) <= best) return;
    if (t == truth.fruits.size()) {
      best = n;
      return;
    }
    for (std::size_t d : options[t]) {
      if (used[d]) continue;
      used[d] = true;
      go(t + 1, n + 1);
      used[d] = false;
    }
    go(t + 1, n);
  };
  go(0, 0);
  return best;
}

Outcome ac7_matching_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(77);
  std::normal_distribution<double> jitter(0.0, 12.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t greedy_total = 0, optimal_total = 0, mismatched_frames = 0;
  for (int i = 0; i < 200; ++i) {
    scene::SceneConfig cfg;
    cfg.rng_seed = static_cast<std::uint64_t>(1000 + i);
    cfg.fruit_count_per_class = i % 7;
    const auto fruits = scene::generate_pattern(cfg);
    const Eigen::Matrix3d to_image = geometry::plane_to_image(cfg.camera_matrix());
    const geometry::Homography h = cfg.pixel_to_world();
    scene::GroundTruth truth;
    truth.homography = h;
    std::vector<detect::Detection> dets;
    for (const auto& f : fruits) {
      const Eigen::Vector3d p = to_image * Eigen::Vector3d(f.position.x, f.position.y, 1.0);
      const geometry::PixelPoint c{p.x() / p.z(), p.y() / p.z()};
      truth.fruits.push_back({f.label, f.position, c, 30.0});
      const int copies = static_cast<int>(u(rng) * 3.0);
      for (int k = 0; k < copies; ++k) {
        const double x = c.u + jitter(rng), y = c.v + jitter(rng);
        const auto label =
            u(rng) < 0.15 ? (f.label == detect::FruitLabel::apple() ? detect::FruitLabel::orange()
                                                                    : detect::FruitLabel::apple())
                          : f.label;
        dets.emplace_back(label, u(rng), geometry::BoundingBox(x - 25, y - 25, x + 25, y + 25));
      }
    }
    for (int g = static_cast<int>(u(rng) * 4.0); g > 0; --g) {
      const double x = u(rng) * 600 + 20, y = u(rng) * 440 + 20;
      dets.emplace_back(u(rng) < 0.5 ? detect::FruitLabel::apple() : detect::FruitLabel::orange(),
                        u(rng), geometry::BoundingBox(x - 25, y - 25, x + 25, y + 25));
    }
    const auto greedy =
        eval::match_detections(truth, dets, h, eval::kDefaultMatchThresholdCm).pairs.size();
    const auto optimal = brute_force_count(truth, dets, h, eval::kDefaultMatchThresholdCm);
    greedy_total += greedy;
    optimal_total += optimal;
    mismatched_frames += greedy != optimal;
  }
  const double secs = seconds_since(t0);
  return {greedy_total == optimal_total && mismatched_frames == 0 && secs < kAc7BudgetS,
          fmt("greedy %zu vs brute-force %zu matches over 200 frames (%zu frames differ); "
              "%.2f s (budget %.0f s)",
              greedy_total, optimal_total, mismatched_frames, secs, kAc7BudgetS)};
}

// ---------------------------------------------------------------------------

ErrorCode error_of(const std::function<void()>& fn, bool& threw) {
  threw = false;
  try {
    fn();
  } catch (const Error& e) {
    threw = true;
    return e.code();
  }
  return ErrorCode::kInvalidArgument;
}

Outcome ac8_protocol() {
  const fs::path golden = fs::path(FRUITLOC_GOLDEN_DIR) / "protocol";
  Outcome out{true, ""};
  try {
    const auto script =
        detect::decode_stub_script(io::read_text_file(golden / "session.script.jsonl"));
    const std::string requests = io::read_text_file(golden / "session.requests.jsonl");
    const fs::path transcript =
        fs::temp_directory_path() / ("fruitloc-acceptance-" + std::to_string(::getpid()) + ".log");
    std::string responses;
    {
      auto backend = detect::stub_backend(script, detect::default_stub_executable(), transcript);
      std::istringstream in(requests);
      for (std::string line; std::getline(in, line);) {
        responses += backend.exchange(detect::encode_request(detect::decode_request(line)), 5s);
        responses += "\n";
      }
      backend.close();
    }
    const bool req_ok = io::read_text_file(transcript) == requests;
    const bool resp_ok = responses == io::read_text_file(golden / "session.responses.jsonl");
    fs::remove(transcript);
    out.pass = req_ok && resp_ok;
    out.detail = fmt("golden requests %s, responses %s;", req_ok ? "identical" : "DIFFER",
                     resp_ok ? "identical" : "DIFFER");

    auto check = [&](const char* name, std::vector<detect::StubStep> steps, ErrorCode want,
                     std::chrono::milliseconds timeout) {
      auto backend = detect::stub_backend(steps);
      detect::ExternalDetectorOptions opt;
      opt.timeout = timeout;
      bool threw = false;
      const ErrorCode got =
          error_of([&] { detect::detect_external(backend, {"f1", "a.png"}, opt); }, threw);
      const bool ok = threw && got == want;
      out.pass = out.pass && ok;
      out.detail +=
          fmt(" %s->%s%s", name, threw ? std::string(error_code_name(got)).c_str() : "none",
              ok ? "" : "(WRONG)");
    };
    detect::StubStep slow;
    slow.response = detect::DetectionResponse{};
    slow.delay_ms = 2000;
    check("timeout", {slow}, ErrorCode::kBackendTimeout, 200ms);
    detect::StubStep garbage;
    garbage.raw = "{\"frame_id\": truncated";
    check("malformed", {garbage}, ErrorCode::kProtocolViolation, 5s);
    detect::StubStep quit;
    quit.exit_code = 3;
    check("premature-exit", {quit}, ErrorCode::kBackendExited, 5s);
    check("exhausted", {}, ErrorCode::kScriptExhausted, 5s);
  } catch (const std::exception& e) {
    out = {false, std::string("unexpected error: ") + e.what()};
  }
  return out;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"AC-1", ac1_dlt_exactness},
      {"AC-2", ac2_midpoint_law},
      {"AC-3", ac3_indoor},
      {"AC-4", ac4_oracle_backend},
      {"AC-5", ac5_degradation_direction},
      {"AC-6", ac6_gain_fragility},
      {"AC-7", ac7_matching_oracle},
      {"AC-8", ac8_protocol},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("unexpected error: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %s  %s\n", name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
