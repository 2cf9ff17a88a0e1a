#include "fruitloc/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>

#include "fruitloc/detector.hpp"
#include "fruitloc/eval.hpp"
#include "fruitloc/geometry.hpp"
#include "fruitloc/hsv.hpp"
#include "fruitloc/io.hpp"
#include "fruitloc/scene.hpp"

namespace fruitloc::cli {

namespace fs = std::filesystem;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kBackendTimeout:
    case ErrorCode::kProtocolViolation:
    case ErrorCode::kBackendExited:
    case ErrorCode::kScriptExhausted:
      return kExitBackend;
    case ErrorCode::kIo:
      return kExitIo;
    default:
      return kExitPrecondition;
  }
}

namespace {

struct SynthOptions {
  fs::path out;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> presets{"indoor"};
  std::optional<fs::path> scene_config;
};

struct CalibrateOptions {
  std::optional<fs::path> correspondences;
  std::vector<fs::path> truths;
  fs::path out;
};

struct EvalOptions {
  fs::path scenes;
  fs::path calibration;
  std::string detector = "hsv";
  std::optional<fs::path> hsv_ranges;
  std::optional<fs::path> class_map;
  double confidence_threshold = 0.25;
  double timeout_s = 30.0;
  double threshold_cm = eval::kDefaultMatchThresholdCm;
  fs::path out;
  std::string format = "table";
};

struct ReportOptions {
  fs::path metrics;
  std::string format = "table";
  std::optional<fs::path> out;
};

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorCode::kIo, "cannot create directory " + dir.string());
  }
}

std::string preset_name(const std::string& preset) {
  return scene::is_lighting_preset(preset) ? preset : fs::path(preset).stem().string();
}

scene::DisturbanceConfig load_preset(const std::string& preset) {
  if (scene::is_lighting_preset(preset)) return scene::lighting_preset(preset);
  if (!fs::exists(preset)) {
    throw Error(ErrorCode::kInvalidArgument,
                "preset '" + preset + "' is neither indoor, shaded, direct_sun nor a file");
  }
  return scene::disturbance_from_json(io::read_json_file(preset));
}

int cmd_synth(const SynthOptions& opt, std::ostream& out) {
  if (opt.seeds.empty())
    throw Error(ErrorCode::kInvalidArgument, "at least one --seed is required");
  scene::SceneConfig base;
  if (opt.scene_config) base = scene::scene_config_from_json(io::read_json_file(*opt.scene_config));
  ensure_directory(opt.out);

  nlohmann::ordered_json manifest;
  manifest["scene_config"] = scene::to_json(base);
  nlohmann::ordered_json frames = nlohmann::ordered_json::array();
  for (const auto& preset : opt.presets) {
    const scene::DisturbanceConfig lighting = load_preset(preset);
    const std::string condition = preset_name(preset);
    for (const auto seed : opt.seeds) {
      scene::SceneConfig cfg = base;
      cfg.rng_seed = seed;
      const auto fruits = scene::generate_pattern(cfg);
      for (const bool disturbed : {false, true}) {
        const auto dist = disturbed ? scene::with_background_disturbances(lighting) : lighting;
        const std::string name =
            condition + "_s" + std::to_string(seed) + (disturbed ? "_dist" : "_clean");
        scene::write_bundle(opt.out, name, scene::render_scene(cfg, fruits, dist));
        nlohmann::ordered_json f;
        f["name"] = name;
        f["condition"] = condition;
        f["disturbances"] = disturbed;
        f["seed"] = seed;
        f["image"] = name + ".png";
        f["truth"] = name + ".truth.json";
        frames.push_back(std::move(f));
      }
    }
  }
  manifest["frames"] = std::move(frames);
  manifest["grid_correspondences"] = "grid.correspondences.json";

  io::write_text_file(opt.out / "grid.correspondences.json",
                      scene::to_json(scene::grid_correspondences(base)).dump(2) + "\n");
  const std::string text = manifest.dump(2) + "\n";
  io::write_text_file(opt.out / "manifest.json", text);
  out << text;
  return kExitOk;
}

int cmd_calibrate(const CalibrateOptions& opt, std::ostream& out) {
  std::vector<geometry::Correspondence> corrs;
  if (opt.correspondences) {
    corrs = scene::correspondences_from_json(io::read_json_file(*opt.correspondences));
  }
  for (const auto& path : opt.truths) {
    for (const auto& f : scene::read_truth(path).fruits) corrs.push_back({f.pixel, f.world});
  }
  const geometry::Homography h = geometry::estimate_homography(corrs);
  const geometry::Calibration cal{h, geometry::reprojection_error(h, corrs)};
  geometry::write_calibration(opt.out, cal);
  char line[128];
  std::snprintf(line, sizeof(line), "%zu correspondences, RMS reprojection error %.3e cm\n",
                corrs.size(), cal.rms_reprojection_error_cm);
  out << line;
  return kExitOk;
}

std::vector<eval::Frame> load_frames(const fs::path& dir) {
  const nlohmann::json manifest = io::read_json_file(dir / "manifest.json");
  std::vector<eval::Frame> frames;
  try {
    for (const auto& f : manifest.at("frames")) {
      eval::Frame frame;
      frame.frame_id = f.at("name").get<std::string>();
      frame.condition = f.at("condition").get<std::string>();
      frame.disturbances = f.at("disturbances").get<bool>();
      frame.image_path = fs::absolute(dir / f.at("image").get<std::string>());
      frame.truth = scene::read_truth(dir / f.at("truth").get<std::string>());
      frames.push_back(std::move(frame));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, (dir / "manifest.json").string() + ": " + e.what());
  }
  return frames;
}

int cmd_eval(const EvalOptions& opt, std::ostream& out) {
  const auto frames = load_frames(opt.scenes);
  const auto calibration = geometry::read_calibration(opt.calibration);
  const auto format = eval::parse_report_format(opt.format);
  if (!(opt.threshold_cm > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "--threshold-cm must be > 0");
  }

  eval::Detector detector;
  std::optional<detect::BackendProcess> backend;
  detect::ExternalDetectorOptions ext;
  std::vector<hsv::LabelledRange> ranges = hsv::default_ranges();
  if (opt.detector == "hsv") {
    if (opt.hsv_ranges) ranges = hsv::read_ranges(*opt.hsv_ranges);
    detector = [&ranges](const eval::Frame& frame) {
      return detect::detect_hsv(frame.image ? *frame.image : read_png(frame.image_path), ranges);
    };
  } else {
    if (opt.class_map)
      ext.class_map = detect::ClassMap::from_json(io::read_json_file(*opt.class_map));
    ext.confidence_threshold = opt.confidence_threshold;
    ext.timeout = std::chrono::milliseconds(static_cast<long long>(opt.timeout_s * 1000.0));
    backend.emplace(opt.detector);
    detector = [&](const eval::Frame& frame) {
      return detect::detect_external(*backend, {frame.frame_id, frame.image_path}, ext);
    };
  }

  const auto result =
      eval::run_benchmark(frames, detector, calibration.homography, opt.threshold_cm);
  if (backend) backend->close();

  ensure_directory(opt.out);
  std::vector<eval::MatchResult> matches;
  for (const auto& o : result.outcomes) matches.push_back(o.match);
  io::write_text_file(opt.out / "pairs.jsonl", eval::pair_dump(matches));
  io::write_text_file(opt.out / "report.csv",
                      eval::emit_report(result.report, eval::ReportFormat::kCsv));
  io::write_text_file(opt.out / "report.json",
                      eval::emit_report(result.report, eval::ReportFormat::kJson));
  io::write_text_file(opt.out / "report.txt",
                      eval::emit_report(result.report, eval::ReportFormat::kTable));
  out << eval::emit_report(result.report, format);
  return kExitOk;
}

int cmd_report(const ReportOptions& opt, std::ostream& out) {
  const auto report = eval::report_from_json(io::read_json_file(opt.metrics));
  const std::string text = eval::emit_report(report, eval::parse_report_format(opt.format));
  if (opt.out) {
    io::write_text_file(*opt.out, text);
  } else {
    out << text;
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fruit detection and localisation benchmark", "fruitloc"};
  app.require_subcommand(1);

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Render synthetic scene bundles");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--seed", synth.seeds, "Pattern seeds")->required();
  synth_cmd->add_option("--preset", synth.presets,
                        "Lighting presets: indoor, shaded, direct_sun or a disturbance JSON file");
  synth_cmd->add_option("--scene-config", synth.scene_config, "Scene config JSON");

  CalibrateOptions calibrate;
  auto* cal_cmd = app.add_subcommand("calibrate", "Estimate the pixel-to-world homography");
  auto* corr_opt = cal_cmd->add_option("--correspondences", calibrate.correspondences,
                                       "Correspondence JSON file");
  auto* truth_opt = cal_cmd->add_option("--truth", calibrate.truths, "Scene truth JSON files");
  cal_cmd->add_option("--out", calibrate.out, "Calibration JSON to write")->required();
  cal_cmd->callback([&] {
    if (corr_opt->count() == 0 && truth_opt->count() == 0) {
      throw CLI::ValidationError("calibrate", "--correspondences or --truth is required");
    }
  });

  EvalOptions evaluate;
  auto* eval_cmd = app.add_subcommand("eval", "Detect, match and report over a scene set");
  eval_cmd->add_option("--scenes", evaluate.scenes, "Directory written by synth")->required();
  eval_cmd->add_option("--calibration", evaluate.calibration, "Calibration JSON")->required();
  eval_cmd->add_option("--detector", evaluate.detector,
                       "'hsv' or the command line of an external backend");
  eval_cmd->add_option("--hsv-ranges", evaluate.hsv_ranges, "HSV range JSON");
  eval_cmd->add_option("--class-map", evaluate.class_map, "Backend class-name map JSON");
  eval_cmd->add_option("--confidence-threshold", evaluate.confidence_threshold,
                       "Drop external boxes below this confidence");
  eval_cmd->add_option("--timeout-s", evaluate.timeout_s, "Per-frame backend timeout");
  eval_cmd->add_option("--threshold-cm", evaluate.threshold_cm, "Match distance threshold");
  eval_cmd->add_option("--out", evaluate.out, "Output directory")->required();
  eval_cmd->add_option("--format", evaluate.format, "table, json or csv");

  ReportOptions report;
  auto* report_cmd = app.add_subcommand("report", "Re-render a metrics report");
  report_cmd->add_option("--metrics", report.metrics, "report.json from eval")->required();
  report_cmd->add_option("--format", report.format, "table, json or csv");
  report_cmd->add_option("--out", report.out, "Write here instead of stdout");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "fruitloc: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*synth_cmd) return cmd_synth(synth, out);
    if (*cal_cmd) return cmd_calibrate(calibrate, out);
    if (*eval_cmd) return cmd_eval(evaluate, out);
    if (*report_cmd) return cmd_report(report, out);
  } catch (const Error& e) {
    err << "fruitloc: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "fruitloc: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}

}  // namespace fruitloc::cli
