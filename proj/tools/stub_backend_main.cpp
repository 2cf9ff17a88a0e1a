// Scripted detection backend used by tests and for offline evaluation.
//
//   fruitloc_stub_backend --script steps.jsonl [--transcript log.txt]
//   fruitloc_stub_backend --oracle
//
// --oracle answers each request with the ground-truth boxes stored next to
// the image (<stem>.truth.json).

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "fruitloc/detector.hpp"
#include "fruitloc/io.hpp"
#include "fruitloc/scene.hpp"

namespace {

namespace fs = std::filesystem;
using fruitloc::detect::DetectionResponse;
using fruitloc::detect::RawDetection;

DetectionResponse oracle_response(const fruitloc::detect::DetectionRequest& req) {
  fs::path truth_path = req.image_path;
  truth_path.replace_extension(".truth.json");
  const auto truth = fruitloc::scene::read_truth(truth_path);
  DetectionResponse resp;
  resp.frame_id = req.frame_id;
  for (const auto& f : truth.fruits) {
    const double r = f.pixel_radius;
    resp.detections.push_back(RawDetection{
        f.label.name(), 1.0, {f.pixel.u - r, f.pixel.v - r, f.pixel.u + r, f.pixel.v + r}});
  }
  return resp;
}

int run_oracle() {
  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    DetectionResponse resp;
    try {
      resp = oracle_response(fruitloc::detect::decode_request(line));
    } catch (const std::exception& e) {
      std::cerr << "stub: " << e.what() << "\n";
      return 2;
    }
    std::cout << fruitloc::detect::encode_response(resp) << "\n" << std::flush;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scripted detection backend", "fruitloc_stub_backend"};
  std::string script_path;
  std::optional<std::string> transcript_path;
  bool oracle = false;
  auto* script_opt = app.add_option("--script", script_path, "JSON-lines reply script");
  app.add_option("--transcript", transcript_path, "Append every request and reply here");
  app.add_flag("--oracle", oracle, "Reply with ground-truth boxes")->excludes(script_opt);
  CLI11_PARSE(app, argc, argv);

  if (oracle) return run_oracle();
  if (script_path.empty()) {
    std::cerr << "stub: --script or --oracle is required\n";
    return 2;
  }
  try {
    const auto script =
        fruitloc::detect::decode_stub_script(fruitloc::io::read_text_file(script_path));
    std::optional<std::ofstream> transcript;
    if (transcript_path) transcript.emplace(*transcript_path, std::ios::binary);
    return fruitloc::detect::run_stub(script, std::cin, std::cout,
                                      transcript ? &*transcript : nullptr);
  } catch (const std::exception& e) {
    std::cerr << "stub: " << e.what() << "\n";
    return 2;
  }
}
