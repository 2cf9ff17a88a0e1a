#include "fruitloc/detector.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <thread>

#include "fruitloc/error.hpp"
#include "fruitloc/io.hpp"

#ifndef FRUITLOC_STUB_BACKEND_PATH
#define FRUITLOC_STUB_BACKEND_PATH "fruitloc_stub_backend"
#endif

namespace fruitloc::detect {

using nlohmann::json;
using nlohmann::ordered_json;

std::vector<Detection> detect_hsv(const RgbImage& image, std::span<const hsv::LabelledRange> ranges,
                                  const hsv::SegmentationParams& params) {
  struct Ranked {
    Detection detection;
    std::size_t area;
  };
  std::vector<Ranked> ranked;
  for (const auto& r : ranges) {
    const hsv::BinaryMask mask =
        hsv::morphological_open_close(hsv::threshold_mask(image, r.range), params.kernel_radius);
    const auto contours = hsv::extract_components(mask, params.min_area);
    const auto dets = hsv::detections_from_contours(contours, r.label);
    for (std::size_t i = 0; i < dets.size(); ++i) {
      ranked.push_back({dets[i], contours[i].area});
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.detection.confidence() != b.detection.confidence()) {
      return a.detection.confidence() > b.detection.confidence();
    }
    return a.area > b.area;
  });
  std::vector<Detection> out;
  out.reserve(ranked.size());
  for (auto& r : ranked) out.push_back(std::move(r.detection));
  return out;
}

namespace {

[[noreturn]] void violation(const std::string& what) {
  throw Error(ErrorCode::kProtocolViolation, what);
}

json parse_line(std::string_view line) {
  try {
    json doc = json::parse(line);
    if (!doc.is_object()) violation("line is not a JSON object");
    return doc;
  } catch (const json::parse_error& e) {
    violation(std::string("malformed JSON line: ") + e.what());
  }
}

const json& field(const json& doc, const char* key, json::value_t type) {
  const auto it = doc.find(key);
  if (it == doc.end()) violation(std::string("missing field '") + key + "'");
  const bool number_ok = type == json::value_t::number_float && it->is_number();
  if (!number_ok && it->type() != type) {
    violation(std::string("field '") + key + "' has the wrong type");
  }
  return *it;
}

ordered_json response_to_json(const DetectionResponse& response) {
  ordered_json doc;
  doc["frame_id"] = response.frame_id;
  ordered_json dets = ordered_json::array();
  for (const auto& d : response.detections) {
    ordered_json item;
    item["label"] = d.label;
    item["confidence"] = d.confidence;
    item["box"] = {d.box[0], d.box[1], d.box[2], d.box[3]};
    dets.push_back(std::move(item));
  }
  doc["detections"] = std::move(dets);
  if (response.error) doc["error"] = *response.error;
  return doc;
}

DetectionResponse response_from_json(const json& doc) {
  DetectionResponse out;
  out.frame_id = field(doc, "frame_id", json::value_t::string).get<std::string>();
  for (const auto& item : field(doc, "detections", json::value_t::array)) {
    if (!item.is_object()) violation("detection entry is not an object");
    RawDetection d;
    d.label = field(item, "label", json::value_t::string).get<std::string>();
    d.confidence = field(item, "confidence", json::value_t::number_float).get<double>();
    const json& box = field(item, "box", json::value_t::array);
    if (box.size() != 4) violation("box must have exactly four numbers");
    for (std::size_t i = 0; i < 4; ++i) {
      if (!box[i].is_number()) violation("box entries must be numbers");
      d.box[i] = box[i].get<double>();
      if (!std::isfinite(d.box[i])) violation("box entries must be finite");
    }
    if (d.box[0] > d.box[2] || d.box[1] > d.box[3]) {
      violation("box corners out of order in frame '" + out.frame_id + "'");
    }
    if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) {
      violation("confidence outside [0, 1] in frame '" + out.frame_id + "'");
    }
    out.detections.push_back(std::move(d));
  }
  if (const auto it = doc.find("error"); it != doc.end() && it->is_string()) {
    out.error = it->get<std::string>();
  }
  return out;
}

}  // namespace

std::string encode_request(const DetectionRequest& request) {
  ordered_json doc;
  doc["frame_id"] = request.frame_id;
  doc["image_path"] = request.image_path.string();
  return doc.dump();
}

DetectionRequest decode_request(std::string_view line) {
  const json doc = parse_line(line);
  DetectionRequest out;
  out.frame_id = field(doc, "frame_id", json::value_t::string).get<std::string>();
  out.image_path = field(doc, "image_path", json::value_t::string).get<std::string>();
  if (out.frame_id.empty()) violation("empty frame_id");
  return out;
}

std::string encode_response(const DetectionResponse& response) {
  return response_to_json(response).dump();
}

DetectionResponse decode_response(std::string_view line) {
  return response_from_json(parse_line(line));
}

std::vector<Detection> detect_external(BackendProcess& backend, const DetectionRequest& request,
                                       const ExternalDetectorOptions& options) {
  if (request.frame_id.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "request frame_id must be non-empty");
  }
  std::string line;
  DetectionResponse response;
  try {
    line = backend.exchange(encode_request(request), options.timeout);
    response = decode_response(line);
  } catch (const Error& e) {
    throw Error(e.code(), "frame '" + request.frame_id + "': " + e.what());
  }
  if (response.frame_id != request.frame_id) {
    violation("frame '" + request.frame_id + "': response echoed frame_id '" + response.frame_id +
              "'");
  }

  std::vector<Detection> out;
  for (const auto& d : response.detections) {
    if (d.confidence < options.confidence_threshold) continue;
    out.emplace_back(options.class_map.map(d.label), d.confidence,
                     geometry::BoundingBox(d.box[0], d.box[1], d.box[2], d.box[3]));
  }
  return out;
}

std::string encode_stub_script(std::span<const StubStep> script) {
  std::string out;
  for (const auto& step : script) {
    ordered_json doc = ordered_json::object();
    if (step.delay_ms > 0) doc["delay_ms"] = step.delay_ms;
    if (step.exit_code) doc["exit_code"] = *step.exit_code;
    if (step.raw) doc["raw"] = *step.raw;
    if (step.response) doc["response"] = response_to_json(*step.response);
    out += doc.dump();
    out += '\n';
  }
  return out;
}

std::vector<StubStep> decode_stub_script(std::string_view text) {
  std::vector<StubStep> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kInvalidArgument, std::string("bad stub script line: ") + e.what());
    }
    StubStep step;
    step.delay_ms = doc.value("delay_ms", 0);
    if (doc.contains("exit_code")) step.exit_code = doc["exit_code"].get<int>();
    if (doc.contains("raw")) step.raw = doc["raw"].get<std::string>();
    if (doc.contains("response")) {
      try {
        step.response = response_from_json(doc["response"]);
      } catch (const Error& e) {
        throw Error(ErrorCode::kInvalidArgument,
                    std::string("bad stub script response: ") + e.what());
      }
    }
    if (!step.exit_code && !step.raw && !step.response) {
      throw Error(ErrorCode::kInvalidArgument, "stub script step needs response, raw or exit_code");
    }
    out.push_back(std::move(step));
  }
  return out;
}

int run_stub(std::span<const StubStep> script, std::istream& in, std::ostream& out,
             std::ostream* transcript) {
  std::size_t next = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (transcript != nullptr) *transcript << line << '\n' << std::flush;
    DetectionRequest request;
    try {
      request = decode_request(line);
    } catch (const Error&) {
      return 2;
    }
    if (next >= script.size()) return kStubScriptExhaustedExit;
    const StubStep& step = script[next++];
    if (step.delay_ms > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(step.delay_ms));
    }
    if (step.exit_code) return *step.exit_code;
    if (step.raw) {
      out << *step.raw << '\n' << std::flush;
    } else {
      DetectionResponse reply = *step.response;
      reply.frame_id = request.frame_id;
      out << encode_response(reply) << '\n' << std::flush;
    }
  }
  return 0;
}

std::filesystem::path default_stub_executable() { return FRUITLOC_STUB_BACKEND_PATH; }

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  out += "'";
  return out;
}

}  // namespace

BackendProcess stub_backend(std::span<const StubStep> script,
                            const std::filesystem::path& executable,
                            const std::optional<std::filesystem::path>& transcript) {
  static std::atomic<unsigned> counter{0};
  const auto script_path = std::filesystem::temp_directory_path() /
                           ("fruitloc-stub-" + std::to_string(::getpid()) + "-" +
                            std::to_string(counter.fetch_add(1)) + ".jsonl");
  io::write_text_file(script_path, encode_stub_script(script));

  std::string command =
      shell_quote(executable.string()) + " --script " + shell_quote(script_path.string());
  if (transcript) command += " --transcript " + shell_quote(transcript->string());
  BackendProcess process(command);
  process.own_temp_file(script_path);
  return process;
}

}  // namespace fruitloc::detect
