#pragma once

#include <array>
#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fruitloc/backend.hpp"
#include "fruitloc/detection.hpp"
#include "fruitloc/hsv.hpp"
#include "fruitloc/image.hpp"

namespace fruitloc::detect {

// Built-in colour detector: threshold, open/close, components and boxes for
// each labelled range. Output is ordered by confidence, then area, descending.
std::vector<Detection> detect_hsv(const RgbImage& image, std::span<const hsv::LabelledRange> ranges,
                                  const hsv::SegmentationParams& params = {});

// ---------------------------------------------------------------------------
// Wire protocol. One JSON object per line in each direction:
//
//   request:  {"frame_id":"<id>","image_path":"<path>"}
//   response: {"frame_id":"<id>","detections":[
//               {"label":"<str>","confidence":<num>,"box":[x1,y1,x2,y2]}]}
// ---------------------------------------------------------------------------

struct DetectionRequest {
  std::string frame_id;
  std::filesystem::path image_path;
};

struct RawDetection {
  std::string label;
  double confidence = 0.0;
  std::array<double, 4> box{};  // x1, y1, x2, y2 in pixels

  friend bool operator==(const RawDetection&, const RawDetection&) = default;
};

struct DetectionResponse {
  std::string frame_id;
  std::vector<RawDetection> detections;
  std::optional<std::string> error;  // set by adapters on per-frame failures

  friend bool operator==(const DetectionResponse&, const DetectionResponse&) = default;
};

std::string encode_request(const DetectionRequest& request);
// Throws kProtocolViolation on malformed input or an empty frame_id.
DetectionRequest decode_request(std::string_view line);

std::string encode_response(const DetectionResponse& response);
// Throws kProtocolViolation on malformed JSON, missing fields, boxes whose
// corners are out of order or non-finite, and confidences outside [0, 1].
DetectionResponse decode_response(std::string_view line);

struct ExternalDetectorOptions {
  ClassMap class_map;
  double confidence_threshold = 0.25;
  std::chrono::milliseconds timeout{30000};
};

// Sends one request, reads one response, checks the frame_id echo, drops
// boxes below the confidence threshold and maps class names.
std::vector<Detection> detect_external(BackendProcess& backend, const DetectionRequest& request,
                                       const ExternalDetectorOptions& options = {});

// ---------------------------------------------------------------------------
// Stub backend: a scripted test double speaking the wire protocol.
// ---------------------------------------------------------------------------

// One scripted reply. `raw` is written verbatim (for malformed-line tests);
// otherwise `response` is sent with its frame_id replaced by the request's.
// `delay_ms` sleeps before replying and `exit_code` makes the stub exit
// without replying.
struct StubStep {
  std::optional<DetectionResponse> response;
  std::optional<std::string> raw;
  int delay_ms = 0;
  std::optional<int> exit_code;
};

// Script file: one JSON object per line, e.g.
//   {"response":{"frame_id":"","detections":[...]}}
//   {"raw":"not json"}
//   {"delay_ms":5000,"response":{...}}
//   {"exit_code":3}
std::string encode_stub_script(std::span<const StubStep> script);
std::vector<StubStep> decode_stub_script(std::string_view text);

// Protocol loop of the stub executable. Returns the process exit status:
// 0 on end of input, kStubScriptExhaustedExit for an unscripted request, a
// step's exit_code, or 2 for a malformed request.
int run_stub(std::span<const StubStep> script, std::istream& in, std::ostream& out,
             std::ostream* transcript = nullptr);

// Path of the stub executable built alongside the library.
std::filesystem::path default_stub_executable();

// Launches the stub executable on `script` (written to a temporary file owned
// by the returned handle).
BackendProcess stub_backend(std::span<const StubStep> script,
                            const std::filesystem::path& executable = default_stub_executable(),
                            const std::optional<std::filesystem::path>& transcript = std::nullopt);

}  // namespace fruitloc::detect
