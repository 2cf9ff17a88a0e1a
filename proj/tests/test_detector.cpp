#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "fruitloc/backend.hpp"
#include "fruitloc/detector.hpp"
#include "fruitloc/error.hpp"
#include "fruitloc/io.hpp"

using namespace fruitloc;
using namespace fruitloc::detect;
using namespace std::chrono_literals;

namespace fs = std::filesystem;

namespace {

const fs::path kGolden = fs::path(FRUITLOC_GOLDEN_DIR) / "protocol";

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

StubStep reply(std::vector<RawDetection> dets) {
  StubStep s;
  s.response = DetectionResponse{"", std::move(dets), std::nullopt};
  return s;
}

StubStep raw(std::string line) {
  StubStep s;
  s.raw = std::move(line);
  return s;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("fruitloc-test-" + std::to_string(::getpid()) + "-" + name);
}

}  // namespace

TEST(Labels, ClassMapIsTotal) {
  const ClassMap map;
  EXPECT_EQ(map.map("apple"), FruitLabel::apple());
  EXPECT_EQ(map.map("orange"), FruitLabel::orange());
  EXPECT_EQ(map.map("sports ball"), FruitLabel::other("sports ball"));
  EXPECT_FALSE(map.map("").is_fruit());
  EXPECT_FALSE(map.map("\xff\xfe weird").is_fruit());

  const ClassMap custom = ClassMap::from_json({{"sports ball", "orange"}, {"apple", "other"}});
  EXPECT_EQ(custom.map("sports ball"), FruitLabel::orange());
  EXPECT_FALSE(custom.map("apple").is_fruit());
  EXPECT_THROW(ClassMap::from_json({{"x", "banana"}}), Error);
}

TEST(Labels, DetectionValidatesConfidence) {
  EXPECT_THROW(Detection(FruitLabel::apple(), 1.5, {0, 0, 1, 1}), Error);
  EXPECT_THROW(Detection(FruitLabel::apple(), -0.1, {0, 0, 1, 1}), Error);
  const Detection d(FruitLabel::apple(), 0.5, {10, 10, 50, 50});
  EXPECT_EQ(d.picking_point(), (geometry::PixelPoint{30, 30}));
}

TEST(Codec, RequestKeyOrder) {
  EXPECT_EQ(encode_request({"f1", "/tmp/a.png"}), R"({"frame_id":"f1","image_path":"/tmp/a.png"})");
  const DetectionRequest back = decode_request(R"({"image_path":"x.png","frame_id":"f2"})");
  EXPECT_EQ(back.frame_id, "f2");
  EXPECT_EQ(back.image_path, fs::path("x.png"));
}

TEST(Codec, ResponseRoundTrip) {
  const DetectionResponse r{"f", {{"orange", 0.5, {1, 2, 3, 4}}}, std::nullopt};
  const DetectionResponse back = decode_response(encode_response(r));
  EXPECT_EQ(back.frame_id, "f");
  ASSERT_EQ(back.detections.size(), 1u);
  EXPECT_EQ(back.detections[0].box, (std::array<double, 4>{1, 2, 3, 4}));
}

TEST(Codec, ResponseViolations) {
  for (const char* bad : {
           "not json",
           "[1,2]",
           R"({"detections":[]})",
           R"({"frame_id":"f"})",
           R"({"frame_id":"f","detections":[{"label":"a","confidence":0.5,"box":[3,0,1,1]}]})",
           R"({"frame_id":"f","detections":[{"label":"a","confidence":1.5,"box":[0,0,1,1]}]})",
           R"({"frame_id":"f","detections":[{"label":"a","confidence":0.5,"box":[0,0,1]}]})",
           R"({"frame_id":"f","detections":[{"label":"a","confidence":0.5,"box":[0,0,1,"x"]}]})",
           R"({"frame_id":"f","detections":[{"confidence":0.5,"box":[0,0,1,1]}]})",
       }) {
    EXPECT_EQ(code_of([&] { decode_response(bad); }), ErrorCode::kProtocolViolation) << bad;
  }
  const auto withErr = decode_response(R"({"frame_id":"f","detections":[],"error":"oom"})");
  EXPECT_EQ(withErr.error, "oom");
}

TEST(StubLoop, EmptyScriptNoRequests) {
  std::istringstream in;
  std::ostringstream out;
  EXPECT_EQ(run_stub({}, in, out), 0);
  EXPECT_EQ(out.str(), "");
}

TEST(StubLoop, RepliesInOrderWithFrameIdSubstituted) {
  const std::vector<StubStep> script{reply({}), reply({{"apple", 1, {0, 0, 1, 1}}}),
                                     raw("verbatim")};
  std::istringstream in(encode_request({"a", "a.png"}) + "\n" + encode_request({"b", "b.png"}) +
                        "\n" + encode_request({"c", "c.png"}) + "\n");
  std::ostringstream out, transcript;
  EXPECT_EQ(run_stub(script, in, out, &transcript), 0);
  const auto got = lines_of(out.str());
  ASSERT_EQ(got.size(), 3u);
  EXPECT_EQ(decode_response(got[0]).frame_id, "a");
  EXPECT_EQ(decode_response(got[1]).frame_id, "b");
  EXPECT_EQ(got[2], "verbatim");
  EXPECT_EQ(transcript.str(), in.str());
}

TEST(StubLoop, ExitStatuses) {
  std::ostringstream out;
  std::istringstream one(encode_request({"a", "a.png"}) + "\n");
  EXPECT_EQ(run_stub({}, one, out), kStubScriptExhaustedExit);
  std::istringstream bad("garbage\n");
  EXPECT_EQ(run_stub({}, bad, out), 2);
  StubStep quit;
  quit.exit_code = 7;
  std::istringstream again(encode_request({"a", "a.png"}) + "\n");
  EXPECT_EQ(run_stub(std::vector<StubStep>{quit}, again, out), 7);
}

TEST(StubLoop, ScriptRoundTrip) {
  StubStep slow = reply({{"orange", 0.25, {1.5, 2, 3, 4}}});
  slow.delay_ms = 10;
  StubStep quit;
  quit.exit_code = 3;
  const std::vector<StubStep> script{slow, raw("{oops"), quit};
  const std::string text = encode_stub_script(script);
  EXPECT_EQ(encode_stub_script(decode_stub_script(text)), text);
  EXPECT_THROW(decode_stub_script("{}\n"), Error);
}

TEST(Backend, GoldenTranscript) {
  const auto script = decode_stub_script(io::read_text_file(kGolden / "session.script.jsonl"));
  const auto requests = lines_of(io::read_text_file(kGolden / "session.requests.jsonl"));
  const auto transcript = temp_path("transcript.jsonl");
  std::string responses;
  {
    BackendProcess backend = stub_backend(script, default_stub_executable(), transcript);
    for (const auto& line : requests) {
      const DetectionRequest req = decode_request(line);
      responses += backend.exchange(encode_request(req), 5s) + "\n";
    }
    EXPECT_EQ(backend.close(), 0);
  }
  EXPECT_EQ(io::read_text_file(transcript), io::read_text_file(kGolden / "session.requests.jsonl"));
  EXPECT_EQ(responses, io::read_text_file(kGolden / "session.responses.jsonl"));
  fs::remove(transcript);
}

TEST(Backend, IdenticalSessionsGiveIdenticalPayloads) {
  const auto script = decode_stub_script(io::read_text_file(kGolden / "session.script.jsonl"));
  auto session = [&] {
    BackendProcess backend = stub_backend(script);
    std::string all;
    for (const char* id : {"x", "y", "z"}) all += backend.exchange(encode_request({id, "p"}), 5s);
    return all;
  };
  EXPECT_EQ(session(), session());
}

TEST(External, MapsAndFilters) {
  const auto script = decode_stub_script(io::read_text_file(kGolden / "session.script.jsonl"));
  BackendProcess backend = stub_backend(script);
  ExternalDetectorOptions opt;
  opt.confidence_threshold = 0.6;

  const auto first = detect_external(backend, {"f1", "a.png"}, opt);
  ASSERT_EQ(first.size(), 1u);
  EXPECT_EQ(first[0].label(), FruitLabel::orange());
  EXPECT_EQ(first[0].picking_point(), (geometry::PixelPoint{30, 30}));

  EXPECT_TRUE(detect_external(backend, {"f2", "b.png"}, opt).empty());

  const auto third = detect_external(backend, {"f3", "c.png"}, opt);
  ASSERT_EQ(third.size(), 1u);  // sports ball at 0.55 is below 0.6
  EXPECT_EQ(third[0].label(), FruitLabel::apple());
  for (const auto& d : third) EXPECT_EQ(d.picking_point(), geometry::bbox_midpoint(d.box()));
}

TEST(External, UnknownClassBecomesOther) {
  BackendProcess backend =
      stub_backend(std::vector<StubStep>{reply({{"sports ball", 0.9, {0, 0, 20, 20}}})});
  const auto dets = detect_external(backend, {"f", "a.png"});
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_EQ(dets[0].label(), FruitLabel::other("sports ball"));
  EXPECT_FALSE(dets[0].label().is_fruit());
}

TEST(External, EmptyResponse) {
  BackendProcess backend = stub_backend(std::vector<StubStep>{reply({})});
  EXPECT_TRUE(detect_external(backend, {"f", "a.png"}).empty());
}

TEST(External, ErrorPaths) {
  ExternalDetectorOptions fast;
  fast.timeout = 200ms;

  StubStep slow = reply({});
  slow.delay_ms = 3000;
  {
    BackendProcess backend = stub_backend(std::vector<StubStep>{slow});
    const auto start = std::chrono::steady_clock::now();
    EXPECT_EQ(code_of([&] { detect_external(backend, {"f", "a"}, fast); }),
              ErrorCode::kBackendTimeout);
    EXPECT_LT(std::chrono::steady_clock::now() - start, 2s);
    EXPECT_FALSE(backend.running());
  }
  {
    BackendProcess backend = stub_backend(std::vector<StubStep>{raw("this is not json")});
    EXPECT_EQ(code_of([&] { detect_external(backend, {"f", "a"}); }),
              ErrorCode::kProtocolViolation);
  }
  {
    BackendProcess backend =
        stub_backend(std::vector<StubStep>{raw(R"({"frame_id":"other","detections":[]})")});
    EXPECT_EQ(code_of([&] { detect_external(backend, {"f", "a"}); }),
              ErrorCode::kProtocolViolation);
  }
  {
    StubStep quit;
    quit.exit_code = 3;
    BackendProcess backend = stub_backend(std::vector<StubStep>{quit});
    EXPECT_EQ(code_of([&] { detect_external(backend, {"f", "a"}); }), ErrorCode::kBackendExited);
  }
  {
    BackendProcess backend = stub_backend(std::vector<StubStep>{reply({})});
    detect_external(backend, {"f", "a"});
    EXPECT_EQ(code_of([&] { detect_external(backend, {"g", "b"}); }), ErrorCode::kScriptExhausted);
  }
  {
    BackendProcess backend("/nonexistent/fruitloc-backend");
    EXPECT_EQ(code_of([&] { detect_external(backend, {"f", "a"}); }), ErrorCode::kBackendExited);
  }
}

TEST(External, ErrorsNameTheFrame) {
  BackendProcess backend = stub_backend(std::vector<StubStep>{raw("nope")});
  try {
    detect_external(backend, {"pattern_7", "a"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("pattern_7"), std::string::npos);
  }
}

TEST(Backend, CleanShutdownWithoutRequests) {
  BackendProcess backend = stub_backend({});
  EXPECT_TRUE(backend.running());
  EXPECT_EQ(backend.close(), 0);
  EXPECT_FALSE(backend.running());
}

TEST(Backend, MoveKeepsProcess) {
  BackendProcess a = stub_backend(std::vector<StubStep>{reply({})});
  const pid_t pid = a.pid();
  BackendProcess b = std::move(a);
  EXPECT_EQ(b.pid(), pid);
  BackendProcess c = stub_backend({});
  c = std::move(b);
  EXPECT_EQ(c.pid(), pid);
  EXPECT_TRUE(detect_external(c, {"f", "a"}).empty());
}
