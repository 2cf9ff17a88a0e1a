#include "fruitloc/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "fruitloc/error.hpp"

namespace fruitloc {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return "InvalidArgument";
    case ErrorCode::kInsufficientCorrespondences:
      return "InsufficientCorrespondences";
    case ErrorCode::kDegenerateConfiguration:
      return "DegenerateConfiguration";
    case ErrorCode::kPointAtInfinity:
      return "PointAtInfinity";
    case ErrorCode::kEmptyInput:
      return "EmptyInput";
    case ErrorCode::kNoMatches:
      return "NoMatches";
    case ErrorCode::kGridTooSmall:
      return "GridTooSmall";
    case ErrorCode::kBackendTimeout:
      return "BackendTimeout";
    case ErrorCode::kProtocolViolation:
      return "ProtocolViolation";
    case ErrorCode::kBackendExited:
      return "BackendExited";
    case ErrorCode::kScriptExhausted:
      return "ScriptExhausted";
    case ErrorCode::kIo:
      return "IoError";
  }
  return "Unknown";
}

namespace io {

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  return buffer.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot create " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kInvalidArgument, path.string() + ": malformed JSON (" + e.what() + ")");
  }
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string hex_digest(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

}  // namespace io
}  // namespace fruitloc
