#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fruitloc {

enum class ErrorCode {
  kInvalidArgument,
  kInsufficientCorrespondences,
  kDegenerateConfiguration,
  kPointAtInfinity,
  kEmptyInput,
  kNoMatches,
  kGridTooSmall,
  kBackendTimeout,
  kProtocolViolation,
  kBackendExited,
  kScriptExhausted,
  kIo,
};

std::string_view error_code_name(ErrorCode code);

// Every failure raised by the library carries one of the codes above so that
// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fruitloc
