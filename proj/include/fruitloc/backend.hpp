#pragma once

#include <sys/types.h>

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace fruitloc::detect {

// Exit status the stub backend uses when a request arrives after its script
// ran out. BackendProcess reports it as ScriptExhausted instead of
// BackendExited.
inline constexpr int kStubScriptExhaustedExit = 65;

// An external detector process speaking newline-delimited JSON over its
// standard input and output. One request is in flight at a time; a handle must
// not be shared between threads without external locking.
class BackendProcess {
 public:
  // Runs `command_line` through /bin/sh. stderr is inherited.
  explicit BackendProcess(const std::string& command_line);
  ~BackendProcess();

  BackendProcess(const BackendProcess&) = delete;
  BackendProcess& operator=(const BackendProcess&) = delete;
  BackendProcess(BackendProcess&& other) noexcept;
  BackendProcess& operator=(BackendProcess&& other) noexcept;

  // Writes `request` plus a newline and returns the next line of output
  // without its newline.
  //
  // Throws kBackendTimeout when no full line arrives in time (the process is
  // then killed, since a late reply would desynchronize the stream),
  // kBackendExited when the process closes its output, and kScriptExhausted
  // when it exits with kStubScriptExhaustedExit.
  std::string exchange(std::string_view request, std::chrono::milliseconds timeout);

  // Closes the backend's input and waits up to `grace` for it to exit before
  // killing it. Returns the exit status, or 128 + signal number.
  int close(std::chrono::milliseconds grace = std::chrono::seconds(5));

  bool running() const { return pid_ > 0 && !exit_status_; }
  pid_t pid() const { return pid_; }

  // File removed when the handle is destroyed (used for stub scripts).
  void own_temp_file(std::filesystem::path path) { temp_file_ = std::move(path); }

 private:
  int reap(std::chrono::milliseconds wait);
  void kill_now();
  [[noreturn]] void fail_exited(const std::string& context);
  void release();

  int fd_ = -1;
  pid_t pid_ = -1;
  std::string buffer_;
  std::optional<int> exit_status_;
  std::optional<std::filesystem::path> temp_file_;
};

}  // namespace fruitloc::detect
