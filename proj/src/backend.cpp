#include "fruitloc/backend.hpp"

#include <poll.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <csignal>
#include <cstring>
#include <thread>
#include <vector>

#include "fruitloc/error.hpp"

extern char** environ;

namespace fruitloc::detect {
namespace {

using Clock = std::chrono::steady_clock;

int decode_status(int status) {
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
  return -1;
}

}  // namespace

BackendProcess::BackendProcess(const std::string& command_line) {
  if (command_line.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "empty backend command line");
  }
  // One bidirectional socket doubles as the child's stdin and stdout, and lets
  // us write with MSG_NOSIGNAL instead of touching the SIGPIPE disposition.
  int sv[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) {
    throw Error(ErrorCode::kIo, std::string("socketpair: ") + std::strerror(errno));
  }

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, sv[1], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, sv[1], STDOUT_FILENO);

  const std::string script = "exec " + command_line;
  std::vector<char*> argv = {const_cast<char*>("sh"), const_cast<char*>("-c"),
                             const_cast<char*>(script.c_str()), nullptr};
  pid_t pid = -1;
  const int rc = ::posix_spawn(&pid, "/bin/sh", &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(sv[1]);
  if (rc != 0) {
    ::close(sv[0]);
    throw Error(ErrorCode::kIo,
                "cannot launch backend '" + command_line + "': " + std::strerror(rc));
  }
  fd_ = sv[0];
  pid_ = pid;
}

BackendProcess::~BackendProcess() {
  if (pid_ > 0 && !exit_status_) {
    try {
      close(std::chrono::seconds(2));
    } catch (...) {
    }
  }
  release();
}

BackendProcess::BackendProcess(BackendProcess&& other) noexcept
    : fd_(other.fd_),
      pid_(other.pid_),
      buffer_(std::move(other.buffer_)),
      exit_status_(other.exit_status_),
      temp_file_(std::move(other.temp_file_)) {
  other.fd_ = -1;
  other.pid_ = -1;
  other.temp_file_.reset();
}

BackendProcess& BackendProcess::operator=(BackendProcess&& other) noexcept {
  if (this != &other) {
    BackendProcess tmp(std::move(other));
    std::swap(fd_, tmp.fd_);
    std::swap(pid_, tmp.pid_);
    std::swap(buffer_, tmp.buffer_);
    std::swap(exit_status_, tmp.exit_status_);
    std::swap(temp_file_, tmp.temp_file_);
  }
  return *this;
}

void BackendProcess::release() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
  if (temp_file_) {
    std::error_code ec;
    std::filesystem::remove(*temp_file_, ec);
    temp_file_.reset();
  }
}

int BackendProcess::reap(std::chrono::milliseconds wait) {
  if (exit_status_) return *exit_status_;
  const auto deadline = Clock::now() + wait;
  for (;;) {
    int status = 0;
    const pid_t r = ::waitpid(pid_, &status, WNOHANG);
    if (r == pid_) {
      exit_status_ = decode_status(status);
      return *exit_status_;
    }
    if (r < 0 && errno != EINTR) {
      exit_status_ = -1;
      return -1;
    }
    if (Clock::now() >= deadline) return -1;
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
}

void BackendProcess::kill_now() {
  if (pid_ <= 0 || exit_status_) return;
  ::kill(pid_, SIGKILL);
  reap(std::chrono::seconds(5));
}

void BackendProcess::fail_exited(const std::string& context) {
  // The peer closed its end; give the process a moment to finish exiting so
  // the status is available for the message.
  int status = reap(std::chrono::milliseconds(2000));
  if (status < 0 && !exit_status_) {
    kill_now();
    status = exit_status_.value_or(-1);
  }
  if (status == kStubScriptExhaustedExit) {
    throw Error(ErrorCode::kScriptExhausted,
                context + ": stub backend received more requests than scripted");
  }
  throw Error(ErrorCode::kBackendExited,
              context + ": backend exited with status " + std::to_string(status));
}

std::string BackendProcess::exchange(std::string_view request, std::chrono::milliseconds timeout) {
  if (pid_ <= 0) throw Error(ErrorCode::kBackendExited, "backend handle is closed");
  if (exit_status_) {
    throw Error(ErrorCode::kBackendExited,
                "backend already exited with status " + std::to_string(*exit_status_));
  }

  std::string line(request);
  line.push_back('\n');
  std::size_t sent = 0;
  while (sent < line.size()) {
    const ssize_t n = ::send(fd_, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail_exited("writing request");
    }
    sent += static_cast<std::size_t>(n);
  }

  const auto deadline = Clock::now() + timeout;
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string out = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return out;
    }
    const auto remaining =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (remaining.count() <= 0) {
      kill_now();
      throw Error(ErrorCode::kBackendTimeout,
                  "no response line within " + std::to_string(timeout.count()) + " ms");
    }
    pollfd pfd{fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::kIo, std::string("poll: ") + std::strerror(errno));
    }
    if (ready == 0) continue;
    char chunk[4096];
    const ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      fail_exited("reading response");
    }
    if (n == 0) fail_exited("reading response");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

int BackendProcess::close(std::chrono::milliseconds grace) {
  if (pid_ <= 0) return exit_status_.value_or(-1);
  if (exit_status_) return *exit_status_;
  if (fd_ >= 0) ::shutdown(fd_, SHUT_WR);
  if (reap(grace) < 0 && !exit_status_) {
    ::kill(pid_, SIGTERM);
    if (reap(std::chrono::milliseconds(500)) < 0 && !exit_status_) kill_now();
  }
  return exit_status_.value_or(-1);
}

}  // namespace fruitloc::detect
