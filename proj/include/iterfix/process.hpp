#pragma once

// Runs a shell command in a directory with a wall-clock bound, capturing
// stdout and stderr interleaved. POSIX only.

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>
#include <filesystem>
#include <string>

#include <fcntl.h>
#include <poll.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "iterfix/error.hpp"

namespace iterfix {

struct CommandResult {
  int exit_code = -1;  // -1 when killed by a signal
  bool timed_out = false;
  std::string output;
  std::chrono::milliseconds elapsed{0};
};

inline CommandResult run_command(const std::string& command, const std::filesystem::path& cwd,
                                 std::chrono::milliseconds timeout) {
  using clock = std::chrono::steady_clock;
  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0)
    throw InfrastructureError(std::string("pipe failed: ") + std::strerror(errno));

  // Everything the child touches is prepared before fork.
  const std::string dir = cwd.string();
  const char* argv[] = {"/bin/sh", "-c", command.c_str(), nullptr};

  const auto start = clock::now();
  pid_t pid = ::fork();
  if (pid < 0) {
    ::close(fds[0]);
    ::close(fds[1]);
    throw InfrastructureError(std::string("fork failed: ") + std::strerror(errno));
  }
  if (pid == 0) {
    ::setpgid(0, 0);
    if (::chdir(dir.c_str()) != 0) ::_exit(127);
    int devnull = ::open("/dev/null", O_RDONLY);
    if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
    ::dup2(fds[1], STDOUT_FILENO);
    ::dup2(fds[1], STDERR_FILENO);
    ::execv("/bin/sh", const_cast<char* const*>(argv));
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  ::close(fds[1]);

  CommandResult result;
  const auto deadline = start + timeout;
  char buf[8192];
  bool open = true;
  while (open) {
    auto remaining =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now()).count();
    if (remaining <= 0) {
      result.timed_out = true;
      break;
    }
    pollfd p{fds[0], POLLIN, 0};
    int rc = ::poll(&p, 1, static_cast<int>(std::min<long long>(remaining, 1000)));
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (rc == 0) continue;
    ssize_t n = ::read(fds[0], buf, sizeof buf);
    if (n > 0) {
      result.output.append(buf, static_cast<std::size_t>(n));
    } else if (n == 0) {
      open = false;
    } else if (errno != EINTR) {
      open = false;
    }
  }

  int status = 0;
  if (result.timed_out) {
    ::kill(-pid, SIGKILL);
    ::waitpid(pid, &status, 0);
  } else {
    // Output closed; wait for the shell itself within what is left of the bound.
    while (true) {
      pid_t w = ::waitpid(pid, &status, WNOHANG);
      if (w == pid) break;
      if (w < 0 && errno != EINTR) break;
      if (clock::now() >= deadline) {
        result.timed_out = true;
        ::kill(-pid, SIGKILL);
        ::waitpid(pid, &status, 0);
        break;
      }
      ::usleep(2000);
    }
    // Reap stragglers that kept no handle on the pipe.
    ::kill(-pid, SIGKILL);
  }
  // Drain whatever was buffered before the kill.
  ::fcntl(fds[0], F_SETFL, O_NONBLOCK);
  for (ssize_t n; (n = ::read(fds[0], buf, sizeof buf)) > 0;)
    result.output.append(buf, static_cast<std::size_t>(n));
  ::close(fds[0]);

  result.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(clock::now() - start);
  if (!result.timed_out) {
    if (WIFEXITED(status))
      result.exit_code = WEXITSTATUS(status);
    else
      result.exit_code = -1;
  }
  return result;
}

}  // namespace iterfix
