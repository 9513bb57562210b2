// SPDX-License-Identifier: Apache-2.0
#include "abo/process.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "abo/error.hpp"

namespace abo {

namespace {

struct Fd {
  int fd = -1;
  Fd() = default;
  explicit Fd(int f) : fd(f) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  ~Fd() { reset(); }
  void reset() {
    if (fd >= 0) ::close(fd);
    fd = -1;
  }
};

}  // namespace

LineProcessResult run_line_process(const std::string& command, const std::vector<std::string>& input,
                                   std::chrono::milliseconds timeout) {
  int in_pipe[2], out_pipe[2];
  if (::pipe(in_pipe) != 0) throw Error(ErrorCode::Io, std::string("pipe: ") + std::strerror(errno));
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw Error(ErrorCode::Io, std::string("pipe: ") + std::strerror(errno));
  }

  pid_t pid = ::fork();
  if (pid < 0) throw Error(ErrorCode::Io, std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  Fd to_child(in_pipe[1]);
  Fd from_child(out_pipe[0]);
  ::fcntl(to_child.fd, F_SETFL, O_NONBLOCK);

  std::string payload;
  for (const auto& line : input) {
    payload += line;
    payload += '\n';
  }
  std::size_t written = 0;
  if (payload.empty()) to_child.reset();

  std::string output;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  char buf[4096];
  bool timed_out = false;
  while (from_child.fd >= 0) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      timed_out = true;
      break;
    }
    pollfd fds[2];
    nfds_t n = 0;
    fds[n++] = {from_child.fd, POLLIN, 0};
    if (to_child.fd >= 0) fds[n++] = {to_child.fd, POLLOUT, 0};
    int rc = ::poll(fds, n, static_cast<int>(left.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (rc == 0) continue;
    if (n == 2 && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP))) {
      if (fds[1].revents & (POLLERR | POLLHUP)) {
        to_child.reset();
      } else {
        ssize_t w = ::write(to_child.fd, payload.data() + written, payload.size() - written);
        if (w > 0) written += static_cast<std::size_t>(w);
        if (w < 0 && errno != EAGAIN) to_child.reset();
        if (written == payload.size()) to_child.reset();
      }
    }
    if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
      ssize_t r = ::read(from_child.fd, buf, sizeof buf);
      if (r > 0)
        output.append(buf, static_cast<std::size_t>(r));
      else if (r == 0 || errno != EINTR)
        from_child.reset();
    }
  }
  to_child.reset();
  from_child.reset();

  int status = 0;
  if (timed_out) {
    ::kill(pid, SIGKILL);
    ::waitpid(pid, &status, 0);
    throw Error(ErrorCode::Timeout, "command timed out after " + std::to_string(timeout.count()) + " ms: " + command);
  }
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }

  LineProcessResult res;
  res.exit_status = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::size_t start = 0;
  while (start < output.size()) {
    auto nl = output.find('\n', start);
    std::string line = output.substr(start, nl == std::string::npos ? std::string::npos : nl - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    res.lines.push_back(std::move(line));
    if (nl == std::string::npos) break;
    start = nl + 1;
  }
  return res;
}

}  // namespace abo
