#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

#include <fmt/format.h>

#include "sizer/backends.hpp"
#include "sizer/kv.hpp"

namespace sizer {

namespace {

struct Fd {
  int fd = -1;
  explicit Fd(int f = -1) : fd(f) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  ~Fd() {
    if (fd >= 0) ::close(fd);
  }
};

}  // namespace

ProcessResult run_process(const std::vector<std::string>& argv,
                          const std::filesystem::path& cwd, std::chrono::milliseconds timeout) {
  if (argv.empty()) throw Error(ErrorCode::spawn_failed, "empty command line");
  const auto out_path = cwd / "sim.stdout";
  const auto err_path = cwd / "sim.stderr";

  int pipefd[2];
  if (::pipe2(pipefd, O_CLOEXEC) != 0) {
    throw Error(ErrorCode::spawn_failed, fmt::format("pipe: {}", std::strerror(errno)));
  }
  Fd rd(pipefd[0]);
  Fd wr(pipefd[1]);

  std::vector<char*> cargv;
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);
  const std::string cwd_s = cwd.string();
  const std::string out_s = out_path.string();
  const std::string err_s = err_path.string();

  const pid_t pid = ::fork();
  if (pid < 0) {
    throw Error(ErrorCode::spawn_failed, fmt::format("fork: {}", std::strerror(errno)));
  }
  if (pid == 0) {
    int err = 0;
    if (::chdir(cwd_s.c_str()) != 0) {
      err = errno;
    } else {
      const int o = ::open(out_s.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
      const int e = ::open(err_s.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
      if (o < 0 || e < 0) {
        err = errno;
      } else {
        ::dup2(o, STDOUT_FILENO);
        ::dup2(e, STDERR_FILENO);
        ::execvp(cargv[0], cargv.data());
        err = errno;
      }
    }
    [[maybe_unused]] auto n = ::write(pipefd[1], &err, sizeof(err));
    ::_exit(127);
  }
  ::close(wr.fd);
  wr.fd = -1;

  int child_err = 0;
  if (::read(rd.fd, &child_err, sizeof(child_err)) == static_cast<ssize_t>(sizeof(child_err))) {
    ::waitpid(pid, nullptr, 0);
    throw Error(ErrorCode::spawn_failed,
                fmt::format("cannot start '{}': {}", argv[0], std::strerror(child_err)));
  }

  const auto deadline = std::chrono::steady_clock::now() + timeout;
  int status = 0;
  for (;;) {
    const pid_t r = ::waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (r < 0 && errno != EINTR) {
      throw Error(ErrorCode::process_failed, fmt::format("waitpid: {}", std::strerror(errno)));
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      ::kill(pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      throw Error(ErrorCode::timeout,
                  fmt::format("'{}' exceeded the {} ms timeout (workdir {})", argv[0],
                              timeout.count(), cwd_s));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }

  ProcessResult res;
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  res.stdout_text = std::filesystem::exists(out_path) ? kv::read_text(out_path) : "";
  res.stderr_text = std::filesystem::exists(err_path) ? kv::read_text(err_path) : "";
  return res;
}

}  // namespace sizer
