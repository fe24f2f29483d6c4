#include "tikzkit/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <random>

#include "tikzkit/errors.hpp"

extern char** environ;

namespace tikzkit {
namespace {

constexpr std::string_view kTruncationMarker = "[... output truncated ...]\n";

void close_quietly(int fd) {
  if (fd >= 0) ::close(fd);
}

}  // namespace

std::string tail_truncate(std::string text, std::size_t max_bytes) {
  if (text.size() <= max_bytes) return text;
  std::string out(kTruncationMarker);
  out.append(text, text.size() - max_bytes, max_bytes);
  return out;
}

bool executable_available(const std::string& program) {
  if (program.empty()) return false;
  if (program.find('/') != std::string::npos) return ::access(program.c_str(), X_OK) == 0;
  const char* path = std::getenv("PATH");
  if (!path) return false;
  std::string_view rest(path);
  while (!rest.empty()) {
    const auto colon = rest.find(':');
    auto dir = rest.substr(0, colon);
    if (dir.empty()) dir = ".";
    const std::string candidate = std::string(dir) + "/" + program;
    struct stat st{};
    if (::stat(candidate.c_str(), &st) == 0 && S_ISREG(st.st_mode) &&
        ::access(candidate.c_str(), X_OK) == 0) {
      return true;
    }
    if (colon == std::string_view::npos) break;
    rest.remove_prefix(colon + 1);
  }
  return false;
}

ProcessResult run_process(const std::vector<std::string>& argv, const ProcessOptions& options) {
  if (argv.empty()) throw InputError("run_process: empty argument vector");
  ProcessResult result;
  const auto started = std::chrono::steady_clock::now();

  // Everything the child needs is prepared before fork.
  std::vector<char*> cargv;
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);
  std::vector<std::string> env_storage;
  for (char** e = environ; e && *e; ++e) {
    std::string_view entry(*e);
    bool overridden = false;
    for (const auto& [k, v] : options.extra_env) {
      if (entry.size() > k.size() && entry.substr(0, k.size()) == k && entry[k.size()] == '=') {
        overridden = true;
      }
    }
    if (!overridden) env_storage.emplace_back(entry);
  }
  for (const auto& [k, v] : options.extra_env) env_storage.push_back(k + "=" + v);
  std::vector<char*> cenv;
  for (auto& e : env_storage) cenv.push_back(e.data());
  cenv.push_back(nullptr);
  const std::string cwd = options.cwd.string();

  int out_pipe[2];
  int err_pipe[2];  // reports exec failure errno
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) throw InfrastructureError("pipe2 failed");
  if (::pipe2(err_pipe, O_CLOEXEC) != 0) {
    close_quietly(out_pipe[0]);
    close_quietly(out_pipe[1]);
    throw InfrastructureError("pipe2 failed");
  }

  const pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) close_quietly(fd);
    throw InfrastructureError(std::string("fork failed: ") + std::strerror(errno));
  }
  if (pid == 0) {
    ::setpgid(0, 0);
    const int devnull = ::open("/dev/null", O_RDONLY);
    if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::dup2(out_pipe[1], STDERR_FILENO);
    if (!cwd.empty() && ::chdir(cwd.c_str()) != 0) {
      const int e = errno;
      (void)!::write(err_pipe[1], &e, sizeof e);
      ::_exit(127);
    }
    ::execvpe(cargv[0], cargv.data(), cenv.data());
    const int e = errno;
    (void)!::write(err_pipe[1], &e, sizeof e);
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  close_quietly(out_pipe[1]);
  close_quietly(err_pipe[1]);

  int exec_errno = 0;
  const ssize_t got = ::read(err_pipe[0], &exec_errno, sizeof exec_errno);
  close_quietly(err_pipe[0]);
  if (got == static_cast<ssize_t>(sizeof exec_errno)) {
    close_quietly(out_pipe[0]);
    int status = 0;
    ::waitpid(pid, &status, 0);
    if (exec_errno == ENOENT || exec_errno == EACCES || exec_errno == ENOTDIR) {
      result.not_found = true;
      result.output = std::string("cannot execute ") + argv[0] + ": " + std::strerror(exec_errno);
      return result;
    }
    throw InfrastructureError(std::string("cannot start ") + argv[0] + ": " +
                              std::strerror(exec_errno));
  }

  const auto deadline = started + options.timeout;
  std::string output;
  char buf[8192];
  bool open = true;
  bool reaped = false;
  int status = 0;
  while (open) {
    const auto now = std::chrono::steady_clock::now();
    if (now >= deadline) {
      result.timed_out = true;
      break;
    }
    const auto remaining =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
    pollfd pfd{out_pipe[0], POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(remaining, 100)));
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (rc == 0) {
      // A backgrounded grandchild may hold the pipe open after the main
      // process exits; stop reading once the main process is gone.
      if (::waitpid(pid, &status, WNOHANG) == pid) {
        reaped = true;
        break;
      }
      continue;
    }
    const ssize_t n = ::read(out_pipe[0], buf, sizeof buf);
    if (n <= 0) {
      open = false;
      break;
    }
    output.append(buf, static_cast<std::size_t>(n));
    // Bound memory while keeping the tail.
    if (output.size() > 2 * options.max_output_bytes + sizeof buf) {
      output.erase(0, output.size() - options.max_output_bytes);
    }
  }

  if (reaped) {
    // nothing to wait for
  } else if (result.timed_out) {
    ::kill(-pid, SIGKILL);
    ::waitpid(pid, &status, 0);
  } else {
    // Output closed; wait for exit but still honour the deadline.
    while (true) {
      const pid_t w = ::waitpid(pid, &status, WNOHANG);
      if (w == pid) break;
      if (w < 0 && errno != EINTR) break;
      if (std::chrono::steady_clock::now() >= deadline) {
        result.timed_out = true;
        ::kill(-pid, SIGKILL);
        ::waitpid(pid, &status, 0);
        break;
      }
      ::usleep(2000);
    }
  }
  close_quietly(out_pipe[0]);
  // Reap any stragglers left in the group.
  ::kill(-pid, SIGKILL);

  if (!result.timed_out && WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
  result.output = tail_truncate(std::move(output), options.max_output_bytes);
  result.duration = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - started);
  return result;
}

TempDir::TempDir(const std::filesystem::path& parent, const std::string& prefix) {
  std::error_code ec;
  std::filesystem::create_directories(parent, ec);
  std::string tmpl = (parent / (prefix + "XXXXXX")).string();
  if (::mkdtemp(tmpl.data()) == nullptr) {
    throw InfrastructureError("mkdtemp failed under " + parent.string() + ": " +
                              std::strerror(errno));
  }
  path_ = tmpl;
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

}  // namespace tikzkit
