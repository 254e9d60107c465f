#pragma once

// Fitness evaluation by an external worker process speaking newline-delimited
// JSON: requests on the child's stdin, one response line per request id on
// its stdout, in any order.
//
// A worker that stays silent for `timeout` seconds while requests are
// outstanding is killed and its unanswered requests fail; the next batch
// respawns it. A worker that exits fails its outstanding requests the same
// way. Only a failure to spawn at all is fatal.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>
#include <wordexp.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <future>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "evaluation.hpp"
#include "log.hpp"

extern char** environ;

namespace cellspace {

namespace detail {

/// Shell-style word splitting (quotes, escapes) without command substitution.
inline std::vector<std::string> split_command(const std::string& command) {
  wordexp_t words;
  const int rc = wordexp(command.c_str(), &words, WRDE_NOCMD);
  if (rc != 0) throw EvaluatorError("cannot parse evaluator command: " + command);
  std::vector<std::string> out(words.we_wordv, words.we_wordv + words.we_wordc);
  wordfree(&words);
  if (out.empty()) throw EvaluatorError("empty evaluator command");
  return out;
}

class ChildProcess {
 public:
  explicit ChildProcess(const std::vector<std::string>& argv) {
    int to_child[2];
    int from_child[2];
    if (pipe2(to_child, O_CLOEXEC) != 0) throw EvaluatorError("pipe: " + std::string(std::strerror(errno)));
    if (pipe2(from_child, O_CLOEXEC) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw EvaluatorError("pipe: " + std::string(std::strerror(errno)));
    }

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);

    // The parent ignores SIGPIPE; the worker gets default handling back.
    posix_spawnattr_t attr;
    posix_spawnattr_init(&attr);
    sigset_t defaults;
    sigemptyset(&defaults);
    sigaddset(&defaults, SIGPIPE);
    posix_spawnattr_setsigdefault(&attr, &defaults);
    posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETSIGDEF);

    std::vector<char*> cargv;
    for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
    cargv.push_back(nullptr);
    const int rc = posix_spawnp(&pid_, cargv[0], &actions, &attr, cargv.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    posix_spawnattr_destroy(&attr);
    ::close(to_child[0]);
    ::close(from_child[1]);
    if (rc != 0) {
      ::close(to_child[1]);
      ::close(from_child[0]);
      throw EvaluatorError("cannot spawn evaluator '" + argv[0] + "': " + std::strerror(rc));
    }
    stdin_fd_ = to_child[1];
    stdout_fd_ = from_child[0];
  }

  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  ~ChildProcess() {
    close_stdin();
    // Give a well-behaved worker a moment to exit on EOF.
    for (int i = 0; i < 50 && !reaped_; ++i) {
      if (::waitpid(pid_, nullptr, WNOHANG) == pid_) reaped_ = true;
      else std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    kill_now();
    if (stdout_fd_ >= 0) ::close(stdout_fd_);
  }

  int stdout_fd() const { return stdout_fd_; }

  bool write_all(const std::string& data) {
    std::lock_guard lock(write_mu_);
    if (stdin_fd_ < 0) return false;
    const char* p = data.data();
    std::size_t left = data.size();
    while (left > 0) {
      const auto n = ::write(stdin_fd_, p, left);
      if (n < 0) {
        if (errno == EINTR) continue;
        return false;
      }
      p += n;
      left -= static_cast<std::size_t>(n);
    }
    return true;
  }

  void close_stdin() {
    std::lock_guard lock(write_mu_);
    if (stdin_fd_ >= 0) ::close(stdin_fd_);
    stdin_fd_ = -1;
  }

  void kill_now() {
    if (reaped_) return;
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
    reaped_ = true;
  }

 private:
  pid_t pid_ = -1;
  int stdin_fd_ = -1;
  int stdout_fd_ = -1;
  bool reaped_ = false;
  std::mutex write_mu_;
};

inline void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] {
    struct sigaction sa {};
    sa.sa_handler = SIG_IGN;
    sigemptyset(&sa.sa_mask);
    ::sigaction(SIGPIPE, &sa, nullptr);
  });
}

}  // namespace detail

class ExternalEvaluator final : public Evaluator {
 public:
  /// `command` is split shell-style and run directly (no shell). `workers`
  /// processes share each batch round-robin.
  ExternalEvaluator(std::string command, double timeout_s, std::size_t workers = 1)
      : argv_(detail::split_command(command)),
        timeout_(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(timeout_s))),
        workers_(std::max<std::size_t>(1, workers)) {
    detail::ignore_sigpipe();
    // Fail fast on an unspawnable command.
    for (auto& w : workers_) w.process = std::make_unique<detail::ChildProcess>(argv_);
  }

  std::vector<EvaluationResult> evaluate(std::span<const EvaluationRequest> batch) override {
    std::vector<EvaluationResult> out(batch.size());
    const auto n = workers_.size();
    if (n == 1 || batch.size() <= 1) {
      std::vector<std::size_t> all(batch.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      run(workers_[0], batch, all, out);
      return out;
    }
    std::vector<std::vector<std::size_t>> shares(n);
    for (std::size_t i = 0; i < batch.size(); ++i) shares[i % n].push_back(i);
    std::vector<std::future<void>> jobs;
    for (std::size_t w = 0; w < n; ++w) {
      if (shares[w].empty()) continue;
      jobs.push_back(std::async(std::launch::async, [&, w] { run(workers_[w], batch, shares[w], out); }));
    }
    for (auto& j : jobs) j.get();
    return out;
  }

 private:
  struct Worker {
    std::unique_ptr<detail::ChildProcess> process;
    std::string buffer;
  };

  void run(Worker& w, std::span<const EvaluationRequest> batch,
           const std::vector<std::size_t>& slots, std::vector<EvaluationResult>& out) {
    if (!w.process) {
      w.process = std::make_unique<detail::ChildProcess>(argv_);
      w.buffer.clear();
    }
    std::unordered_map<std::uint64_t, std::size_t> pending;
    std::string payload;
    for (auto slot : slots) {
      pending.emplace(batch[slot].id, slot);
      payload += to_wire(batch[slot]).dump();
      payload += '\n';
    }

    auto* proc = w.process.get();
    std::thread writer([proc, data = std::move(payload)] {
      if (!proc->write_all(data)) log::debug("evaluator stdin closed before all requests were written");
    });

    const auto answer = [&](EvaluationResult r) {
      const auto it = pending.find(r.id);
      if (it == pending.end()) {
        log::debug("ignoring response for unknown or answered id " + std::to_string(r.id));
        return false;
      }
      if (!r.ok()) log::info("evaluation " + std::to_string(r.id) + " failed: " + r.message);
      out[it->second] = std::move(r);
      pending.erase(it);
      return true;
    };
    const auto fail_pending = [&](const std::string& why) {
      for (const auto& [id, slot] : pending) {
        log::warn("evaluation " + std::to_string(id) + ": " + why);
        out[slot] = EvaluationResult::failure(id, why);
      }
      pending.clear();
    };

    auto deadline = std::chrono::steady_clock::now() + timeout_;
    bool dead = false;
    char chunk[65536];
    while (!pending.empty()) {
      const auto now = std::chrono::steady_clock::now();
      if (now >= deadline) {
        fail_pending("timeout");
        dead = true;
        break;
      }
      const auto wait_ms = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count() + 1;
      pollfd pfd{proc->stdout_fd(), POLLIN, 0};
      const int ready = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(wait_ms, 1 << 30)));
      if (ready < 0) {
        if (errno == EINTR) continue;
        fail_pending(std::string("poll: ") + std::strerror(errno));
        dead = true;
        break;
      }
      if (ready == 0) continue;
      const auto got = ::read(proc->stdout_fd(), chunk, sizeof chunk);
      if (got < 0) {
        if (errno == EINTR) continue;
        fail_pending(std::string("read: ") + std::strerror(errno));
        dead = true;
        break;
      }
      if (got == 0) {
        fail_pending("evaluator exited");
        dead = true;
        break;
      }
      w.buffer.append(chunk, static_cast<std::size_t>(got));
      bool progress = false;
      for (auto nl = w.buffer.find('\n'); nl != std::string::npos; nl = w.buffer.find('\n')) {
        std::string line = w.buffer.substr(0, nl);
        w.buffer.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        try {
          progress |= answer(parse_result_line(line));
        } catch (const ProtocolError& e) {
          log::warn(std::string("protocol violation: ") + e.what());
          if (e.id()) progress |= answer(EvaluationResult::failure(*e.id(), e.what()));
        }
      }
      if (progress) deadline = std::chrono::steady_clock::now() + timeout_;
    }

    if (dead) proc->kill_now();
    writer.join();
    if (dead) {
      w.process.reset();
      w.buffer.clear();
    }
  }

  std::vector<std::string> argv_;
  std::chrono::steady_clock::duration timeout_;
  std::vector<Worker> workers_;
};

}  // namespace cellspace
