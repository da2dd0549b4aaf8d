#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include <sys/types.h>

namespace geocollab::testing {

struct CommandResult {
  int exit_code = -1;
  std::string out;  // stdout only
};

/// Runs argv[0] with the given arguments and waits for it.
CommandResult run_command(const std::vector<std::string>& argv);

/// A child process whose stdout is read line by line.
class Subprocess {
 public:
  explicit Subprocess(const std::vector<std::string>& argv, const std::vector<std::string>& env = {});
  ~Subprocess();
  Subprocess(const Subprocess&) = delete;
  Subprocess& operator=(const Subprocess&) = delete;

  /// Next stdout line, or nullopt on EOF or timeout.
  std::optional<std::string> read_line(std::chrono::milliseconds timeout);
  void signal(int sig);
  /// Exit code, or 128 + signal number.
  std::optional<int> wait(std::chrono::milliseconds timeout);
  pid_t pid() const noexcept { return pid_; }

 private:
  pid_t pid_ = -1;
  int out_fd_ = -1;
  std::string buffer_;
  std::optional<int> status_;
};

/// Starts `geocollab serve` and returns the port it reports.
std::uint16_t read_listening_port(Subprocess& p, std::chrono::milliseconds timeout);

}  // namespace geocollab::testing
