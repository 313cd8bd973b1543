#pragma once

// Internal helpers for spawning the CLI binary as child components
// (process-per-agent benchmark mode and the multi-process use case).

#include <optional>
#include <string>
#include <vector>

#include <sys/types.h>

namespace riclab::subprocess {

struct Child {
  pid_t pid = -1;
  int out_fd = -1;  // child stdout
};

/// argv[0] must be an absolute path. Child stdout is piped back.
std::optional<Child> spawn_capture(const std::vector<std::string>& args);

/// Reads child stdout to EOF and closes the pipe.
std::string read_all(int fd);

/// Blocking reads until one full line arrives (for readiness handshakes).
std::optional<std::string> read_line(int fd);

/// waitpid; -1 when the child did not exit normally.
int wait_exit(pid_t pid);

void send_sigterm(pid_t pid);

/// $RICLAB_BIN when set, else /proc/self/exe.
std::string runner_binary();

}  // namespace riclab::subprocess
