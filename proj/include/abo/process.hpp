// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <string>
#include <vector>

namespace abo {

struct LineProcessResult {
  std::vector<std::string> lines;  // stdout split on '\n', trailing '\r' removed
  int exit_status = 0;
};

/// Runs `command` through /bin/sh, writes one input line per element
/// (LF-terminated) to its stdin, closes stdin and collects stdout.
/// Throws Timeout when the process does not finish within `timeout`, and Io
/// when it cannot be started.
LineProcessResult run_line_process(const std::string& command, const std::vector<std::string>& input,
                                   std::chrono::milliseconds timeout);

}  // namespace abo
