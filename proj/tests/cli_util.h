// Copyright 2026 The PCSC Authors
// SPDX-License-Identifier: Apache-2.0
//
// Helpers for tests that drive the pcsc binary as a subprocess.
#pragma once

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#ifndef PCSC_CLI_PATH
#error "PCSC_CLI_PATH must point at the pcsc executable"
#endif

namespace pcsc::testing {

namespace fs = std::filesystem;

inline fs::path FreshDir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pcsc_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

inline std::string Quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

// Runs `pcsc <args...>` with an optional PCSC_THREADS value; stdout and
// stderr go to `log` when given. Returns the exit status.
inline int RunCli(const std::vector<std::string>& args, int threads = 0,
                  const std::string& log = "") {
  std::string cmd;
  if (threads > 0) cmd += "PCSC_THREADS=" + std::to_string(threads) + " ";
  cmd += Quote(PCSC_CLI_PATH);
  for (const auto& a : args) cmd += " " + Quote(a);
  cmd += log.empty() ? " >/dev/null 2>&1" : " >" + Quote(log) + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

inline std::string ReadFile(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void WriteFile(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::vector<std::string> Lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

// Every regular file under `dir`, keyed by relative path.
inline std::vector<std::pair<std::string, std::string>> Snapshot(const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) {
      out.push_back({fs::relative(e.path(), dir).string(), ReadFile(e.path())});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace pcsc::testing
