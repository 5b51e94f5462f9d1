// Copyright 2026 The PCSC Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Exit codes: 0 success, 2 invalid input or
// arguments, 1 anything else.
#pragma once

namespace pcsc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitValidation = 2;

// Applies PCSC_THREADS, parses arguments and dispatches to a subcommand.
int Main(int argc, char** argv);

}  // namespace pcsc::cli
