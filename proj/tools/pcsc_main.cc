// Copyright 2026 The PCSC Authors
// SPDX-License-Identifier: Apache-2.0
//
#include "commands.h"

int main(int argc, char** argv) { return pcsc::cli::Main(argc, argv); }
