// Copyright 2026 The PCSC Authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <stdexcept>
#include <string>

namespace pcsc {

// Bad user input: malformed config, schema violations, precondition
// failures on values supplied from outside. The CLI exits with code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Internal structure mismatch: shape disagreement between tensors, missing
// stage history, misaligned side inputs.
class StructuralError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace pcsc
