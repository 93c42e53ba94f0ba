// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace polykan {

/// File could not be opened, read, written, or has a malformed layout.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite kernel input, reported with its (batch, input) coordinates.
class NumericError : public std::runtime_error {
 public:
  NumericError(std::size_t batch, std::size_t input)
      : std::runtime_error("non-finite input at (b=" + std::to_string(batch) +
                           ", j=" + std::to_string(input) + ")"),
        batch_(batch),
        input_(input) {}

  std::size_t batch() const noexcept { return batch_; }
  std::size_t input() const noexcept { return input_; }

 private:
  std::size_t batch_;
  std::size_t input_;
};

}  // namespace polykan
