// Copyright 2026 The WMI-AI Desk Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wmi {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform for the named operation.
class ShapeError : public Error {
 public:
  ShapeError(std::string op, std::string lhs, std::string rhs)
      : Error(op + ": shape mismatch " + lhs + " vs " + rhs),
        op_(std::move(op)),
        lhs_(std::move(lhs)),
        rhs_(std::move(rhs)) {}

  const std::string& op() const noexcept { return op_; }
  const std::string& lhs() const noexcept { return lhs_; }
  const std::string& rhs() const noexcept { return rhs_; }

 private:
  std::string op_;
  std::string lhs_;
  std::string rhs_;
};

/// Row normalization hit a row whose L2 norm is zero.
class ZeroNormError : public Error {
 public:
  explicit ZeroNormError(std::size_t row)
      : Error("l2_normalize: zero-norm row " + std::to_string(row)), row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

/// A precondition on argument values was violated (ranges, labels, sizes).
class ValueError : public Error {
 public:
  using Error::Error;
};

/// Graph-level misuse: non-scalar output, non-leaf wrt, disabled tracking.
class GraphError : public Error {
 public:
  using Error::Error;
};

/// A loss or activation became NaN/Inf during training.
class NonFiniteError : public Error {
 public:
  NonFiniteError(std::string what_tensor, std::size_t step)
      : Error("non-finite value in '" + what_tensor + "' at step " + std::to_string(step)),
        tensor_(std::move(what_tensor)),
        step_(step) {}

  const std::string& tensor() const noexcept { return tensor_; }
  std::size_t step() const noexcept { return step_; }

 private:
  std::string tensor_;
  std::size_t step_;
};

/// Malformed file or configuration input.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid run configuration (unknown key, out-of-range value).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace wmi
