// SPDX-License-Identifier: Apache-2.0
//
// Error types shared by every stage of the pipeline.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace loopforge {

/// Base class for all user-facing errors (bad input, failed transform
/// preconditions, unschedulable kernels, interpreter faults).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A position inside some source text. Lines and columns are 1-based; zero
/// means "unknown".
struct SourceSpan {
  int line = 0;
  int column = 0;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t offset)
      : Error(message), offset_(offset), span_{1, static_cast<int>(offset) + 1} {}
  ParseError(const std::string& message, SourceSpan span)
      : Error(message), offset_(0), span_(span) {}

  std::size_t offset() const { return offset_; }
  SourceSpan span() const { return span_; }

 private:
  std::size_t offset_;
  SourceSpan span_;
};

/// Raised when a transform's preconditions do not hold. Carries the span of
/// the script statement when raised from a transform script.
class TransformError : public Error {
 public:
  using Error::Error;
  TransformError(const std::string& message, SourceSpan span) : Error(message), span_(span) {}

  SourceSpan span() const { return span_; }

 private:
  SourceSpan span_;
};

/// Raised when the scheduler cannot order a kernel.
class ScheduleError : public Error {
 public:
  using Error::Error;
};

/// Raised by the reference interpreter (out-of-bounds access, uninitialized
/// temporary, violated assumption).
class InterpError : public Error {
 public:
  using Error::Error;
};

/// A broken internal invariant. The CLI maps this to exit code 2.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace loopforge
