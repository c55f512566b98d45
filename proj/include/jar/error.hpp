// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace jar {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define JAR_DECLARE_ERROR(Name)            \
  class Name : public Error {              \
   public:                                 \
    using Error::Error;                    \
  }

JAR_DECLARE_ERROR(InsufficientDataError);
JAR_DECLARE_ERROR(InvalidInputError);
JAR_DECLARE_ERROR(InvalidRangeError);
JAR_DECLARE_ERROR(DegenerateSamplingError);
JAR_DECLARE_ERROR(ShapeError);
JAR_DECLARE_ERROR(NumericOverflowError);
JAR_DECLARE_ERROR(TrainingDivergedError);
JAR_DECLARE_ERROR(FormatError);
JAR_DECLARE_ERROR(CorruptModelError);
JAR_DECLARE_ERROR(IoError);
JAR_DECLARE_ERROR(ParseError);
JAR_DECLARE_ERROR(SchemaError);
JAR_DECLARE_ERROR(ValidationError);
JAR_DECLARE_ERROR(PlanViolationError);
JAR_DECLARE_ERROR(GenerationError);

#undef JAR_DECLARE_ERROR

/// A limb whose endpoints coincide (or whose length is not positive).
class DegenerateLimbError : public Error {
 public:
  DegenerateLimbError(std::size_t edge, std::optional<std::size_t> frame, const std::string& what)
      : Error(what), edge_(edge), frame_(frame) {}

  std::size_t edge() const noexcept { return edge_; }
  std::optional<std::size_t> frame() const noexcept { return frame_; }

 private:
  std::size_t edge_;
  std::optional<std::size_t> frame_;
};

}  // namespace jar
