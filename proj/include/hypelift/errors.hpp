#pragma once

#include <stdexcept>
#include <string>

namespace hypelift {

/// Base for all library errors. `kind()` is the stable name written into
/// machine-readable error records by the CLI.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "Error"; }
};

#define HYPELIFT_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                         \
   public:                                                            \
    using Error::Error;                                               \
    const char* kind() const noexcept override { return #Name; }      \
  };

HYPELIFT_DEFINE_ERROR(DimensionError)
HYPELIFT_DEFINE_ERROR(DegenerateDirectionError)
HYPELIFT_DEFINE_ERROR(DegenerateAngleError)
HYPELIFT_DEFINE_ERROR(BoundsError)
HYPELIFT_DEFINE_ERROR(PlacementError)
HYPELIFT_DEFINE_ERROR(FormatError)
HYPELIFT_DEFINE_ERROR(NumericalError)
HYPELIFT_DEFINE_ERROR(ConfigError)
HYPELIFT_DEFINE_ERROR(StageDependencyError)
HYPELIFT_DEFINE_ERROR(StaleArtifactError)

#undef HYPELIFT_DEFINE_ERROR

}  // namespace hypelift
