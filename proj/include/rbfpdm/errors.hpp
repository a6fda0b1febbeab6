#pragma once

#include <stdexcept>
#include <string>

namespace rbfpdm {

/// Base of every runtime failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A documented precondition was violated by the caller.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

#define RBFPDM_DEFINE_ERROR(Name) \
  class Name : public Error {     \
   public:                        \
    using Error::Error;           \
  }

// sdf_grid
RBFPDM_DEFINE_ERROR(DegenerateGradient);
RBFPDM_DEFINE_ERROR(EmptyBand);
RBFPDM_DEFINE_ERROR(InvalidAxis);
RBFPDM_DEFINE_ERROR(FormatError);
RBFPDM_DEFINE_ERROR(IoError);

// rbf_surface
RBFPDM_DEFINE_ERROR(InvalidBand);
RBFPDM_DEFINE_ERROR(DuplicateSite);
RBFPDM_DEFINE_ERROR(SingularSystem);
RBFPDM_DEFINE_ERROR(EmptyIsosurface);

// losses
RBFPDM_DEFINE_ERROR(MeanUnavailable);
RBFPDM_DEFINE_ERROR(NonPositiveFloor);

// metrics
RBFPDM_DEFINE_ERROR(ZeroVariance);
RBFPDM_DEFINE_ERROR(DegenerateCohort);
RBFPDM_DEFINE_ERROR(EmptyMesh);

#undef RBFPDM_DEFINE_ERROR

inline void require(bool condition, const std::string &what) {
  if (!condition) throw PreconditionError(what);
}

}  // namespace rbfpdm
