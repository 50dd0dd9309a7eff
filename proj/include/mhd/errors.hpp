#pragma once

#include <stdexcept>
#include <string>

namespace mhd {

// One exception type per failure family; all carry a plain message with
// enough context (cell index, time, clause name) to act on.
#define MHD_DEFINE_ERROR(Name)                                   \
  struct Name : std::runtime_error {                             \
    explicit Name(const std::string& msg)                        \
        : std::runtime_error(std::string(#Name) + ": " + msg) {} \
  }

MHD_DEFINE_ERROR(DomainError);
MHD_DEFINE_ERROR(NumericalError);
MHD_DEFINE_ERROR(TabulationError);
MHD_DEFINE_ERROR(StructuralViolation);
MHD_DEFINE_ERROR(PositivityError);
MHD_DEFINE_ERROR(CflError);
MHD_DEFINE_ERROR(StencilError);
MHD_DEFINE_ERROR(SolveError);
MHD_DEFINE_ERROR(ConfigError);
MHD_DEFINE_ERROR(GridMismatch);
MHD_DEFINE_ERROR(AlignmentError);
MHD_DEFINE_ERROR(ConstraintError);
MHD_DEFINE_ERROR(DegenerateError);
MHD_DEFINE_ERROR(DataError);
MHD_DEFINE_ERROR(WeightError);
MHD_DEFINE_ERROR(HypothesisViolation);

#undef MHD_DEFINE_ERROR

}  // namespace mhd
