#pragma once

#include <stdexcept>
#include <string>

namespace mvdet {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: malformed files, out-of-range options. The CLI maps these
/// to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

#define MVDET_DEFINE_ERROR(Name, Base)      \
  class Name : public Base {                \
   public:                                  \
    explicit Name(const std::string& what)  \
        : Base(std::string(#Name ": ") + what) {} \
  };

// geometry
MVDET_DEFINE_ERROR(PointBehindCamera, Error)
MVDET_DEFINE_ERROR(IndexOutOfRange, ValidationError)
MVDET_DEFINE_ERROR(EmptyAfterTrim, ValidationError)
// nnet
MVDET_DEFINE_ERROR(ShapeMismatch, ValidationError)
MVDET_DEFINE_ERROR(NoRecordedForward, Error)
MVDET_DEFINE_ERROR(LabelOutOfRange, ValidationError)
MVDET_DEFINE_ERROR(StateShapeMismatch, ValidationError)
// augment / training
MVDET_DEFINE_ERROR(InsufficientPositives, ValidationError)
MVDET_DEFINE_ERROR(InsufficientData, ValidationError)
// multiview
MVDET_DEFINE_ERROR(DepthOutOfRange, ValidationError)
MVDET_DEFINE_ERROR(CalibrationMismatch, ValidationError)
MVDET_DEFINE_ERROR(NotEnoughPersons, ValidationError)
// forest
MVDET_DEFINE_ERROR(DimensionMismatch, ValidationError)
// metrics
MVDET_DEFINE_ERROR(NoGroundTruth, ValidationError)
MVDET_DEFINE_ERROR(NoMatches, ValidationError)
MVDET_DEFINE_ERROR(UndefinedMetric, ValidationError)
MVDET_DEFINE_ERROR(SingleClass, ValidationError)

#undef MVDET_DEFINE_ERROR

}  // namespace mvdet
