#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <variant>

namespace esvo {

enum class ErrorCode {
  kInvalidArgument,
  kBehindCamera,
  kNonPositiveInverseDepth,
  kCayleySingularity,
  kNoPoses,
  kPixelOutOfRange,
  kNonMonotonicStream,
  kInvalidDecay,
  kSampleOutOfBounds,
  kGradientOutOfBounds,
  kDegeneratePatch,
  kZeroSpread,
  kUndefinedVariance,
  kUnobservableDepth,
  kInsufficientSupport,
  kDiverged,
  kEmptyMap,
  kCannotBootstrap,
  kFrameRateTooLow,
  kCameraInsidePlane,
  kWarpInvalid,
  kNoOverlap,
  kParse,
  kIo,
};

const char* to_string(ErrorCode code);

/// Thrown for contract violations and unrecoverable data problems.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Recoverable per-sample outcomes (one event, one patch, one point) that the
// caller is expected to skip rather than abort on.
enum class Failure {
  kPatchOutOfBounds,
  kNoMatch,
  kInsufficientSupport,
  kUnobservableDepth,
  kDiverged,
  kBehindCamera,
  kOutsideImage,
  kInconsistent,
};

const char* to_string(Failure failure);

template <class T>
class Result {
 public:
  Result(T value) : data_(std::move(value)) {}  // NOLINT
  Result(Failure failure) : data_(failure) {}   // NOLINT

  bool ok() const { return std::holds_alternative<T>(data_); }
  explicit operator bool() const { return ok(); }

  const T& value() const& {
    if (!ok()) throw std::logic_error(std::string("Result holds failure: ") + to_string(failure()));
    return std::get<T>(data_);
  }
  T& value() & {
    if (!ok()) throw std::logic_error(std::string("Result holds failure: ") + to_string(failure()));
    return std::get<T>(data_);
  }
  const T& operator*() const& { return value(); }
  const T* operator->() const { return &value(); }

  Failure failure() const { return std::get<Failure>(data_); }

 private:
  std::variant<T, Failure> data_;
};

}  // namespace esvo
