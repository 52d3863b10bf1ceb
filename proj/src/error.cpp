#include "esvo/error.hpp"

namespace esvo {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kBehindCamera: return "behind camera";
    case ErrorCode::kNonPositiveInverseDepth: return "non-positive inverse depth";
    case ErrorCode::kCayleySingularity: return "cayley singularity";
    case ErrorCode::kNoPoses: return "no poses";
    case ErrorCode::kPixelOutOfRange: return "pixel out of range";
    case ErrorCode::kNonMonotonicStream: return "non-monotonic stream";
    case ErrorCode::kInvalidDecay: return "invalid decay";
    case ErrorCode::kSampleOutOfBounds: return "sample out of bounds";
    case ErrorCode::kGradientOutOfBounds: return "gradient out of bounds";
    case ErrorCode::kDegeneratePatch: return "degenerate patch";
    case ErrorCode::kZeroSpread: return "zero spread";
    case ErrorCode::kUndefinedVariance: return "undefined variance";
    case ErrorCode::kUnobservableDepth: return "unobservable depth";
    case ErrorCode::kInsufficientSupport: return "insufficient support";
    case ErrorCode::kDiverged: return "diverged";
    case ErrorCode::kEmptyMap: return "empty map";
    case ErrorCode::kCannotBootstrap: return "cannot bootstrap";
    case ErrorCode::kFrameRateTooLow: return "frame rate too low";
    case ErrorCode::kCameraInsidePlane: return "camera inside plane";
    case ErrorCode::kWarpInvalid: return "warp invalid";
    case ErrorCode::kNoOverlap: return "no overlap";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kIo: return "i/o error";
  }
  return "unknown error";
}

const char* to_string(Failure failure) {
  switch (failure) {
    case Failure::kPatchOutOfBounds: return "patch out of bounds";
    case Failure::kNoMatch: return "no match";
    case Failure::kInsufficientSupport: return "insufficient support";
    case Failure::kUnobservableDepth: return "unobservable depth";
    case Failure::kDiverged: return "diverged";
    case Failure::kBehindCamera: return "behind camera";
    case Failure::kOutsideImage: return "outside image";
    case Failure::kInconsistent: return "inconsistent with the residual model";
  }
  return "unknown failure";
}

}  // namespace esvo
