#include "histosynth/error.hpp"

namespace histosynth {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidLabel: return "invalid label";
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kShape: return "shape error";
    case ErrorCode::kConfig: return "config error";
    case ErrorCode::kStainMatrix: return "stain matrix error";
    case ErrorCode::kDegenerateHistogram: return "degenerate histogram";
    case ErrorCode::kAlignment: return "alignment error";
    case ErrorCode::kPatchTooLarge: return "patch too large";
    case ErrorCode::kRange: return "range error";
    case ErrorCode::kUndefinedMetric: return "undefined metric";
    case ErrorCode::kUndefinedKappa: return "undefined kappa";
    case ErrorCode::kIo: return "io error";
    case ErrorCode::kCorruption: return "corrupt file";
    case ErrorCode::kVersion: return "version mismatch";
    case ErrorCode::kNonFiniteLoss: return "non-finite loss";
    case ErrorCode::kEmptySet: return "empty set";
  }
  return "error";
}

}  // namespace histosynth
