#pragma once

#include <stdexcept>
#include <string>

namespace histosynth {

enum class ErrorCode {
  kInvalidLabel,
  kInvalidArgument,
  kShape,
  kConfig,
  kStainMatrix,
  kDegenerateHistogram,
  kAlignment,
  kPatchTooLarge,
  kRange,
  kUndefinedMetric,
  kUndefinedKappa,
  kIo,
  kCorruption,
  kVersion,
  kNonFiniteLoss,
  kEmptySet,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace histosynth
