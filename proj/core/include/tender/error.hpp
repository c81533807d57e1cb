#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tender {

enum class ErrorCode {
  OutOfBounds,
  ShapeMismatch,
  UnsupportedInputSize,
  NonFiniteLoss,
  EmptyDataset,
  EmptyTotal,
  ModelNotTrained,
  CorruptFile,
  VersionMismatch,
  MalformedRow,
  EmptyKeywordSet,
  FileUnreadable,
  EngineNotFound,
  EngineFailed,
  HttpError,
  Timeout,
  TooManyRedirects,
  SizeMismatch,
  IoError,
  RasterizerNotFound,
  RasterizerFailed,
  NoPagesProduced,
  SpecInfeasible,
  MissingRun,
  PortInUse,
  ConfigError,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so that
// callers (and the CLI exit-code mapping) can branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tender
