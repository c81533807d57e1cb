#include "tender/error.hpp"

namespace tender {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::UnsupportedInputSize: return "UnsupportedInputSize";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::EmptyTotal: return "EmptyTotal";
    case ErrorCode::ModelNotTrained: return "ModelNotTrained";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::EmptyKeywordSet: return "EmptyKeywordSet";
    case ErrorCode::FileUnreadable: return "FileUnreadable";
    case ErrorCode::EngineNotFound: return "EngineNotFound";
    case ErrorCode::EngineFailed: return "EngineFailed";
    case ErrorCode::HttpError: return "HttpError";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::TooManyRedirects: return "TooManyRedirects";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::RasterizerNotFound: return "RasterizerNotFound";
    case ErrorCode::RasterizerFailed: return "RasterizerFailed";
    case ErrorCode::NoPagesProduced: return "NoPagesProduced";
    case ErrorCode::SpecInfeasible: return "SpecInfeasible";
    case ErrorCode::MissingRun: return "MissingRun";
    case ErrorCode::PortInUse: return "PortInUse";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace tender
