#include "ace/errors.hpp"

namespace ace {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedLabel: return "MalformedLabel";
    case ErrorCode::kNodeNotFound: return "NodeNotFound";
    case ErrorCode::kEmptyNegativePool: return "EmptyNegativePool";
    case ErrorCode::kTemplateNotFound: return "TemplateNotFound";
    case ErrorCode::kServiceUnavailable: return "ServiceUnavailable";
    case ErrorCode::kMalformedResponse: return "MalformedResponse";
    case ErrorCode::kShapeError: return "ShapeError";
    case ErrorCode::kNormalizationError: return "NormalizationError";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kNumericsError: return "NumericsError";
    case ErrorCode::kChecksumError: return "ChecksumError";
    case ErrorCode::kVocabMismatch: return "VocabMismatch";
    case ErrorCode::kEmptyEvalSet: return "EmptyEvalSet";
    case ErrorCode::kLabelTableMismatch: return "LabelTableMismatch";
    case ErrorCode::kIngestError: return "IngestError";
    case ErrorCode::kSchemaError: return "SchemaError";
  }
  return "Unknown";
}

int exit_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfigError:
    case ErrorCode::kTemplateNotFound:
      return 2;
    case ErrorCode::kShapeError:
    case ErrorCode::kNormalizationError:
    case ErrorCode::kNumericsError:
      return 4;
    case ErrorCode::kServiceUnavailable:
    case ErrorCode::kMalformedResponse:
      return 5;
    default:
      return 3;
  }
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace ace
