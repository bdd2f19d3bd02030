#pragma once

#include <stdexcept>
#include <string>

namespace ace {

enum class ErrorCode {
  kMalformedLabel,
  kNodeNotFound,
  kEmptyNegativePool,
  kTemplateNotFound,
  kServiceUnavailable,
  kMalformedResponse,
  kShapeError,
  kNormalizationError,
  kConfigError,
  kNumericsError,
  kChecksumError,
  kVocabMismatch,
  kEmptyEvalSet,
  kLabelTableMismatch,
  kIngestError,
  kSchemaError,
};

const char* to_string(ErrorCode code);

// Process exit status for a failure of this class:
// 2 usage/config, 3 ingest/schema, 4 numerics, 5 external service.
int exit_status(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ace
