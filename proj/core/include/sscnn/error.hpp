#pragma once

#include <stdexcept>
#include <string>

namespace sscnn {

/// Broad failure classes. The CLI maps these onto process exit codes.
enum class ErrorKind {
  kInvalidShape,
  kInvalidArgument,
  kInvalidConfig,
  kGradientNan,
  kContractViolation,
  kNumericDivergence,
  kData,
  kEmptyEvaluation,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define SSCNN_DEFINE_ERROR(Name, Kind)                                   \
  class Name : public Error {                                            \
   public:                                                               \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

SSCNN_DEFINE_ERROR(InvalidShapeError, kInvalidShape)
SSCNN_DEFINE_ERROR(InvalidArgumentError, kInvalidArgument)
SSCNN_DEFINE_ERROR(InvalidConfigError, kInvalidConfig)
SSCNN_DEFINE_ERROR(GradientNanError, kGradientNan)
SSCNN_DEFINE_ERROR(ContractViolationError, kContractViolation)
SSCNN_DEFINE_ERROR(NumericDivergenceError, kNumericDivergence)
SSCNN_DEFINE_ERROR(DataError, kData)
SSCNN_DEFINE_ERROR(EmptyEvaluationError, kEmptyEvaluation)

#undef SSCNN_DEFINE_ERROR

}  // namespace sscnn
