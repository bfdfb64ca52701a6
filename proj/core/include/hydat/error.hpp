#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hydat {

enum class ErrorCode {
  validation,
  not_found,
  domain,
  data_quality,
  singular,
  insufficient_data,
  inconsistency,
  cycle,
  incompatible,
  io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Base of every exception thrown by the library. The code is a short,
/// machine-readable tag that the CLI and HTTP layers forward verbatim.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

#define HYDAT_DEFINE_ERROR(Name, Code)                                    \
  class Name : public Error {                                             \
   public:                                                                \
    explicit Name(const std::string& message) : Error(Code, message) {}   \
  };

HYDAT_DEFINE_ERROR(ValidationError, ErrorCode::validation)
HYDAT_DEFINE_ERROR(NotFoundError, ErrorCode::not_found)
HYDAT_DEFINE_ERROR(DomainError, ErrorCode::domain)
HYDAT_DEFINE_ERROR(DataQualityError, ErrorCode::data_quality)
HYDAT_DEFINE_ERROR(SingularityError, ErrorCode::singular)
HYDAT_DEFINE_ERROR(InsufficientDataError, ErrorCode::insufficient_data)
HYDAT_DEFINE_ERROR(InconsistencyError, ErrorCode::inconsistency)
HYDAT_DEFINE_ERROR(CycleError, ErrorCode::cycle)
HYDAT_DEFINE_ERROR(IncompatibleError, ErrorCode::incompatible)
HYDAT_DEFINE_ERROR(IoError, ErrorCode::io)

#undef HYDAT_DEFINE_ERROR

}  // namespace hydat
