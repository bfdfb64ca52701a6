#include "hydat/error.hpp"

namespace hydat {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::validation: return "validation";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::domain: return "domain";
    case ErrorCode::data_quality: return "data_quality";
    case ErrorCode::singular: return "singular";
    case ErrorCode::insufficient_data: return "insufficient_data";
    case ErrorCode::inconsistency: return "inconsistency";
    case ErrorCode::cycle: return "cycle";
    case ErrorCode::incompatible: return "incompatible";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

}  // namespace hydat
