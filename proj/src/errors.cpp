#include "tetrad/errors.hpp"

namespace tetrad {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::validation: return "VALIDATION";
    case ErrorCode::cardinality: return "CARDINALITY";
    case ErrorCode::duplicate: return "DUPLICATE";
    case ErrorCode::secret_invalid: return "SECRET_INVALID";
    case ErrorCode::unknown_image: return "UNKNOWN_IMAGE";
    case ErrorCode::session_state: return "SESSION_STATE";
    case ErrorCode::locked: return "LOCKED";
    case ErrorCode::integrity: return "INTEGRITY";
    case ErrorCode::not_found: return "NOT_FOUND";
    case ErrorCode::forbidden: return "FORBIDDEN";
    case ErrorCode::conflict: return "CONFLICT";
    case ErrorCode::io: return "IO";
    case ErrorCode::format: return "FORMAT";
    case ErrorCode::no_face: return "NO_FACE";
  }
  return "UNKNOWN";
}

}  // namespace tetrad
