#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tetrad {

enum class ErrorCode {
  validation,
  cardinality,
  duplicate,
  secret_invalid,
  unknown_image,
  session_state,
  locked,
  integrity,
  not_found,
  forbidden,
  conflict,
  io,
  format,
  no_face,
};

// Machine-readable name, e.g. "SESSION_STATE".
std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

#define TETRAD_DEFINE_ERROR(Name, Code)                                   \
  class Name : public Error {                                             \
  public:                                                                 \
    explicit Name(const std::string& message) : Error(Code, message) {}   \
  }

TETRAD_DEFINE_ERROR(ValidationError, ErrorCode::validation);
TETRAD_DEFINE_ERROR(CardinalityError, ErrorCode::cardinality);
TETRAD_DEFINE_ERROR(DuplicateError, ErrorCode::duplicate);
TETRAD_DEFINE_ERROR(SecretError, ErrorCode::secret_invalid);
TETRAD_DEFINE_ERROR(UnknownImageError, ErrorCode::unknown_image);
TETRAD_DEFINE_ERROR(SessionStateError, ErrorCode::session_state);
TETRAD_DEFINE_ERROR(LockedError, ErrorCode::locked);
TETRAD_DEFINE_ERROR(IntegrityError, ErrorCode::integrity);
TETRAD_DEFINE_ERROR(NotFoundError, ErrorCode::not_found);
TETRAD_DEFINE_ERROR(ForbiddenError, ErrorCode::forbidden);
TETRAD_DEFINE_ERROR(ConflictError, ErrorCode::conflict);
TETRAD_DEFINE_ERROR(IoError, ErrorCode::io);
TETRAD_DEFINE_ERROR(FormatError, ErrorCode::format);
TETRAD_DEFINE_ERROR(NoFaceError, ErrorCode::no_face);

#undef TETRAD_DEFINE_ERROR

}  // namespace tetrad
