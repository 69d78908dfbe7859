#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tetrad/grid.hpp"

namespace tetrad {

// What an accepted authentication unlocks. Shown to the user before entry.
enum class Consequence { access, payment };

std::string_view to_string(Consequence c);
Consequence parse_consequence(std::string_view text);

struct Registration {
  std::string account_id;
  std::vector<ImageId> image_ids;  // 45, sorted
  Secret secret;
  std::int64_t created_at = 0;
};

// Throws CardinalityError, DuplicateError or SecretError.
Registration register_account(std::string account_id, std::span<const ImageId> image_ids,
                              std::span<const ImageId> secret, std::int64_t created_at);

inline constexpr int lockout_threshold = 3;

struct LockoutState {
  int consecutive_failures = 0;
  bool locked = false;

  friend bool operator==(const LockoutState&, const LockoutState&) = default;
};

enum class SessionStatus { open, accepted, rejected, expired };

std::string_view to_string(SessionStatus s);
SessionStatus parse_session_status(std::string_view text);

struct AuthSession {
  std::string session_id;
  std::string account_id;
  std::uint64_t seed = 0;            // as requested
  std::uint64_t effective_seed = 0;  // after skipping pre-aligned shuffles
  Grid initial_grid;
  std::vector<Move> transcript;
  SessionStatus status = SessionStatus::open;
  Consequence consequence = Consequence::access;
  std::int64_t created_at = 0;
};

struct SeededGrid {
  Grid grid;
  std::uint64_t effective_seed;
};

// shuffle_grid(reg.image_ids, seed), re-deriving seed+1, seed+2, ... while the
// result happens to align the secret.
SeededGrid initial_grid_for(const Registration& reg, std::uint64_t seed);

// Throws LockedError when lockout.locked.
AuthSession start_session(const Registration& reg, const LockoutState& lockout, std::uint64_t seed,
                          Consequence consequence, std::string session_id, std::int64_t now);

// Throws SessionStateError unless open, ValidationError on a bad move.
void record_move(AuthSession& session, const Move& m);

// Marks an open session expired once now - created_at exceeds ttl_secs.
// Returns true when the status changed.
bool expire_if_stale(AuthSession& session, std::int64_t now, std::int64_t ttl_secs);

Grid current_grid(const AuthSession& session);

// The whole accept/reject rule: replay the transcript, test alignment.
bool replay_decision(const Grid& initial, std::span<const Move> transcript, const Secret& secret);

// Closes the session and updates the lockout counter. Throws
// SessionStateError unless open.
SessionStatus submit(AuthSession& session, const Registration& reg, LockoutState& lockout);

}  // namespace tetrad
