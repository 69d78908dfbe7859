#include "tetrad/auth.hpp"

#include <algorithm>
#include <unordered_set>

#include "tetrad/errors.hpp"

namespace tetrad {

std::string_view to_string(Consequence c) {
  return c == Consequence::payment ? "payment" : "access";
}

Consequence parse_consequence(std::string_view text) {
  if (text == "access") return Consequence::access;
  if (text == "payment") return Consequence::payment;
  throw ValidationError("consequence must be 'access' or 'payment'");
}

std::string_view to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::open: return "open";
    case SessionStatus::accepted: return "accepted";
    case SessionStatus::rejected: return "rejected";
    case SessionStatus::expired: return "expired";
  }
  return "open";
}

SessionStatus parse_session_status(std::string_view text) {
  for (auto s : {SessionStatus::open, SessionStatus::accepted, SessionStatus::rejected,
                 SessionStatus::expired}) {
    if (to_string(s) == text) return s;
  }
  throw ValidationError("unknown session status '" + std::string(text) + "'");
}

Registration register_account(std::string account_id, std::span<const ImageId> image_ids,
                              std::span<const ImageId> secret, std::int64_t created_at) {
  if (account_id.empty()) throw ValidationError("account id must be non-empty");
  if (image_ids.size() != static_cast<std::size_t>(geometry::cells)) {
    throw CardinalityError("registration needs " + std::to_string(geometry::cells) +
                           " images, got " + std::to_string(image_ids.size()));
  }
  std::vector<ImageId> sorted(image_ids.begin(), image_ids.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i].empty()) throw ValidationError("image id must be non-empty");
    if (i > 0 && sorted[i] == sorted[i - 1]) {
      throw DuplicateError("duplicate image id " + sorted[i].str());
    }
  }
  Secret s(secret);
  for (const ImageId& id : s.images()) {
    if (!std::binary_search(sorted.begin(), sorted.end(), id)) {
      throw SecretError("secret image " + id.str() + " is not one of the registered images");
    }
  }
  return Registration{std::move(account_id), std::move(sorted), s, created_at};
}

SeededGrid initial_grid_for(const Registration& reg, std::uint64_t seed) {
  for (std::uint64_t effective = seed;; ++effective) {
    Grid g = shuffle_grid(reg.image_ids, effective);
    if (!is_aligned(g, reg.secret)) return {std::move(g), effective};
  }
}

AuthSession start_session(const Registration& reg, const LockoutState& lockout, std::uint64_t seed,
                          Consequence consequence, std::string session_id, std::int64_t now) {
  if (lockout.locked) throw LockedError("account " + reg.account_id + " is locked");
  auto [grid, effective] = initial_grid_for(reg, seed);
  return AuthSession{std::move(session_id), reg.account_id, seed, effective, std::move(grid),
                     {},                    SessionStatus::open, consequence, now};
}

void record_move(AuthSession& session, const Move& m) {
  if (session.status != SessionStatus::open) {
    throw SessionStateError("session " + session.session_id + " is " +
                            std::string(to_string(session.status)));
  }
  m.validate();
  session.transcript.push_back(m);
}

bool expire_if_stale(AuthSession& session, std::int64_t now, std::int64_t ttl_secs) {
  if (session.status != SessionStatus::open || now - session.created_at <= ttl_secs) return false;
  session.status = SessionStatus::expired;
  return true;
}

Grid current_grid(const AuthSession& session) {
  return apply_moves(session.initial_grid, session.transcript);
}

bool replay_decision(const Grid& initial, std::span<const Move> transcript, const Secret& secret) {
  return is_aligned(apply_moves(initial, transcript), secret);
}

SessionStatus submit(AuthSession& session, const Registration& reg, LockoutState& lockout) {
  if (session.status != SessionStatus::open) {
    throw SessionStateError("session " + session.session_id + " is " +
                            std::string(to_string(session.status)));
  }
  if (replay_decision(session.initial_grid, session.transcript, reg.secret)) {
    session.status = SessionStatus::accepted;
    lockout = LockoutState{};
  } else {
    session.status = SessionStatus::rejected;
    lockout.consecutive_failures = std::min(lockout.consecutive_failures + 1, lockout_threshold);
    lockout.locked = lockout.consecutive_failures >= lockout_threshold;
  }
  return session.status;
}

}  // namespace tetrad
