#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "tetrad/auth.hpp"

namespace tetrad {

struct AccountRecord {
  std::string account_id;
  std::int64_t created_at = 0;
  std::optional<Registration> registration;
  LockoutState lockout;
  std::string face_index_path;  // empty until a bootstrap finishes
  std::vector<AuthSession> sessions;

  AuthSession* find_session(const std::string& session_id);
  // Drops the oldest closed sessions beyond `keep_closed`. Open ones stay.
  void prune_sessions(std::size_t keep_closed);
};

// Closed sessions kept per account for audit replay.
inline constexpr std::size_t session_history_limit = 32;

nlohmann::json to_json(const Move& m);
Move move_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Grid& g);
nlohmann::json to_json(const AuthSession& s);
nlohmann::json to_json(const AccountRecord& r);
// Throws FormatError on schema violations.
AccountRecord account_from_json(const nlohmann::json& j);

// Letters, digits, '_' and '-', 1 to 64 characters.
bool valid_account_id(const std::string& id);

// One JSON file per account under <data_dir>/accounts, replaced atomically.
class AccountStore {
public:
  explicit AccountStore(std::filesystem::path data_dir);

  const std::filesystem::path& data_dir() const { return data_dir_; }
  std::filesystem::path account_dir(const std::string& account_id) const;
  std::filesystem::path record_path(const std::string& account_id) const;

  // Writes <id>.json.tmp, flushes it to disk, then renames over <id>.json.
  // Throws IntegrityError on any IO failure; the previous file is untouched.
  void persist(const AccountRecord& record);

  // nullopt when the account does not exist. Throws IntegrityError when the
  // file exists but cannot be parsed.
  std::optional<AccountRecord> load(const std::string& account_id) const;

  bool exists(const std::string& account_id) const;

  // Exclusive lock serialising all mutation of one account.
  std::mutex& account_mutex(const std::string& account_id);

  // Runs between writing the temp file and the rename. Test hook for
  // simulating a crash at that point.
  std::function<void(const std::filesystem::path& temp)> before_rename;

private:
  std::filesystem::path data_dir_;
  std::mutex locks_mu_;
  std::unordered_map<std::string, std::unique_ptr<std::mutex>> locks_;
};

}  // namespace tetrad
