#include "tetrad/store.hpp"

#include <cstdio>
#include <fstream>
#include <unistd.h>

#include "tetrad/errors.hpp"

namespace tetrad {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<ImageId> ids_from_json(const json& j) {
  if (!j.is_array()) throw FormatError("expected an array of image ids");
  std::vector<ImageId> ids;
  for (const json& e : j) {
    if (!e.is_string()) throw FormatError("image id must be a string");
    ids.emplace_back(e.get<std::string>());
  }
  return ids;
}

json ids_to_json(std::span<const ImageId> ids) {
  json arr = json::array();
  for (const ImageId& id : ids) arr.push_back(id.str());
  return arr;
}

AuthSession session_from_json(const json& j, const std::string& account_id) {
  std::vector<Move> transcript;
  for (const json& m : j.at("transcript")) transcript.push_back(move_from_json(m));
  return AuthSession{j.at("session_id").get<std::string>(),
                     account_id,
                     j.at("seed").get<std::uint64_t>(),
                     j.at("effective_seed").get<std::uint64_t>(),
                     Grid(ids_from_json(j.at("initial_grid"))),
                     std::move(transcript),
                     parse_session_status(j.at("status").get<std::string>()),
                     parse_consequence(j.at("consequence").get<std::string>()),
                     j.at("created_at").get<std::int64_t>()};
}

}  // namespace

AuthSession* AccountRecord::find_session(const std::string& session_id) {
  for (AuthSession& s : sessions) {
    if (s.session_id == session_id) return &s;
  }
  return nullptr;
}

void AccountRecord::prune_sessions(std::size_t keep_closed) {
  std::size_t closed = 0;
  for (const AuthSession& s : sessions) closed += s.status != SessionStatus::open;
  if (closed <= keep_closed) return;
  std::size_t drop = closed - keep_closed;
  std::erase_if(sessions, [&](const AuthSession& s) {
    if (drop == 0 || s.status == SessionStatus::open) return false;
    --drop;
    return true;
  });
}

json to_json(const Move& m) {
  return json{{"axis", m.axis == Axis::row ? "row" : "col"}, {"index", m.index}, {"delta", m.delta}};
}

Move move_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("move must be an object");
  const auto axis = j.find("axis");
  const auto index = j.find("index");
  const auto delta = j.find("delta");
  if (axis == j.end() || !axis->is_string()) throw ValidationError("move.axis must be 'row' or 'col'");
  if (index == j.end() || !index->is_number_integer()) throw ValidationError("move.index must be an integer");
  if (delta == j.end() || !delta->is_number_integer()) throw ValidationError("move.delta must be an integer");
  const std::string a = axis->get<std::string>();
  if (a != "row" && a != "col") throw ValidationError("move.axis must be 'row' or 'col'");
  const auto i = index->get<long long>();
  const auto d = delta->get<long long>();
  if (i < INT32_MIN || i > INT32_MAX || d < INT32_MIN || d > INT32_MAX) {
    throw ValidationError("move field out of range");
  }
  Move m{a == "row" ? Axis::row : Axis::col, static_cast<int>(i), static_cast<int>(d)};
  m.validate();
  return m;
}

json to_json(const Grid& g) { return ids_to_json(g.cells()); }

json to_json(const AuthSession& s) {
  json transcript = json::array();
  for (const Move& m : s.transcript) transcript.push_back(to_json(m));
  return json{{"session_id", s.session_id},
              {"seed", s.seed},
              {"effective_seed", s.effective_seed},
              {"initial_grid", to_json(s.initial_grid)},
              {"transcript", std::move(transcript)},
              {"status", to_string(s.status)},
              {"consequence", to_string(s.consequence)},
              {"created_at", s.created_at}};
}

json to_json(const AccountRecord& r) {
  json sessions = json::array();
  for (const AuthSession& s : r.sessions) sessions.push_back(to_json(s));
  json registration = nullptr;
  if (r.registration) {
    registration = json{{"image_ids", ids_to_json(r.registration->image_ids)},
                        {"secret", ids_to_json(r.registration->secret.images())},
                        {"created_at", r.registration->created_at}};
  }
  return json{{"account_id", r.account_id},
              {"created_at", r.created_at},
              {"registration", std::move(registration)},
              {"lockout",
               {{"consecutive_failures", r.lockout.consecutive_failures}, {"locked", r.lockout.locked}}},
              {"face_index_path", r.face_index_path},
              {"sessions", std::move(sessions)}};
}

AccountRecord account_from_json(const json& j) {
  try {
    AccountRecord r;
    r.account_id = j.at("account_id").get<std::string>();
    r.created_at = j.at("created_at").get<std::int64_t>();
    const json& reg = j.at("registration");
    if (!reg.is_null()) {
      r.registration = register_account(r.account_id, ids_from_json(reg.at("image_ids")),
                                        ids_from_json(reg.at("secret")),
                                        reg.at("created_at").get<std::int64_t>());
    }
    r.lockout.consecutive_failures = j.at("lockout").at("consecutive_failures").get<int>();
    r.lockout.locked = j.at("lockout").at("locked").get<bool>();
    r.face_index_path = j.at("face_index_path").get<std::string>();
    for (const json& s : j.at("sessions")) r.sessions.push_back(session_from_json(s, r.account_id));
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("account record: ") + e.what());
  } catch (const Error& e) {
    throw FormatError(std::string("account record: ") + e.what());
  }
}

bool valid_account_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (unsigned char c : id) {
    if (!std::isalnum(c) && c != '_' && c != '-') return false;
  }
  return true;
}

AccountStore::AccountStore(fs::path data_dir) : data_dir_(std::move(data_dir)) {
  std::error_code ec;
  fs::create_directories(data_dir_ / "accounts", ec);
  if (ec) throw IoError("cannot create data directory " + (data_dir_ / "accounts").string());
}

fs::path AccountStore::account_dir(const std::string& account_id) const {
  if (!valid_account_id(account_id)) throw ValidationError("invalid account id '" + account_id + "'");
  return data_dir_ / "accounts" / account_id;
}

fs::path AccountStore::record_path(const std::string& account_id) const {
  if (!valid_account_id(account_id)) throw ValidationError("invalid account id '" + account_id + "'");
  return data_dir_ / "accounts" / (account_id + ".json");
}

void AccountStore::persist(const AccountRecord& record) {
  const fs::path target = record_path(record.account_id);
  const fs::path temp = target.string() + ".tmp";
  const std::string text = to_json(record).dump(2) + "\n";

  std::FILE* f = std::fopen(temp.c_str(), "wb");
  if (!f) throw IntegrityError("cannot open " + temp.string() + " for writing");
  const bool written = std::fwrite(text.data(), 1, text.size(), f) == text.size() &&
                       std::fflush(f) == 0 && ::fsync(::fileno(f)) == 0;
  const bool closed = std::fclose(f) == 0;
  if (!written || !closed) {
    std::error_code ec;
    fs::remove(temp, ec);
    throw IntegrityError("failed writing " + temp.string());
  }
  if (before_rename) before_rename(temp);
  std::error_code ec;
  fs::rename(temp, target, ec);
  if (ec) {
    fs::remove(temp, ec);
    throw IntegrityError("failed replacing " + target.string());
  }
}

std::optional<AccountRecord> AccountStore::load(const std::string& account_id) const {
  const fs::path path = record_path(account_id);
  std::ifstream in(path);
  if (!in) {
    if (!fs::exists(path)) return std::nullopt;
    throw IntegrityError("cannot read " + path.string());
  }
  try {
    return account_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw IntegrityError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw IntegrityError(path.string() + ": " + e.what());
  }
}

bool AccountStore::exists(const std::string& account_id) const {
  return fs::exists(record_path(account_id));
}

std::mutex& AccountStore::account_mutex(const std::string& account_id) {
  std::lock_guard lock(locks_mu_);
  auto& slot = locks_[account_id];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

}  // namespace tetrad
