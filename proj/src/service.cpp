#include "tetrad/service.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>

namespace tetrad {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string hex(std::uint64_t v, int digits) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf + 16 - digits);
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    std::size_t j = i;
    while (j < path.size() && path[j] != '/') ++j;
    if (j > i) parts.push_back(path.substr(i, j - i));
    i = j;
  }
  return parts;
}

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw ValidationError("request body is not valid JSON");
  if (!j.is_object()) throw ValidationError("request body must be a JSON object");
  return j;
}

std::vector<ImageId> id_list(const json& body, const char* field) {
  const auto it = body.find(field);
  if (it == body.end() || !it->is_array()) {
    throw ValidationError(std::string(field) + " must be an array of image ids");
  }
  std::vector<ImageId> ids;
  for (const json& e : *it) {
    if (!e.is_string() || e.get<std::string>().empty()) {
      throw ValidationError(std::string(field) + " entries must be non-empty strings");
    }
    ids.emplace_back(e.get<std::string>());
  }
  return ids;
}

std::string string_field(const json& body, const char* field) {
  const auto it = body.find(field);
  if (it == body.end() || !it->is_string()) throw ValidationError(std::string(field) + " must be a string");
  return it->get<std::string>();
}

// "<account>.<hex>" -> account
std::string account_of(const std::string& session_id) {
  const auto dot = session_id.rfind('.');
  if (dot == std::string::npos || dot == 0) throw NotFoundError("unknown session '" + session_id + "'");
  std::string account = session_id.substr(0, dot);
  if (!valid_account_id(account)) throw NotFoundError("unknown session '" + session_id + "'");
  return account;
}

json face_json(const std::string& account_id, const bootstrap::FaceImage& f) {
  return json{{"image_id", f.image_id.str()},
              {"friend_name", f.friend_name},
              {"photo_id", f.source.photo_id},
              {"box", {{"x", f.box.x}, {"y", f.box.y}, {"w", f.box.w}, {"h", f.box.h}}},
              {"crop_url", "/accounts/" + account_id + "/faces/" + f.image_id.str()}};
}

json skipped_json(const bootstrap::Skipped& s) {
  return json{{"friend_name", s.friend_name}, {"photo_id", s.photo_id}, {"code", s.code}, {"reason", s.reason}};
}

json grid_response(const AuthSession& s) {
  return json{{"session_id", s.session_id},
              {"rows", geometry::rows},
              {"cols", geometry::cols},
              {"grid", to_json(current_grid(s))},
              {"transcript_len", s.transcript.size()},
              {"consequence", to_string(s.consequence)},
              {"status", to_string(s.status)}};
}

std::int64_t env_int(const char* name, std::int64_t fallback) {
  const char* v = std::getenv(name);
  if (!v || !*v) return fallback;
  char* end = nullptr;
  const long long n = std::strtoll(v, &end, 10);
  if (*end != '\0' || n <= 0) throw ValidationError(std::string(name) + " must be a positive integer");
  return n;
}

}  // namespace

ServiceConfig config_from_env() {
  ServiceConfig c;
  if (const char* addr = std::getenv("LISTEN_ADDR"); addr && *addr) {
    const std::string a = addr;
    const auto colon = a.rfind(':');
    if (colon == std::string::npos || colon == 0) throw ValidationError("LISTEN_ADDR must be host:port");
    c.listen_host = a.substr(0, colon);
    char* end = nullptr;
    const long port = std::strtol(a.c_str() + colon + 1, &end, 10);
    if (*end != '\0' || port < 0 || port > 65535) throw ValidationError("LISTEN_ADDR port out of range");
    c.listen_port = static_cast<int>(port);
  }
  if (const char* dir = std::getenv("DATA_DIR"); dir && *dir) c.data_dir = dir;
  c.session_ttl_secs = env_int("SESSION_TTL_SECS", c.session_ttl_secs);
  return c;
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::validation:
    case ErrorCode::format:
      return 400;
    case ErrorCode::cardinality:
    case ErrorCode::duplicate:
    case ErrorCode::secret_invalid:
    case ErrorCode::unknown_image:
    case ErrorCode::no_face:
      return 422;
    case ErrorCode::forbidden: return 403;
    case ErrorCode::not_found: return 404;
    case ErrorCode::session_state:
    case ErrorCode::conflict:
      return 409;
    case ErrorCode::locked: return 423;
    case ErrorCode::integrity:
    case ErrorCode::io:
      return 500;
  }
  return 500;
}

json error_body(ErrorCode code, const std::string& message) {
  return json{{"error", {{"code", to_string(code)}, {"message", message}}}};
}

std::vector<GatedResource> default_catalog() {
  return {{"inbox", "Message inbox", Consequence::access},
          {"transfer", "Funds transfer", Consequence::payment}};
}

TetradService::TetradService(ServiceConfig config, std::vector<GatedResource> catalog)
    : config_(std::move(config)), catalog_(std::move(catalog)), store_(config_.data_dir) {
  std::random_device rd;
  random_engine_.seed((static_cast<std::uint64_t>(rd()) << 32) ^ rd());
}

TetradService::~TetradService() {
  std::map<std::string, std::unique_ptr<Job>> jobs;
  {
    std::lock_guard lock(jobs_mu_);
    jobs.swap(jobs_);
  }
  // Finalizers join here, before the store goes away.
  jobs.clear();
}

std::int64_t TetradService::now() const {
  if (config_.clock) return config_.clock();
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::uint64_t TetradService::next_random() {
  if (config_.random) return config_.random();
  std::lock_guard lock(random_mu_);
  return random_engine_();
}

AccountRecord TetradService::load_account(const std::string& account_id) {
  if (!valid_account_id(account_id)) throw NotFoundError("unknown account '" + account_id + "'");
  auto record = store_.load(account_id);
  if (!record) throw NotFoundError("unknown account '" + account_id + "'");
  return std::move(*record);
}

json TetradService::create_account(const json& body) {
  std::string id;
  if (const auto it = body.find("account_id"); it != body.end()) {
    if (!it->is_string() || !valid_account_id(it->get<std::string>())) {
      throw ValidationError("account_id must be 1-64 letters, digits, '_' or '-'");
    }
    id = it->get<std::string>();
  } else {
    id = "a" + hex(next_random(), 12);
  }
  std::lock_guard lock(store_.account_mutex(id));
  if (store_.exists(id)) throw ConflictError("account '" + id + "' already exists");
  AccountRecord record;
  record.account_id = id;
  record.created_at = now();
  store_.persist(record);
  return json{{"account_id", id}, {"created_at", record.created_at}};
}

json TetradService::account_summary(const std::string& account_id) {
  std::lock_guard lock(store_.account_mutex(account_id));
  const AccountRecord r = load_account(account_id);
  return json{{"account_id", r.account_id},
              {"created_at", r.created_at},
              {"registered", r.registration.has_value()},
              {"has_face_index", !r.face_index_path.empty()},
              {"consecutive_failures", r.lockout.consecutive_failures},
              {"locked", r.lockout.locked}};
}

json TetradService::start_bootstrap(const std::string& account_id, const json& body) {
  {
    std::lock_guard lock(store_.account_mutex(account_id));
    const AccountRecord r = load_account(account_id);
    if (r.registration) throw ConflictError("account is already registered");
  }
  bootstrap::PipelineConfig pc;
  pc.mode = bootstrap::parse_mode(string_field(body, "mode"));
  // Either key is accepted; jill expects a manifest file, jack a photo directory.
  const char* source = body.contains("manifest") ? "manifest" : "corpus";
  pc.corpus_dir = string_field(body, source);
  pc.workers = config_.bootstrap_workers;
  if (const auto it = body.find("workers"); it != body.end()) {
    if (!it->is_number_integer() || it->get<int>() < 1 || it->get<int>() > 64) {
      throw ValidationError("workers must be an integer in 1..64");
    }
    pc.workers = it->get<int>();
  }
  pc.output_dir = store_.account_dir(account_id);

  auto job = std::make_unique<Job>();
  job->account_id = account_id;
  try {
    job->pipeline = bootstrap::run_pipeline(pc);
  } catch (const IoError& e) {
    throw ValidationError(std::string("cannot read ") + source + ": " + e.what());
  }

  std::lock_guard lock(jobs_mu_);
  const std::string job_id = "job" + std::to_string(++job_counter_);
  Job& ref = *job;
  jobs_.emplace(job_id, std::move(job));
  ref.finalizer = std::jthread([this, &ref] { finalize_job(ref); });
  return json{{"job_id", job_id}, {"status", "running"}, {"total", ref.pipeline->total()}};
}

void TetradService::finalize_job(Job& job) {
  std::string error;
  try {
    auto faces = job.pipeline->wait();
    const fs::path dir = store_.account_dir(job.account_id) / "faces";
    bootstrap::write_index(dir, std::move(faces));
    std::lock_guard lock(store_.account_mutex(job.account_id));
    AccountRecord r = load_account(job.account_id);
    r.face_index_path = fs::relative(dir / "index.json", store_.data_dir()).generic_string();
    store_.persist(r);
  } catch (const std::exception& e) {
    error = e.what();
  }
  std::lock_guard lock(jobs_mu_);
  job.done = true;
  job.error = std::move(error);
  jobs_cv_.notify_all();
}

void TetradService::wait_for_bootstraps() {
  std::unique_lock lock(jobs_mu_);
  jobs_cv_.wait(lock, [&] {
    for (const auto& [id, job] : jobs_) {
      if (!job->done) return false;
    }
    return true;
  });
}

json TetradService::bootstrap_status(const std::string& account_id, const std::string& job_id) {
  std::lock_guard lock(jobs_mu_);
  const auto it = jobs_.find(job_id);
  if (it == jobs_.end() || it->second->account_id != account_id) {
    throw NotFoundError("unknown bootstrap job '" + job_id + "'");
  }
  const Job& job = *it->second;
  json results = json::array();
  for (const auto& f : job.pipeline->results().snapshot()) results.push_back(face_json(account_id, f));
  json failures = json::array();
  for (const auto& s : job.pipeline->results().failures()) failures.push_back(skipped_json(s));
  const char* status = !job.done ? "running" : job.error.empty() ? "done" : "failed";
  json out{{"job_id", job_id},
           {"status", status},
           {"total", job.pipeline->total()},
           {"results_so_far", std::move(results)},
           {"failures", std::move(failures)}};
  if (!job.error.empty()) out["error"] = job.error;
  return out;
}

std::string TetradService::face_crop(const std::string& account_id, const std::string& image_id) {
  std::optional<fs::path> crop;
  {
    std::lock_guard lock(jobs_mu_);
    for (const auto& [id, job] : jobs_) {
      if (job->account_id != account_id) continue;
      for (const auto& f : job->pipeline->results().snapshot()) {
        if (f.image_id.str() == image_id) crop = f.crop_path;
      }
    }
  }
  if (!crop) {
    std::lock_guard lock(store_.account_mutex(account_id));
    const AccountRecord r = load_account(account_id);
    if (!r.face_index_path.empty()) {
      for (const auto& f : bootstrap::read_index(store_.data_dir() / r.face_index_path)) {
        if (f.image_id.str() == image_id) crop = f.crop_path;
      }
    }
  }
  if (!crop) throw NotFoundError("unknown image '" + image_id + "'");
  std::ifstream in(store_.account_dir(account_id) / "faces" / *crop, std::ios::binary);
  if (!in) throw NotFoundError("crop for '" + image_id + "' is missing");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json TetradService::register_images(const std::string& account_id, const json& body) {
  std::vector<ImageId> ids = id_list(body, "image_ids");
  const std::vector<ImageId> secret = id_list(body, "secret");
  {
    std::lock_guard lock(jobs_mu_);
    for (const auto& [id, job] : jobs_) {
      if (job->account_id == account_id && !job->done) throw ConflictError("bootstrap still running");
    }
  }
  std::lock_guard lock(store_.account_mutex(account_id));
  AccountRecord r = load_account(account_id);
  if (r.registration) throw ConflictError("account is already registered");
  if (!r.face_index_path.empty()) {
    const auto faces = bootstrap::read_index(store_.data_dir() / r.face_index_path);
    ids = bootstrap::select_for_registration(faces, ids);
  }
  r.registration = register_account(account_id, ids, secret, now());
  r.lockout = {};
  store_.persist(r);
  return json{{"account_id", account_id}, {"registered", true}, {"image_count", ids.size()}};
}

json TetradService::create_session(const std::string& account_id, const json& body) {
  const Consequence consequence = [&] {
    const auto it = body.find("consequence");
    if (it == body.end()) return Consequence::access;
    if (!it->is_string()) throw ValidationError("consequence must be 'access' or 'payment'");
    return parse_consequence(it->get<std::string>());
  }();
  std::lock_guard lock(store_.account_mutex(account_id));
  AccountRecord r = load_account(account_id);
  if (!r.registration) throw ConflictError("account has no registration");
  if (r.lockout.locked) throw LockedError("account is locked");
  // At most one open session per account.
  for (AuthSession& s : r.sessions) {
    if (s.status == SessionStatus::open) s.status = SessionStatus::expired;
  }
  const std::string session_id = account_id + "." + hex(next_random(), 16);
  r.sessions.push_back(
      start_session(*r.registration, r.lockout, next_random(), consequence, session_id, now()));
  r.prune_sessions(session_history_limit);
  store_.persist(r);
  return grid_response(r.sessions.back());
}

json TetradService::add_move(const std::string& session_id, const json& body) {
  const std::string account_id = account_of(session_id);
  const Move m = move_from_json(body);
  std::lock_guard lock(store_.account_mutex(account_id));
  AccountRecord r = load_account(account_id);
  AuthSession* s = r.find_session(session_id);
  if (!s) throw NotFoundError("unknown session '" + session_id + "'");
  if (expire_if_stale(*s, now(), config_.session_ttl_secs)) {
    store_.persist(r);
    throw SessionStateError("session expired");
  }
  record_move(*s, m);
  store_.persist(r);
  return grid_response(*s);
}

json TetradService::submit_session(const std::string& session_id) {
  const std::string account_id = account_of(session_id);
  std::lock_guard lock(store_.account_mutex(account_id));
  AccountRecord r = load_account(account_id);
  AuthSession* s = r.find_session(session_id);
  if (!s) throw NotFoundError("unknown session '" + session_id + "'");
  if (expire_if_stale(*s, now(), config_.session_ttl_secs)) {
    store_.persist(r);
    throw SessionStateError("session expired");
  }
  const SessionStatus status = submit(*s, *r.registration, r.lockout);
  store_.persist(r);
  return json{{"session_id", session_id},
              {"status", to_string(status)},
              {"consequence", to_string(s->consequence)},
              {"failures", r.lockout.consecutive_failures},
              {"locked", r.lockout.locked}};
}

json TetradService::get_resource(const std::string& resource_id, const std::string& session_id) {
  const auto res = std::find_if(catalog_.begin(), catalog_.end(),
                                [&](const GatedResource& g) { return g.resource_id == resource_id; });
  if (res == catalog_.end()) throw NotFoundError("unknown resource '" + resource_id + "'");
  if (session_id.empty()) throw ForbiddenError("a session is required");
  std::string account_id;
  try {
    account_id = account_of(session_id);
  } catch (const NotFoundError&) {
    throw ForbiddenError("session is not authorised");
  }
  std::lock_guard lock(store_.account_mutex(account_id));
  auto r = store_.load(account_id);
  AuthSession* s = r ? r->find_session(session_id) : nullptr;
  if (!s || s->status != SessionStatus::accepted) throw ForbiddenError("session is not authorised");
  if (s->consequence != res->required) {
    throw ForbiddenError("session was authorised for " + std::string(to_string(s->consequence)) +
                         ", resource requires " + std::string(to_string(res->required)));
  }
  return json{{"resource_id", res->resource_id},
              {"title", res->title},
              {"consequence", to_string(res->required)},
              {"content", res->title + " for " + account_id}};
}

json TetradService::list_resources() const {
  json out = json::array();
  for (const auto& g : catalog_) {
    out.push_back({{"resource_id", g.resource_id}, {"title", g.title}, {"consequence", to_string(g.required)}});
  }
  return out;
}

void TetradService::audit(const std::string& account_id) {
  std::lock_guard lock(store_.account_mutex(account_id));
  const AccountRecord r = load_account(account_id);
  for (const AuthSession& s : r.sessions) {
    if (!r.registration) throw IntegrityError("sessions without a registration");
    const SeededGrid sg = initial_grid_for(*r.registration, s.seed);
    if (sg.effective_seed != s.effective_seed || sg.grid != s.initial_grid) {
      throw IntegrityError("session " + s.session_id + ": initial grid does not match its seed");
    }
    if (s.status != SessionStatus::accepted && s.status != SessionStatus::rejected) continue;
    const bool accepted = replay_decision(s.initial_grid, s.transcript, r.registration->secret);
    if (accepted != (s.status == SessionStatus::accepted)) {
      throw IntegrityError("session " + s.session_id + ": stored decision disagrees with replay");
    }
  }
}

ApiResponse TetradService::handle(const ApiRequest& req) {
  ApiResponse out;
  try {
    const auto p = split_path(req.path);
    const auto n = p.size();
    const bool get = req.method == "GET";
    const bool post = req.method == "POST";
    json result;
    if (post && n == 1 && p[0] == "accounts") {
      result = create_account(parse_body(req.body));
      out.status = 201;
    } else if (get && n == 2 && p[0] == "accounts") {
      result = account_summary(p[1]);
    } else if (post && n == 3 && p[0] == "accounts" && p[2] == "bootstrap") {
      result = start_bootstrap(p[1], parse_body(req.body));
      out.status = 202;
    } else if (get && n == 4 && p[0] == "accounts" && p[2] == "bootstrap") {
      result = bootstrap_status(p[1], p[3]);
    } else if (get && n == 4 && p[0] == "accounts" && p[2] == "faces") {
      out.body = face_crop(p[1], p[3]);
      out.content_type = "image/x-portable-pixmap";
      return out;
    } else if (post && n == 3 && p[0] == "accounts" && p[2] == "registration") {
      result = register_images(p[1], parse_body(req.body));
      out.status = 201;
    } else if (post && n == 3 && p[0] == "accounts" && p[2] == "sessions") {
      result = create_session(p[1], parse_body(req.body));
      out.status = 201;
    } else if (post && n == 3 && p[0] == "sessions" && p[2] == "moves") {
      result = add_move(p[1], parse_body(req.body));
    } else if (post && n == 3 && p[0] == "sessions" && p[2] == "submit") {
      result = submit_session(p[1]);
    } else if (get && n == 1 && p[0] == "resources") {
      result = list_resources();
    } else if (get && n == 2 && p[0] == "resources") {
      const auto it = req.query.find("session");
      result = get_resource(p[1], it == req.query.end() ? std::string() : it->second);
    } else {
      throw NotFoundError("no route for " + req.method + " " + req.path);
    }
    out.body = result.dump();
  } catch (const Error& e) {
    // Storage failures are reported to clients as INTEGRITY.
    const ErrorCode code = e.code() == ErrorCode::io ? ErrorCode::integrity : e.code();
    out.status = http_status(code);
    out.content_type = "application/json";
    out.body = error_body(code, e.what()).dump();
  } catch (const std::exception& e) {
    out.status = 500;
    out.content_type = "application/json";
    out.body = error_body(ErrorCode::integrity, e.what()).dump();
  }
  return out;
}

}  // namespace tetrad
