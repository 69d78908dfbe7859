#include "tetrad/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <unistd.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "tetrad/bootstrap.hpp"
#include "tetrad/http.hpp"
#include "tetrad/observer.hpp"
#include "tetrad/random.hpp"
#include "tetrad/service.hpp"

namespace tetrad {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Same rounding for the table and the JSON so the two always agree.
double rounded(double x, int dp) {
  const double scale = std::pow(10.0, dp);
  return std::round(x * scale) / scale;
}

std::string fixed(double x, int dp) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", dp, rounded(x, dp));
  return buf;
}

template <typename T>
std::string join(const std::vector<T>& v, const std::function<std::string(const T&)>& fmt) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i]);
  return s;
}

struct Row {
  std::string label;
  std::string value;
};

void print_table(std::ostream& out, const std::vector<Row>& rows) {
  std::size_t w = 0;
  for (const auto& r : rows) w = std::max(w, r.label.size());
  for (const auto& r : rows) out << r.label << std::string(w - r.label.size() + 2, ' ') << r.value << "\n";
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<ImageId> to_ids(const std::vector<std::string>& v) {
  std::vector<ImageId> ids;
  for (const auto& s : v) ids.emplace_back(s);
  return ids;
}

json ids_json(std::span<const ImageId> ids) {
  json a = json::array();
  for (const auto& id : ids) a.push_back(id.str());
  return a;
}

// Raises the service's error as the matching exception.
json expect(const ApiResponse& r, int status) {
  if (r.status == status) return r.json();
  std::string code = "INTEGRITY";
  std::string message = r.body;
  const json body = json::parse(r.body, nullptr, false);
  if (!body.is_discarded() && body.contains("error")) {
    code = body["error"].value("code", code);
    message = body["error"].value("message", message);
  }
  message = code + ": " + message;
  if (code == "IO" || code == "INTEGRITY") throw IntegrityError(message);
  throw ValidationError(message);
}

struct TempDirGuard {
  fs::path path;
  TempDirGuard() {
    const fs::path base = fs::temp_directory_path();
    for (std::uint64_t i = 0;; ++i) {
      path = base / ("tetrad-sim-" + std::to_string(::getpid()) + "-" + std::to_string(i));
      if (fs::create_directory(path)) return;
    }
  }
  ~TempDirGuard() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

struct Common {
  std::uint64_t seed = 42;
  std::string output = "table";
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "base seed")->capture_default_str();
  sub->add_option("--output", c.output, "table or json")
      ->check(CLI::IsMember({"table", "json"}))
      ->capture_default_str();
}

int cmd_attack(std::ostream& out, const Common& c, int trials, int sessions, int threads) {
  if (trials < 1 || sessions < 1) throw ValidationError("--trials and --sessions must be at least 1");
  const AttackSummary s = run_attack_trials(trials, sessions, c.seed, threads);
  const AttackReport kb = keyboard_baseline();
  const AttackReport& first = s.first_trial;
  const double single = std::log2(static_cast<double>(first.per_session_candidate_counts.front()));
  const double ratio = static_cast<double>(first.per_session_candidate_counts.front()) /
                       static_cast<double>(kb.baseline_keyboard_leak);

  std::vector<std::string> hist_keys;
  for (int k = 1; k <= sessions; ++k) {
    if (s.sessions_to_unique_histogram.count(std::to_string(k))) hist_keys.push_back(std::to_string(k));
  }
  if (s.sessions_to_unique_histogram.count("not reached")) hist_keys.push_back("not reached");

  json residual = json::array();
  for (double b : first.residual_bits) residual.push_back(rounded(b, 2));
  json means = json::array();
  for (double m : s.mean_intersection_sizes) means.push_back(rounded(m, 4));
  json j{{"trials", s.trials},
         {"sessions", s.sessions},
         {"seed", s.seed},
         {"prior_bits", rounded(prior_bits(), 2)},
         {"single_session_bits", rounded(single, 2)},
         {"per_session_candidate_counts", first.per_session_candidate_counts},
         {"intersection_sizes", first.intersection_sizes},
         {"residual_bits", residual},
         {"sessions_to_unique", first.sessions_to_unique ? json(*first.sessions_to_unique) : json(nullptr)},
         {"baseline_keyboard_leak", kb.baseline_keyboard_leak},
         {"baseline_keyboard_residual_bits", rounded(kb.residual_bits.front(), 2)},
         {"leak_ratio_vs_keyboard", rounded(ratio, 2)},
         {"mean_intersection_sizes", means},
         {"sessions_to_unique_histogram", s.sessions_to_unique_histogram},
         {"unique_within_two_rate", rounded(s.unique_within_two_rate, 4)},
         {"median_sessions_to_unique",
          s.median_sessions_to_unique ? json(*s.median_sessions_to_unique) : json(nullptr)},
         {"secret_always_survived", s.secret_always_survived}};
  if (c.output == "json") {
    out << j.dump(2) << "\n";
    return 0;
  }
  auto sz = [](const std::size_t& v) { return std::to_string(v); };
  std::vector<Row> rows{
      {"trials", std::to_string(s.trials)},
      {"sessions", std::to_string(s.sessions)},
      {"seed", std::to_string(s.seed)},
      {"prior bits", fixed(prior_bits(), 2)},
      {"candidates per session", join<std::size_t>(first.per_session_candidate_counts, sz)},
      {"single session bits", fixed(single, 2)},
      {"intersection sizes", join<std::size_t>(first.intersection_sizes, sz)},
      {"residual bits", join<double>(first.residual_bits, [](const double& b) { return fixed(b, 2); })},
      {"sessions to unique", first.sessions_to_unique ? std::to_string(*first.sessions_to_unique) : "not reached"},
      {"keyboard baseline leak", std::to_string(kb.baseline_keyboard_leak)},
      {"keyboard residual bits", fixed(kb.residual_bits.front(), 2)},
      {"leak ratio vs keyboard", fixed(ratio, 2)},
      {"mean intersection sizes",
       join<double>(s.mean_intersection_sizes, [](const double& m) { return fixed(m, 4); })},
  };
  for (const auto& k : hist_keys) {
    rows.push_back({k == "not reached" ? "never unique" : "unique after " + k, std::to_string(s.sessions_to_unique_histogram.at(k))});
  }
  rows.push_back({"unique within two rate", fixed(s.unique_within_two_rate, 4)});
  rows.push_back({"median sessions to unique",
                  s.median_sessions_to_unique ? std::to_string(*s.median_sessions_to_unique) : "not reached"});
  rows.push_back({"secret always survived", s.secret_always_survived ? "true" : "false"});
  print_table(out, rows);
  return 0;
}

int cmd_effort(std::ostream& out, const Common& c, const std::string& flow_name, int trials, int baseline) {
  if (trials < 1) throw ValidationError("--trials must be at least 1");
  if (baseline < 1) throw ValidationError("--password-actions must be at least 1");
  const RegistrationFlow flow = parse_flow(flow_name);
  const EffortReport r = effort_report(flow, trials, c.seed, baseline);
  const auto stages = registration_stages(flow);
  const double ratio = r.auth_actions_mean / r.password_baseline_actions;
  json st = json::array();
  for (const auto& s : stages) st.push_back({{"name", s.name}, {"actions", s.actions}});
  json j{{"flow", to_string(flow)},
         {"trials", trials},
         {"seed", c.seed},
         {"registration_stages", st},
         {"registration_actions", r.registration_actions},
         {"auth_actions_mean", rounded(r.auth_actions_mean, 2)},
         {"password_baseline_actions", r.password_baseline_actions},
         {"auth_vs_password_ratio", rounded(ratio, 2)}};
  if (c.output == "json") {
    out << j.dump(2) << "\n";
    return 0;
  }
  std::vector<Row> rows{{"flow", std::string(to_string(flow))},
                        {"trials", std::to_string(trials)},
                        {"seed", std::to_string(c.seed)}};
  for (const auto& s : stages) rows.push_back({"  " + s.name, std::to_string(s.actions)});
  rows.push_back({"registration actions", std::to_string(r.registration_actions)});
  rows.push_back({"auth actions mean", fixed(r.auth_actions_mean, 2)});
  rows.push_back({"password baseline actions", std::to_string(r.password_baseline_actions)});
  rows.push_back({"auth vs password ratio", fixed(ratio, 2)});
  print_table(out, rows);
  return 0;
}

int cmd_bootstrap(std::ostream& out, const Common& c, const std::string& mode, const std::string& corpus,
                  const std::string& out_dir, int workers) {
  if (workers < 1) throw ValidationError("--workers must be at least 1");
  bootstrap::PipelineConfig pc;
  pc.mode = bootstrap::parse_mode(mode);
  pc.workers = workers;
  pc.corpus_dir = corpus;
  pc.output_dir = out_dir;
  auto job = bootstrap::run_pipeline(pc);
  auto faces = job->wait();
  const auto failures = job->results().failures();
  const fs::path dir = bootstrap::faces_dir(pc);
  bootstrap::write_index(dir, faces);

  auto sorted_failures = failures;
  std::sort(sorted_failures.begin(), sorted_failures.end(), [](const auto& a, const auto& b) {
    return std::tie(a.photo_id, a.friend_name) < std::tie(b.photo_id, b.friend_name);
  });
  json fj = json::array();
  for (const auto& f : sorted_failures) {
    fj.push_back({{"friend_name", f.friend_name}, {"photo_id", f.photo_id}, {"code", f.code}, {"reason", f.reason}});
  }
  const std::string index = (dir / "index.json").string();
  json j{{"mode", mode},
         {"total", job->total()},
         {"faces", faces.size()},
         {"failures", fj},
         {"index_path", index}};
  if (c.output == "json") {
    out << j.dump(2) << "\n";
    return 0;
  }
  std::vector<Row> rows{{"mode", mode},
                        {"total", std::to_string(job->total())},
                        {"faces", std::to_string(faces.size())},
                        {"failures", std::to_string(sorted_failures.size())},
                        {"index path", index}};
  for (const auto& f : sorted_failures) rows.push_back({"  " + f.photo_id, f.code + " " + f.reason});
  print_table(out, rows);
  return 0;
}

int cmd_register(std::ostream& out, const Common& c, const std::string& data_dir, const std::string& account,
                 const std::string& index, const std::string& images, const std::string& secret) {
  std::vector<ImageId> ids;
  if (!images.empty()) {
    ids = to_ids(split_list(images));
  } else if (index.empty()) {
    throw ValidationError("one of --images or --index is required");
  }
  if (!index.empty()) {
    const auto faces = bootstrap::read_index(index);
    if (images.empty()) {
      // First 45 faces of the index, which is sorted by image id.
      for (std::size_t i = 0; i < faces.size() && i < geometry::cells; ++i) ids.push_back(faces[i].image_id);
    }
    ids = bootstrap::select_for_registration(faces, ids);
  }
  ServiceConfig cfg;
  cfg.data_dir = data_dir;
  TetradService svc(cfg);
  if (!svc.store().exists(account)) svc.create_account({{"account_id", account}});
  const json r = svc.register_images(account, {{"image_ids", ids_json(ids)}, {"secret", ids_json(to_ids(split_list(secret)))}});
  const json j{{"account_id", account}, {"registered", true}, {"image_count", r["image_count"]}};
  if (c.output == "json") {
    out << j.dump(2) << "\n";
  } else {
    print_table(out, {{"account", account}, {"registered", "true"}, {"image count", r["image_count"].dump()}});
  }
  return 0;
}

int cmd_auth_sim(std::ostream& out, const Common& c, int trials, const std::string& url, bool wrong_order) {
  if (trials < 1) throw ValidationError("--trials must be at least 1");
  const Registration reg = synthetic_registration(c.seed);
  std::vector<ImageId> secret(reg.secret.images().begin(), reg.secret.images().end());
  if (wrong_order) std::reverse(secret.begin(), secret.end());
  const Secret played(secret);

  std::optional<TempDirGuard> temp;
  std::unique_ptr<TetradService> local;
  std::function<ApiResponse(const ApiRequest&)> send;
  if (url.empty()) {
    temp.emplace();
    ServiceConfig cfg;
    cfg.data_dir = temp->path;
    auto counter = std::make_shared<std::uint64_t>(0);
    cfg.random = [seed = c.seed, counter] { return derive_seed(seed, (*counter)++); };
    cfg.clock = [] { return std::int64_t{0}; };
    local = std::make_unique<TetradService>(cfg);
    send = [&](const ApiRequest& r) { return local->handle(r); };
  } else {
    send = [&](const ApiRequest& r) { return http_call(url, r); };
  }
  auto post = [&](const std::string& path, const json& body) {
    return send(ApiRequest{"POST", path, {}, body.dump()});
  };

  const std::string account = expect(post("/accounts", json::object()), 201)["account_id"];
  expect(post("/accounts/" + account + "/registration",
              {{"image_ids", ids_json(reg.image_ids)}, {"secret", ids_json(reg.secret.images())}}),
         201);
  int accepted = 0, rejected = 0, locked_out = 0;
  std::size_t total_moves = 0, max_moves = 0;
  for (int t = 0; t < trials; ++t) {
    const ApiResponse opened = post("/accounts/" + account + "/sessions", {{"consequence", "access"}});
    if (opened.status == 423) {
      ++locked_out;
      continue;
    }
    const json s = expect(opened, 201);
    const std::string sid = s["session_id"];
    std::vector<ImageId> cells;
    for (const auto& id : s["grid"]) cells.emplace_back(id.get<std::string>());
    const auto moves = solve_alignment(Grid(cells), played);
    for (const Move& m : moves) {
      expect(post("/sessions/" + sid + "/moves",
                  {{"axis", m.axis == Axis::row ? "row" : "col"}, {"index", m.index}, {"delta", m.delta}}),
             200);
    }
    total_moves += moves.size();
    max_moves = std::max(max_moves, moves.size());
    const json sub = expect(post("/sessions/" + sid + "/submit", json::object()), 200);
    (sub["status"] == "accepted" ? accepted : rejected)++;
  }
  const int played_sessions = accepted + rejected;
  const double mean = played_sessions ? static_cast<double>(total_moves) / played_sessions : 0.0;
  json j{{"trials", trials},
         {"seed", c.seed},
         {"target", url.empty() ? "local" : url},
         {"order", wrong_order ? "reversed" : "correct"},
         {"accepted", accepted},
         {"rejected", rejected},
         {"locked_out", locked_out},
         {"mean_moves", rounded(mean, 2)},
         {"max_moves", max_moves}};
  if (c.output == "json") {
    out << j.dump(2) << "\n";
    return 0;
  }
  print_table(out, {{"trials", std::to_string(trials)},
                    {"seed", std::to_string(c.seed)},
                    {"target", url.empty() ? "local" : url},
                    {"order", wrong_order ? "reversed" : "correct"},
                    {"accepted", std::to_string(accepted)},
                    {"rejected", std::to_string(rejected)},
                    {"locked out", std::to_string(locked_out)},
                    {"mean moves", fixed(mean, 2)},
                    {"max moves", std::to_string(max_moves)}});
  return 0;
}

int cmd_unlock(std::ostream& out, const Common& c, const std::string& data_dir, const std::string& account) {
  AccountStore store(data_dir);
  if (!valid_account_id(account)) throw ValidationError("invalid account id '" + account + "'");
  std::lock_guard lock(store.account_mutex(account));
  auto r = store.load(account);
  if (!r) throw NotFoundError("unknown account '" + account + "'");
  const LockoutState before = r->lockout;
  r->lockout = {};
  store.persist(*r);
  const json j{{"account_id", account}, {"was_locked", before.locked}, {"locked", false}};
  if (c.output == "json") {
    out << j.dump(2) << "\n";
  } else {
    print_table(out, {{"account", account}, {"was locked", before.locked ? "true" : "false"}, {"locked", "false"}});
  }
  return 0;
}

int cmd_serve(std::ostream& out, const std::string& listen, const std::string& data_dir, std::int64_t ttl) {
  ServiceConfig cfg = config_from_env();
  if (!listen.empty()) {
    const auto colon = listen.rfind(':');
    if (colon == std::string::npos) throw ValidationError("--listen must be host:port");
    cfg.listen_host = listen.substr(0, colon);
    try {
      cfg.listen_port = std::stoi(listen.substr(colon + 1));
    } catch (const std::exception&) {
      throw ValidationError("--listen port is not a number");
    }
  }
  if (!data_dir.empty()) cfg.data_dir = data_dir;
  if (ttl > 0) cfg.session_ttl_secs = ttl;
  TetradService svc(cfg);
  HttpServer server(svc);
  const int port = server.bind(cfg.listen_host, cfg.listen_port);
  out << "listening on " << cfg.listen_host << ":" << port << " data " << cfg.data_dir.string() << std::endl;
  server.serve();
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tetrad graphical authentication tools"};
  app.require_subcommand(1);
  Common common;

  int trials = 100, sessions = 7, threads = 1, workers = 1, password_actions = default_password_baseline_actions;
  std::string flow = "jill", mode = "jill", corpus, out_dir = "bootstrap-out", data_dir = "./data", account;
  std::string index, images, secret, url, listen;
  std::int64_t ttl = 0;
  bool wrong_order = false;

  auto* attack = app.add_subcommand("attack-sim", "simulate a recording shoulder-surfer");
  add_common(attack, common);
  attack->add_option("--trials", trials, "independent attacks")->capture_default_str();
  attack->add_option("--sessions", sessions, "sessions observed per attack")->capture_default_str();
  attack->add_option("--threads", threads, "worker threads")->capture_default_str();

  auto* effort = app.add_subcommand("effort-report", "count user actions per flow");
  add_common(effort, common);
  effort->add_option("--flow", flow, "jack or jill")->capture_default_str();
  effort->add_option("--trials", trials, "simulated authentications")->capture_default_str();
  effort->add_option("--password-actions", password_actions, "password baseline actions")->capture_default_str();

  auto* boot = app.add_subcommand("bootstrap", "crop friend faces into a face index");
  add_common(boot, common);
  boot->add_option("--mode", mode, "jack or jill")->capture_default_str();
  auto* corpus_opt = boot->add_option("--corpus", corpus, "photo directory (jack) or tag manifest (jill)");
  auto* manifest_opt = boot->add_option("--manifest", corpus, "tag manifest (jill)");
  corpus_opt->excludes(manifest_opt);
  boot->callback([&] {
    if (corpus.empty()) throw CLI::RequiredError("--corpus or --manifest");
  });
  boot->add_option("--out", out_dir, "output directory")->capture_default_str();
  boot->add_option("--workers", workers, "worker threads")->capture_default_str();

  auto* reg = app.add_subcommand("register", "register an account from a face index or id list");
  add_common(reg, common);
  reg->add_option("--data-dir", data_dir)->capture_default_str();
  reg->add_option("--account", account)->required();
  reg->add_option("--index", index, "face index.json from bootstrap");
  reg->add_option("--images", images, "comma separated image ids");
  reg->add_option("--secret", secret, "four comma separated image ids, in order")->required();

  auto* sim = app.add_subcommand("auth-sim", "run simulated authentications against the service");
  add_common(sim, common);
  sim->add_option("--trials", trials, "sessions to run")->capture_default_str();
  sim->add_option("--url", url, "service base URL; in-process when omitted");
  sim->add_flag("--wrong-order", wrong_order, "align the secret reversed");

  auto* unlock = app.add_subcommand("unlock", "clear an account's lockout");
  add_common(unlock, common);
  unlock->add_option("--data-dir", data_dir)->capture_default_str();
  unlock->add_option("--account", account)->required();

  auto* serve = app.add_subcommand("serve", "run the HTTP service");
  serve->add_option("--listen", listen, "host:port, overrides LISTEN_ADDR");
  serve->add_option("--data-dir", data_dir, "overrides DATA_DIR");
  serve->add_option("--ttl", ttl, "session TTL seconds, overrides SESSION_TTL_SECS");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*attack) return cmd_attack(out, common, trials, sessions, threads);
    if (*effort) return cmd_effort(out, common, flow, trials, password_actions);
    if (*boot) return cmd_bootstrap(out, common, mode, corpus, out_dir, workers);
    if (*reg) return cmd_register(out, common, data_dir, account, index, images, secret);
    if (*sim) return cmd_auth_sim(out, common, trials, url, wrong_order);
    if (*unlock) return cmd_unlock(out, common, data_dir, account);
    if (*serve) return cmd_serve(out, listen, serve->count("--data-dir") ? data_dir : "", ttl);
  } catch (const IoError& e) {
    err << "error: IO: " << e.what() << "\n";
    return 2;
  } catch (const IntegrityError& e) {
    err << "error: INTEGRITY: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace tetrad
