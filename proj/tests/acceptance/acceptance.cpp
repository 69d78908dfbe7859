// One PASS/FAIL line per acceptance criterion. Exits non-zero when any
// criterion fails, so ctest fails with it.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <thread>

#include "../api_client.hpp"
#include "../corpus.hpp"
#include "../support.hpp"
#include "tetrad/bootstrap.hpp"
#include "tetrad/cli.hpp"
#include "tetrad/http.hpp"
#include "tetrad/observer.hpp"
#include "tetrad/random.hpp"
#include "tetrad/service.hpp"
#include "tetrad/store.hpp"

using namespace tetrad;
using namespace tetrad::testing;
using nlohmann::json;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

int failures = 0;

void criterion(const std::string& name, double limit_secs, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.ok = false;
    o.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (o.ok && limit_secs > 0 && secs >= limit_secs) {
    o.ok = false;
    o.detail = "runtime over " + std::to_string(limit_secs) + " s";
  }
  failures += !o.ok;
  std::printf("%s  %-32s %7.3f s  %s\n", o.ok ? "PASS" : "FAIL", name.c_str(), secs, o.detail.c_str());
  std::fflush(stdout);
}

std::string cli_out(std::vector<std::string> args, int* code = nullptr) {
  args.insert(args.begin(), "tetrad");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int rc = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code) *code = rc;
  return out.str();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome window_geometry() {
  Outcome o;
  const auto windows = enumerate_windows();
  std::map<WindowKind, int> by_kind;
  std::set<std::vector<std::pair<int, int>>> got;
  for (const Window& w : windows) {
    ++by_kind[w.kind];
    std::vector<std::pair<int, int>> cells;
    for (const Cell& c : w.cells()) cells.emplace_back(c.row, c.col);
    got.insert(cells);
  }
  std::set<std::vector<std::pair<int, int>>> expected;
  for (const auto& line : brute_force_lines()) {
    std::vector<std::pair<int, int>> cells;
    for (const Cell& c : line) cells.emplace_back(c.row, c.col);
    expected.insert(cells);
  }
  o.require(windows.size() == 72, "window count " + std::to_string(windows.size()));
  o.require(by_kind[WindowKind::h] == 30 && by_kind[WindowKind::v] == 18 && by_kind[WindowKind::dr] == 12 &&
                by_kind[WindowKind::dl] == 12,
            "per-kind counts differ from 30/18/12/12");
  o.require(got == expected, "windows differ from the brute-force line scan");
  o.detail = o.ok ? "72 windows: 30 H, 18 V, 12 DR, 12 DL; equal to line scan" : o.detail;
  return o;
}

Outcome alignment_oracle() {
  Outcome o;
  std::mt19937_64 rng(20241016);
  const auto lines = brute_force_lines();
  int aligned = 0, disagreements = 0;
  for (int i = 0; i < 10000; ++i) {
    Grid g = random_grid(rng);
    const Secret s = random_secret(g, rng);
    // Half the pairs get the secret planted on a random line so both outcomes
    // are exercised.
    if (i % 2 == 0) g = plant(g, s, lines[rng() % lines.size()]);
    const bool a = is_aligned(g, s);
    aligned += a;
    disagreements += a != oracle_aligned(g, s);
  }
  o.require(disagreements == 0, std::to_string(disagreements) + " disagreements");
  o.require(aligned >= 5000, "planted pairs not aligned");
  if (o.ok) o.detail = "10000 pairs, " + std::to_string(aligned) + " aligned, 0 disagreements";
  return o;
}

Outcome solver_totality() {
  Outcome o;
  std::mt19937_64 rng(7);
  std::size_t longest = 0;
  for (int i = 0; i < 1000 && o.ok; ++i) {
    const Grid g = random_grid(rng);
    const Secret s = random_secret(g, rng);
    const auto moves = solve_alignment(g, s);
    longest = std::max(longest, moves.size());
    o.require(moves.size() <= static_cast<std::size_t>(solver_move_budget),
              "instance " + std::to_string(i) + " used " + std::to_string(moves.size()) + " moves");
    o.require(oracle_aligned(apply_moves(g, moves), s), "instance " + std::to_string(i) + " replay not aligned");
  }
  if (o.ok) o.detail = "1000 instances replay-verified, longest " + std::to_string(longest) + " moves";
  return o;
}

Outcome observation_soundness() {
  Outcome o;
  int sessions = 0;
  for (int r = 0; r < 50 && o.ok; ++r) {
    const Registration reg = synthetic_registration(1000 + r);
    const Tuple4 truth = [&] {
      Tuple4 t;
      for (int k = 0; k < 4; ++k) t[k] = reg.secret[k];
      return t;
    }();
    std::vector<CandidateSet> sets;
    std::size_t previous = SIZE_MAX;
    for (const SimulatedSession& sim : simulate_sessions(reg, 10, 77 + r)) {
      ++sessions;
      o.require(replay_decision(sim.observation.initial_grid, sim.observation.transcript, reg.secret),
                "simulated session not accepted");
      const CandidateSet c = observe(sim.observation);
      const auto oracle = oracle_candidates(sim.observation.final_grid);
      o.require(c.size() == 72, "candidate count " + std::to_string(c.size()));
      o.require(CandidateSet(oracle.begin(), oracle.end()) == c, "candidates differ from oracle");
      o.require(c.contains(truth), "true secret missing from a session");
      sets.push_back(c);
      const CandidateSet inter = intersect_sessions(sets);
      o.require(inter.size() <= previous, "intersection size increased");
      o.require(inter.contains(truth), "true secret eliminated by intersection");
      previous = inter.size();
    }
  }
  if (o.ok) o.detail = std::to_string(sessions) + " sessions: 72 candidates each, secret always survives";
  return o;
}

Outcome leakage() {
  Outcome o;
  // Independent arithmetic: ordered 4-tuples of distinct images out of 45.
  const double prior = std::log2(45.0 * 44.0 * 43.0 * 42.0);
  const double single = std::log2(static_cast<double>(brute_force_lines().size()));
  o.require(fmt("%.2f", prior) == "21.77", "prior bits " + fmt("%.4f", prior));
  o.require(fmt("%.2f", single) == "6.17", "single session bits " + fmt("%.4f", single));
  o.require(std::abs(prior_bits() - prior) < 1e-12, "prior_bits() disagrees");
  const AttackReport kb = keyboard_baseline();
  o.require(kb.per_session_candidate_counts == std::vector<std::size_t>{1} && kb.residual_bits.front() == 0.0,
            "keyboard baseline not 1 candidate / 0 bits");

  int code = 0;
  const json j = json::parse(cli_out({"attack-sim", "--trials", "1", "--sessions", "1", "--seed", "7", "--output", "json"}, &code));
  o.require(code == 0, "attack-sim exit " + std::to_string(code));
  o.require(j["per_session_candidate_counts"] == json::array({72}), "attack-sim candidates != 72");
  o.require(fmt("%.2f", j["single_session_bits"].get<double>()) == fmt("%.2f", single), "attack-sim bits differ");
  o.require(fmt("%.2f", j["residual_bits"][0].get<double>()) == "6.17", "attack-sim residual differs");
  o.require(fmt("%.2f", j["prior_bits"].get<double>()) == fmt("%.2f", prior), "attack-sim prior differs");
  o.require(j["baseline_keyboard_leak"] == 1, "attack-sim keyboard baseline != 1");
  o.require(j["baseline_keyboard_residual_bits"].get<double>() == 0.0, "attack-sim keyboard bits != 0");
  o.require(j["leak_ratio_vs_keyboard"].get<double>() == 72.0, "ratio != 72");
  const std::string table = cli_out({"attack-sim", "--trials", "1", "--sessions", "1", "--seed", "7"});
  o.require(table.find("single session bits") != std::string::npos && table.find(" 6.17\n") != std::string::npos,
            "table lacks 6.17");
  if (o.ok) {
    o.detail = "6.17 of 21.77 bits, keyboard 1 candidate / 0.00 bits, attack-sim agrees";
  }
  return o;
}

Outcome multi_session() {
  Outcome o;
  const int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const AttackSummary s = run_attack_trials(500, 7, 42, threads);
  o.require(s.secret_always_survived, "secret eliminated in some trial");
  o.require(s.unique_within_two_rate >= 0.90, "unique within 2 sessions in " + fmt("%.3f", s.unique_within_two_rate));
  // Cross-check a slice of trials with the brute-force candidate oracle.
  for (int t = 0; t < 25 && o.ok; ++t) {
    const Registration reg = synthetic_registration(42 + t);
    std::set<Tuple4> inter;
    std::optional<int> unique_at;
    int i = 0;
    for (const SimulatedSession& sim : simulate_sessions(reg, 7, 42 + t)) {
      ++i;
      const auto c = oracle_candidates(sim.observation.final_grid);
      std::set<Tuple4> cs(c.begin(), c.end());
      if (i == 1) {
        inter = cs;
      } else {
        std::set<Tuple4> next;
        std::set_intersection(inter.begin(), inter.end(), cs.begin(), cs.end(), std::inserter(next, next.end()));
        inter = std::move(next);
      }
      if (!unique_at && inter.size() == 1) unique_at = i;
    }
    const AttackReport rep = simulate_attacker(reg, 7, 42 + t);
    o.require(rep.sessions_to_unique == unique_at, "trial " + std::to_string(t) + " disagrees with oracle");
  }
  if (o.ok) {
    o.detail = "500 trials: " + fmt("%.1f", 100.0 * s.unique_within_two_rate) + "% unique within 2, median " +
               (s.median_sessions_to_unique ? std::to_string(*s.median_sessions_to_unique) : "none");
  }
  return o;
}

Outcome pipeline_determinism() {
  Outcome o;
  TempDir dir;
  const Corpus corpus = make_corpus(dir.path() / "corpus", 100, 2024);
  std::vector<std::vector<char>> indexes;
  for (int workers : {1, 2, 8}) {
    bootstrap::PipelineConfig pc;
    pc.mode = bootstrap::Mode::jill;
    pc.workers = workers;
    pc.corpus_dir = corpus.manifest;
    pc.output_dir = dir.path() / ("w" + std::to_string(workers));
    // Jitter the schedule so completion order differs between runs.
    pc.before_task = [workers](std::size_t i) {
      std::this_thread::sleep_for(std::chrono::microseconds(((i * 7919 + workers) % 13) * 50));
    };
    auto job = bootstrap::run_pipeline(pc);
    auto faces = job->wait();
    o.require(faces.size() == 100, "workers=" + std::to_string(workers) + " produced " + std::to_string(faces.size()));
    const auto fdir = bootstrap::faces_dir(pc);
    bootstrap::write_index(fdir, faces);
    indexes.push_back(file_bytes(fdir / "index.json"));
    for (const CorpusPhoto& p : corpus.photos) {
      const auto id = bootstrap::derive_image_id(p.friend_name, p.photo_id, p.boxes.front());
      o.require(file_bytes(fdir / "crops" / (id.str() + ".ppm")) == oracle_crop_file(p.pixels, p.boxes.front()),
                "crop of " + p.photo_id + " differs from oracle");
    }
  }
  o.require(indexes[0] == indexes[1] && indexes[1] == indexes[2], "index.json differs across worker counts");
  if (o.ok) o.detail = "100 friends, workers 1/2/8 identical index, 300 crops equal the pixel oracle";
  return o;
}

Outcome service_flow() {
  Outcome o;
  TempDir dir;
  ServiceConfig cfg;
  cfg.data_dir = dir.path();
  TetradService svc(cfg);
  HttpServer server(svc);
  const int port = server.bind("127.0.0.1", 0);
  server.start();
  ApiClient api("http://127.0.0.1:" + std::to_string(port));

  const auto ids = make_ids(45);
  const std::vector<ImageId> secret_ids{ids[5], ids[12], ids[30], ids[44]};
  const Secret secret(secret_ids);
  const Secret reversed(std::vector<ImageId>(secret_ids.rbegin(), secret_ids.rend()));

  o.require(api.post("/accounts", {{"account_id", "accept"}}).status == 201, "create account");
  const Reply reg =
      api.post("/accounts/accept/registration", {{"image_ids", ids_json(ids)}, {"secret", ids_json(secret_ids)}});
  o.require(reg.status == 201, "registration status " + std::to_string(reg.status));

  const Registration local = register_account("accept", ids, secret_ids, 0);
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const SeededGrid sg = initial_grid_for(local, seed);
    if (oracle_aligned(sg.grid, secret)) {
      o.require(false, "seed " + std::to_string(seed) + " starts aligned");
      break;
    }
  }

  std::string sid;
  Grid initial = Grid(ids);
  const Reply ok = play_session(api, "accept", "access", [&](const Grid& g) { return solve_alignment(g, secret); },
                                &sid, &initial);
  o.require(!oracle_aligned(initial, secret), "served grid was already aligned");
  o.require(ok.status == 200 && ok.body["status"] == "accepted", "solver transcript not accepted");
  o.require(api.get("/resources/inbox", {{"session", sid}}).status == 200, "gated resource not 200");
  o.require(api.get("/resources/transfer", {{"session", sid}}).status == 403, "consequence mismatch not 403");

  o.require(api.post("/accounts", {{"account_id", "reject"}}).status == 201, "create second account");
  api.post("/accounts/reject/registration", {{"image_ids", ids_json(ids)}, {"secret", ids_json(secret_ids)}});
  for (int i = 0; i < 3; ++i) {
    const Reply r =
        play_session(api, "reject", "access", [&](const Grid& g) { return solve_alignment(g, reversed); });
    o.require(r.status == 200 && r.body["status"] == "rejected", "wrong-order transcript not rejected");
    o.require(r.body["locked"] == (i == 2), "lock state after rejection " + std::to_string(i + 1));
  }
  const Reply locked = api.post("/accounts/reject/sessions", {{"consequence", "access"}});
  o.require(locked.status == 423 && locked.body["error"]["code"] == "LOCKED", "locked account opened a session");
  svc.audit("accept");
  svc.audit("reject");
  server.stop();
  if (o.ok) o.detail = "accepted + resource 200, reversed order rejected, locked after 3, 1000 seeds unaligned";
  return o;
}

Outcome persistence() {
  Outcome o;
  TempDir dir;
  const auto ids = make_ids(45);
  const std::vector<ImageId> secret_ids{ids[1], ids[2], ids[3], ids[4]};
  json before;
  {
    ServiceConfig cfg;
    cfg.data_dir = dir.path();
    TetradService svc(cfg);
    ApiClient api(svc);
    api.post("/accounts", {{"account_id", "keep"}});
    api.post("/accounts/keep/registration", {{"image_ids", ids_json(ids)}, {"secret", ids_json(secret_ids)}});
    const Secret s(secret_ids);
    play_session(api, "keep", "payment", [&](const Grid& g) { return solve_alignment(g, s); });
    play_session(api, "keep", "access", [](const Grid&) { return std::vector<Move>{{Axis::row, 0, 1}}; });
    before = to_json(*svc.store().load("keep"));
  }
  {
    ServiceConfig cfg;
    cfg.data_dir = dir.path();
    TetradService svc(cfg);
    const json after = to_json(*svc.store().load("keep"));
    o.require(after == before, "record changed across restart");
    svc.audit("keep");
    o.require(after["lockout"]["consecutive_failures"] == before["lockout"]["consecutive_failures"],
              "lockout lost");

    AccountStore& store = svc.store();
    AccountRecord changed = *store.load("keep");
    changed.lockout = {2, false};
    changed.sessions.clear();
    store.before_rename = [](const std::filesystem::path& temp) {
      // Tear the temp file, then die before the rename.
      std::filesystem::resize_file(temp, std::filesystem::file_size(temp) / 2);
      throw std::runtime_error("injected crash");
    };
    bool threw = false;
    try {
      store.persist(changed);
    } catch (const std::runtime_error&) {
      threw = true;
    }
    o.require(threw, "fault was not injected");
    o.require(to_json(*store.load("keep")) == before, "crash before rename damaged the record");
    store.before_rename = nullptr;
    store.persist(changed);
    o.require(store.load("keep")->lockout.consecutive_failures == 2, "write after crash not durable");
  }
  if (o.ok) o.detail = "restart round-trip identical, torn write before rename leaves old record";
  return o;
}

}  // namespace

int main() {
  criterion("window geometry", 1, window_geometry);
  criterion("alignment oracle equivalence", 10, alignment_oracle);
  criterion("solver totality", 30, solver_totality);
  criterion("observation soundness", 0, observation_soundness);
  criterion("leakage quantification", 0, leakage);
  criterion("multi-session attack", 120, multi_session);
  criterion("pipeline determinism", 60, pipeline_determinism);
  criterion("end-to-end service flow", 5, service_flow);
  criterion("persistence", 0, persistence);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
