#include "tetrad/observer.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>

#include "parallel.hpp"
#include "tetrad/errors.hpp"
#include "tetrad/random.hpp"

namespace tetrad {

Observation make_observation(Grid initial, std::vector<Move> transcript) {
  Grid final_grid = apply_moves(initial, transcript);
  return Observation{std::move(initial), std::move(transcript), std::move(final_grid)};
}

CandidateSet observe(const Observation& obs) {
  if (apply_moves(obs.initial_grid, obs.transcript) != obs.final_grid) {
    throw IntegrityError("observed final grid does not match the replayed transcript");
  }
  return candidates(obs.final_grid);
}

CandidateSet intersect_sessions(std::span<const CandidateSet> sets) {
  if (sets.empty()) throw ValidationError("cannot intersect an empty list of candidate sets");
  CandidateSet acc = sets.front();
  for (std::size_t i = 1; i < sets.size(); ++i) {
    CandidateSet next;
    std::set_intersection(acc.begin(), acc.end(), sets[i].begin(), sets[i].end(),
                          std::inserter(next, next.end()));
    acc = std::move(next);
  }
  return acc;
}

SimulatedSession simulate_session(const Registration& reg, std::uint64_t seed) {
  Grid initial = initial_grid_for(reg, seed).grid;
  Prng rng(derive_seed(seed, 0x77696e646f77ULL));
  const int row = static_cast<int>(rng.below(geometry::rows));
  const int start_col =
      static_cast<int>(rng.below(geometry::cols - geometry::window_len + 1));
  auto moves = solve_to_window(initial, reg.secret, row, start_col);
  return SimulatedSession{make_observation(std::move(initial), std::move(moves)),
                          Window{WindowKind::h, {row, start_col}}};
}

std::vector<SimulatedSession> simulate_sessions(const Registration& reg, int n_sessions,
                                                std::uint64_t seed) {
  std::vector<SimulatedSession> out;
  out.reserve(static_cast<std::size_t>(std::max(n_sessions, 0)));
  for (int i = 0; i < n_sessions; ++i) {
    out.push_back(simulate_session(reg, derive_seed(seed, static_cast<std::uint64_t>(i))));
  }
  return out;
}

AttackReport simulate_attacker(const Registration& reg, int n_sessions, std::uint64_t seed) {
  if (n_sessions < 1) throw ValidationError("attack needs at least one session");
  AttackReport report;
  std::optional<CandidateSet> acc;
  for (const SimulatedSession& session : simulate_sessions(reg, n_sessions, seed)) {
    CandidateSet seen = observe(session.observation);
    report.per_session_candidate_counts.push_back(seen.size());
    if (!acc) {
      acc = std::move(seen);
    } else {
      const CandidateSet pair[] = {std::move(*acc), std::move(seen)};
      acc = intersect_sessions(pair);
    }
    report.intersection_sizes.push_back(acc->size());
    report.residual_bits.push_back(std::log2(static_cast<double>(acc->size())));
    if (!report.sessions_to_unique && acc->size() == 1) {
      report.sessions_to_unique = static_cast<int>(report.intersection_sizes.size());
    }
  }
  return report;
}

AttackReport keyboard_baseline() {
  AttackReport r;
  r.per_session_candidate_counts = {1};
  r.intersection_sizes = {1};
  r.sessions_to_unique = 1;
  r.baseline_keyboard_leak = 1;
  r.residual_bits = {0.0};
  return r;
}

double prior_bits() { return std::log2(static_cast<double>(ordered_secret_space)); }

Registration synthetic_registration(std::uint64_t seed, std::string account_id) {
  std::vector<ImageId> ids;
  for (int i = 0; i < geometry::cells; ++i) {
    ids.emplace_back((i < 10 ? "img0" : "img") + std::to_string(i));
  }
  Prng rng(seed);
  std::vector<ImageId> pool = ids;
  std::vector<ImageId> secret;
  for (int k = 0; k < geometry::window_len; ++k) {
    const auto j = static_cast<std::size_t>(rng.below(pool.size()));
    secret.push_back(pool[j]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(j));
  }
  return register_account(std::move(account_id), ids, secret, 0);
}

AttackSummary run_attack_trials(int trials, int sessions, std::uint64_t seed, int threads) {
  if (trials < 1) throw ValidationError("trials must be >= 1");
  if (sessions < 1) throw ValidationError("sessions must be >= 1");

  struct Trial {
    AttackReport report;
    bool survived = true;
  };
  std::vector<Trial> results(static_cast<std::size_t>(trials));
  detail::parallel_for(results.size(), threads, [&](std::size_t t) {
    const std::uint64_t trial_seed = seed + t;
    const Registration reg = synthetic_registration(trial_seed);
    Trial& out = results[t];
    out.report = simulate_attacker(reg, sessions, trial_seed);
    // Soundness: replay the same sessions and check the secret is never lost.
    std::vector<CandidateSet> seen;
    for (const auto& s : simulate_sessions(reg, sessions, trial_seed)) {
      seen.push_back(observe(s.observation));
      if (!intersect_sessions(seen).contains(reg.secret.images())) out.survived = false;
    }
  });

  AttackSummary summary;
  summary.trials = trials;
  summary.sessions = sessions;
  summary.seed = seed;
  summary.first_trial = results.front().report;
  summary.mean_intersection_sizes.assign(static_cast<std::size_t>(sessions), 0.0);

  std::vector<int> reached;
  int within_two = 0;
  for (const Trial& t : results) {
    for (int i = 0; i < sessions; ++i) {
      summary.mean_intersection_sizes[i] += static_cast<double>(t.report.intersection_sizes[i]);
    }
    summary.secret_always_survived = summary.secret_always_survived && t.survived;
    if (t.report.sessions_to_unique) {
      const int n = *t.report.sessions_to_unique;
      ++summary.sessions_to_unique_histogram[std::to_string(n)];
      reached.push_back(n);
      if (n <= 2) ++within_two;
    } else {
      ++summary.sessions_to_unique_histogram["not reached"];
    }
  }
  for (double& m : summary.mean_intersection_sizes) m /= trials;
  summary.unique_within_two_rate = static_cast<double>(within_two) / trials;

  // Lower median; "not reached" ranks after every reached value.
  const auto median_rank = static_cast<std::size_t>((trials - 1) / 2);
  if (median_rank < reached.size()) {
    std::sort(reached.begin(), reached.end());
    summary.median_sessions_to_unique = reached[median_rank];
  }
  return summary;
}

RegistrationFlow parse_flow(std::string_view text) {
  if (text == "jack") return RegistrationFlow::jack;
  if (text == "jill") return RegistrationFlow::jill;
  throw ValidationError("flow must be 'jack' or 'jill'");
}

std::string_view to_string(RegistrationFlow flow) {
  return flow == RegistrationFlow::jack ? "jack" : "jill";
}

std::vector<FlowStage> registration_stages(RegistrationFlow flow) {
  const int friends = geometry::cells;
  const int secret = geometry::window_len;
  if (flow == RegistrationFlow::jill) {
    // Single screen: ordering happens as secret members are assigned.
    return {{"select_friends", friends}, {"assign_secret", secret}, {"complete", 1}};
  }
  return {{"select_friends", friends}, {"advance", 1},        {"choose_secret", secret},
          {"advance", 1},              {"order_secret", secret}, {"complete", 1}};
}

EffortReport effort_report(RegistrationFlow flow, int n_auth_trials, std::uint64_t seed,
                           int password_baseline_actions) {
  if (n_auth_trials < 1) throw ValidationError("n_auth_trials must be >= 1");
  if (password_baseline_actions < 0) throw ValidationError("password baseline must be >= 0");
  EffortReport report;
  for (const FlowStage& stage : registration_stages(flow)) report.registration_actions += stage.actions;

  double total = 0.0;
  for (int t = 0; t < n_auth_trials; ++t) {
    const std::uint64_t trial_seed = seed + static_cast<std::uint64_t>(t);
    const Registration reg = synthetic_registration(trial_seed);
    const SimulatedSession session = simulate_session(reg, trial_seed);
    total += static_cast<double>(session.observation.transcript.size()) + 1.0;  // + submit
  }
  report.auth_actions_mean = total / n_auth_trials;
  report.password_baseline_actions = password_baseline_actions;
  return report;
}

}  // namespace tetrad
