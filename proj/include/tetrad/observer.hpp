#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tetrad/auth.hpp"
#include "tetrad/grid.hpp"

namespace tetrad {

// Everything a perfect shoulder-surfer sees during one authentication.
struct Observation {
  Grid initial_grid;
  std::vector<Move> transcript;
  Grid final_grid;
};

Observation make_observation(Grid initial, std::vector<Move> transcript);

// candidates(final_grid). Throws IntegrityError when final_grid is not the
// replay of the transcript.
CandidateSet observe(const Observation& obs);

// Throws ValidationError on an empty list.
CandidateSet intersect_sessions(std::span<const CandidateSet> sets);

struct AttackReport {
  std::vector<std::size_t> per_session_candidate_counts;
  std::vector<std::size_t> intersection_sizes;
  std::optional<int> sessions_to_unique;  // nullopt: not reached
  std::size_t baseline_keyboard_leak = 1;
  std::vector<double> residual_bits;
};

// One authentication by the simulated user: fresh grid from
// initial_grid_for(reg, seed), a uniformly chosen horizontal target window,
// and the constructive solver's transcript.
struct SimulatedSession {
  Observation observation;
  Window target;
};

SimulatedSession simulate_session(const Registration& reg, std::uint64_t seed);

// Session i uses derive_seed(seed, i).
std::vector<SimulatedSession> simulate_sessions(const Registration& reg, int n_sessions,
                                                std::uint64_t seed);

// Throws ValidationError when n_sessions < 1.
AttackReport simulate_attacker(const Registration& reg, int n_sessions, std::uint64_t seed);

AttackReport keyboard_baseline();

double prior_bits();

// 45 synthetic ids ("img00".."img44") and a secret of 4 drawn by Prng(seed).
Registration synthetic_registration(std::uint64_t seed, std::string account_id = "sim");

// Many independent attacks; trial t uses base seed + t for both its
// registration and its sessions. Trials run on `threads` workers; the
// reduction is in trial order so the result does not depend on threads.
struct AttackSummary {
  int trials = 0;
  int sessions = 0;
  std::uint64_t seed = 0;
  AttackReport first_trial;
  std::vector<double> mean_intersection_sizes;
  std::map<std::string, int> sessions_to_unique_histogram;  // "1", "2", ..., "not reached"
  double unique_within_two_rate = 0.0;
  std::optional<int> median_sessions_to_unique;
  bool secret_always_survived = true;
};

AttackSummary run_attack_trials(int trials, int sessions, std::uint64_t seed, int threads = 1);

enum class RegistrationFlow { jack, jill };

RegistrationFlow parse_flow(std::string_view text);
std::string_view to_string(RegistrationFlow flow);

struct FlowStage {
  std::string name;
  int actions = 0;
};

// Minimum user actions per registration stage.
std::vector<FlowStage> registration_stages(RegistrationFlow flow);

inline constexpr int default_password_baseline_actions = 9;  // 8 keystrokes + submit

struct EffortReport {
  int registration_actions = 0;
  double auth_actions_mean = 0.0;
  int password_baseline_actions = default_password_baseline_actions;
};

EffortReport effort_report(RegistrationFlow flow, int n_auth_trials, std::uint64_t seed,
                           int password_baseline_actions = default_password_baseline_actions);

}  // namespace tetrad
