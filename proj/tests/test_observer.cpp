#include <cmath>

#include "doctest.h"
#include "support.hpp"
#include "tetrad/errors.hpp"
#include "tetrad/observer.hpp"

using namespace tetrad;

TEST_CASE("observe returns the 72 window tuples of the final grid") {
  const Registration reg = synthetic_registration(3);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const SimulatedSession session = simulate_session(reg, seed);
    const CandidateSet seen = observe(session.observation);
    CHECK(seen.size() == 72);
    CHECK(seen.contains(reg.secret.images()));
    const auto oracle = tetrad::testing::oracle_candidates(session.observation.final_grid);
    CHECK(seen == CandidateSet(oracle.begin(), oracle.end()));
    CHECK(observe(session.observation) == seen);
  }
}

TEST_CASE("observe rejects an observation whose final grid was not replayed") {
  const Registration reg = synthetic_registration(4);
  SimulatedSession session = simulate_session(reg, 1);
  Observation tampered = session.observation;
  tampered.final_grid = apply_move(tampered.final_grid, {Axis::row, 0, 1});
  CHECK_THROWS_AS(observe(tampered), IntegrityError);
}

TEST_CASE("simulated user hits its randomly chosen window") {
  const Registration reg = synthetic_registration(5);
  std::set<std::pair<int, int>> targets;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const SimulatedSession s = simulate_session(reg, seed);
    CHECK(read_window(s.observation.final_grid, s.target) == reg.secret.images());
    CHECK(s.observation.transcript.size() <= static_cast<std::size_t>(solver_move_budget));
    targets.emplace(s.target.start.row, s.target.start.col);
  }
  CHECK(targets.size() == 30);  // every horizontal window gets used
}

TEST_CASE("intersect_sessions") {
  const Registration reg = synthetic_registration(6);
  const CandidateSet a = observe(simulate_session(reg, 10).observation);
  const CandidateSet b = observe(simulate_session(reg, 11).observation);

  const CandidateSet one[] = {a};
  CHECK(intersect_sessions(one) == a);
  const CandidateSet same[] = {a, a};
  CHECK(intersect_sessions(same) == a);
  const CandidateSet two[] = {a, b};
  const CandidateSet both = intersect_sessions(two);
  CHECK(both.contains(reg.secret.images()));
  CHECK(both.size() <= 72);

  CHECK_THROWS_AS(intersect_sessions(std::span<const CandidateSet>{}), ValidationError);
}

TEST_CASE("two sessions usually pin the secret") {
  int unique = 0;
  for (std::uint64_t trial = 0; trial < 500; ++trial) {
    const Registration reg = synthetic_registration(1000 + trial);
    const CandidateSet sets[] = {observe(simulate_session(reg, 2 * trial).observation),
                                 observe(simulate_session(reg, 2 * trial + 1).observation)};
    const CandidateSet both = intersect_sessions(sets);
    REQUIRE(both.contains(reg.secret.images()));
    unique += both.size() == 1;
  }
  CHECK(unique >= 450);
}

TEST_CASE("simulate_attacker report invariants") {
  const Registration reg = synthetic_registration(7);
  CHECK_THROWS_AS(simulate_attacker(reg, 0, 1), ValidationError);

  const AttackReport one = simulate_attacker(reg, 1, 7);
  CHECK(one.per_session_candidate_counts == std::vector<std::size_t>{72});
  CHECK(one.intersection_sizes == std::vector<std::size_t>{72});
  CHECK(one.residual_bits.at(0) == doctest::Approx(6.169925).epsilon(1e-6));
  CHECK_FALSE(one.sessions_to_unique.has_value());

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const AttackReport r = simulate_attacker(reg, 5, seed);
    REQUIRE(r.intersection_sizes.size() == 5);
    for (std::size_t i = 0; i < r.intersection_sizes.size(); ++i) {
      CHECK(r.per_session_candidate_counts[i] == 72);
      CHECK(r.intersection_sizes[i] >= 1);
      if (i > 0) CHECK(r.intersection_sizes[i] <= r.intersection_sizes[i - 1]);
      CHECK(r.residual_bits[i] == std::log2(static_cast<double>(r.intersection_sizes[i])));
    }
    if (r.sessions_to_unique) CHECK(r.intersection_sizes[*r.sessions_to_unique - 1] == 1);
  }
}

TEST_CASE("keyboard baseline") {
  const AttackReport k = keyboard_baseline();
  CHECK(k.per_session_candidate_counts == std::vector<std::size_t>{1});
  CHECK(k.residual_bits == std::vector<double>{0.0});
  CHECK(k.sessions_to_unique == 1);
  const AttackReport t = simulate_attacker(synthetic_registration(1), 1, 1);
  CHECK(t.per_session_candidate_counts[0] / k.per_session_candidate_counts[0] == 72);
  CHECK(prior_bits() == doctest::Approx(21.7698).epsilon(1e-4));
}

TEST_CASE("run_attack_trials is independent of thread count") {
  const AttackSummary a = run_attack_trials(40, 3, 99, 1);
  const AttackSummary b = run_attack_trials(40, 3, 99, 4);
  CHECK(a.sessions_to_unique_histogram == b.sessions_to_unique_histogram);
  CHECK(a.mean_intersection_sizes == b.mean_intersection_sizes);
  CHECK(a.first_trial.intersection_sizes == b.first_trial.intersection_sizes);
  CHECK(a.secret_always_survived);
  CHECK(a.median_sessions_to_unique == 2);
  CHECK_THROWS_AS(run_attack_trials(0, 1, 1), ValidationError);
}

TEST_CASE("effort report") {
  CHECK(effort_report(RegistrationFlow::jill, 10, 1).registration_actions == 50);
  CHECK(effort_report(RegistrationFlow::jack, 10, 1).registration_actions == 56);
  const EffortReport r = effort_report(RegistrationFlow::jill, 200, 42);
  CHECK(r.auth_actions_mean >= 1.0);
  CHECK(r.auth_actions_mean <= 101.0);
  CHECK(r.password_baseline_actions == 9);
  CHECK(effort_report(RegistrationFlow::jill, 1, 1, 12).password_baseline_actions == 12);
  CHECK_THROWS_AS(effort_report(RegistrationFlow::jill, 0, 1), ValidationError);
  CHECK(parse_flow("jack") == RegistrationFlow::jack);
  CHECK_THROWS_AS(parse_flow("june"), ValidationError);
}
