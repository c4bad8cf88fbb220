// Copyright 2026 The safefilter Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "safefilter/envs.hpp"
#include "safefilter/filter.hpp"
#include "safefilter/invariance.hpp"
#include "safefilter/mdp.hpp"
#include "safefilter/rng.hpp"
#include "safefilter/solvers.hpp"

namespace safefilter {

enum class CheckStatus { kPass, kFail, kSkipped };

const char* to_string(CheckStatus status);

struct CheckResult {
  std::string name;
  CheckStatus status = CheckStatus::kPass;
  /// Largest deviation from the checked property; its meaning is given in `detail`.
  double max_deviation = 0.0;
  std::string detail;
  /// Replayable instance (MDP file plus state/policy/seed) when status is kFail.
  nlohmann::json counterexample;
};

struct VerificationReport {
  std::vector<CheckResult> checks;

  /// True when no check failed (skipped checks do not count against it).
  bool passed() const;
  void add(CheckResult result) { checks.push_back(std::move(result)); }
  void append(const VerificationReport& other);
  std::size_t count(CheckStatus status) const;

  nlohmann::json to_json() const;
  std::string summary() const;
};

/// Probability of ever entering the failure set under `policy`, for every start state: the
/// minimal nonnegative solution of the hitting equations with failure states absorbing.
/// States that cannot reach the failure set get exactly 0.
std::vector<double> hitting_probabilities(const TabularMdp& mdp, const SafetySpec& spec,
                                          const TabularPolicy& policy);

double violation_probability(const TabularMdp& mdp, const SafetySpec& spec,
                             const TabularPolicy& policy, State s0);

/// Maximal controlled-invariant safe set by iterative removal: start from the non-failure
/// states and delete every state without an action whose support stays inside, until stable.
std::vector<State> omega_star_oracle(const TabularMdp& mdp, const SafetySpec& spec);

struct EnumerationOptions {
  /// Enumeration runs only when n_actions^n_states is at most this cap.
  double cap = 1e6;
  /// Probabilities above this count as positive.
  double threshold = 1e-10;
};

/// Every deterministic stationary policy violates with positive probability from every
/// non-failure state outside Omega*.
CheckResult check_lemma1(const TabularMdp& mdp, const SafetySpec& spec,
                         const InvarianceResult& inv, const EnumerationOptions& options = {});

/// Admissible deterministic policies never violate from Omega*; every other deterministic
/// policy violates with positive probability from some Omega* state.
CheckResult check_prop1(const TabularMdp& mdp, const SafetySpec& spec,
                        const InvarianceResult& inv, const EnumerationOptions& options = {});

/// Both defining clauses of a perfect filter, checked against omega_star_oracle, plus a zero
/// hitting probability for the uniform policy pushed through the filter.
CheckResult check_filter(const TabularMdp& mdp, const SafetySpec& spec,
                         const SafetyFilter& filter);

/// Exact set equality between the invariance module and omega_star_oracle.
CheckResult check_oracle_agreement(const TabularMdp& mdp, const SafetySpec& spec,
                                   const InvarianceResult& inv);

/// Adding any single excluded non-failure state to Omega* leaves some state of the enlarged
/// set without an action that stays inside it.
CheckResult check_maximality(const TabularMdp& mdp, const SafetySpec& spec,
                             const InvarianceResult& inv);

/// max over Omega* of |V*_filtered - V*_constrained| <= 2 tol.
CheckResult check_value_equality(const TabularMdp& mdp, const InvarianceResult& inv,
                                 double tol = kDefaultPlanningTol);

struct Theorem1Options {
  /// Bound on ||Q - Q*_phi||_inf over Omega* x A; negative selects 0.01 * r_max / (1 - gamma).
  double q_tolerance = -1.0;
  double tol = kDefaultPlanningTol;
  /// Train under this filter instead of the perfect one (mutation testing).
  std::optional<SafetyFilter> filter_override;
  TrainingOptions training;
};

/// Full pipeline per seed: synthesize, filter, Q-learn, push forward, evaluate. Checks zero
/// failure entries, Q convergence and executed-policy optimality against V*_SC.
CheckResult check_theorem1(const TabularMdp& mdp, const SafetySpec& spec,
                           const std::vector<std::uint64_t>& seeds,
                           const LearningSchedule& sched, const Theorem1Options& options = {});

/// Rollout and value monitors agree on every (s in Omega*, a) when `exact` is set; otherwise
/// a rollout acceptance must imply a value acceptance.
CheckResult check_monitor_agreement(const TabularMdp& mdp, const SafetySpec& spec,
                                    const InvarianceResult& inv, const RolloutMonitorConfig& cfg,
                                    bool exact);

struct RandomMdpOptions {
  std::size_t min_states = 2;
  std::size_t max_states = 12;
  std::size_t min_actions = 2;
  std::size_t max_actions = 4;
  std::size_t max_support = 3;
  double min_discount = 0.5;
  double max_discount = 0.95;
  /// Resample until Omega* is nonempty.
  bool require_nonempty_safe_set = true;
  /// Resample dimensions until n_actions^n_states is at most this (0 disables).
  double max_policy_count = 0.0;
};

/// Random sparse MDP with random rewards in [-1, 1] and a random failure set of size
/// 1..max(1, n/2). Safe margins are drawn from [0, 1] with exact zeros included.
Environment random_mdp(RngStream& rng, const RandomMdpOptions& options = {});

/// Omega* plus the lowest non-failure state outside it, claiming the one-step-safe actions
/// there. nullopt when Omega* already covers every non-failure state.
std::optional<InvarianceResult> mutate_enlarged_omega(const TabularMdp& mdp,
                                                      const SafetySpec& spec,
                                                      const InvarianceResult& inv);

/// Lets the first unsafe proposal through unchanged. nullopt when every action is safe.
std::optional<SafetyFilter> mutate_filter_unsafe(const SafetyFilter& filter);

/// Overrides the first safe action that has another safe alternative. nullopt when no state
/// has two safe actions.
std::optional<SafetyFilter> mutate_filter_restrictive(const SafetyFilter& filter);

enum class Mutant { kNone, kEnlargedOmega, kUnsafeFilter, kRestrictiveFilter };

struct SuiteOptions {
  std::uint64_t seed = 0;
  std::size_t random_instances = 1000;
  std::size_t enumeration_instances = 200;
  double enumeration_policy_cap = 1e5;
  std::vector<std::uint64_t> training_seeds{0, 1, 2, 3, 4};
  std::size_t chain_steps = 50000;
  std::size_t grid_steps = 200000;
  /// Substitutes a mutant for the synthesized object in every check (test hook).
  Mutant inject = Mutant::kNone;
};

/// Built-in fixtures, random instances, mutation self-test, small grids and training runs.
VerificationReport run_default_suite(const SuiteOptions& options);

}  // namespace safefilter
