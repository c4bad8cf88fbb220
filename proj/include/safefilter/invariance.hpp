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

#include <vector>

#include "safefilter/mdp.hpp"

namespace safefilter {

/// Safety value, maximal controlled-invariant safe set and per-state safe actions.
struct InvarianceResult {
  /// Greatest fixed point of S(s) = min(g(s), max_a min_{s' in supp P(.|s,a)} S(s')).
  std::vector<double> safety_value;
  /// {s : safety_value(s) >= 0}, sorted ascending.
  std::vector<State> omega_star;
  /// safe_actions[s] = {a : supp P(.|s,a) is inside omega_star}, sorted, for every state.
  std::vector<std::vector<Action>> safe_actions;
  /// Lowest-index safe action on omega_star, action 0 elsewhere.
  TabularPolicy fallback;

  std::size_t n_states() const { return safety_value.size(); }
  std::size_t n_actions() const { return fallback.n_actions(); }
  bool empty() const { return omega_star.empty(); }
  bool contains(State s) const;
  bool is_safe_action(State s, Action a) const;
};

/// Runs the worst-case safety Bellman iteration from S = g until nothing changes.
/// Values stay in the finite set of margin values, so the loop ends after at most
/// n_states + 1 sweeps. Throws SpecError on a dimension mismatch.
std::vector<double> compute_safety_value(const TabularMdp& mdp, const SafetySpec& spec);

/// Omega*, safe action sets and fallback. An empty Omega* is reported through
/// InvarianceResult::empty() rather than an exception.
InvarianceResult maximal_invariant_set(const TabularMdp& mdp, const SafetySpec& spec);

/// Safe action sets relative to an arbitrary candidate set (sorted state list).
std::vector<std::vector<Action>> safe_actions_for(const TabularMdp& mdp,
                                                  const std::vector<State>& candidate);

/// Membership in the admissible policy set: supp pi(.|s) within safe_actions(s) on Omega*.
bool is_admissible(const TabularPolicy& policy, const InvarianceResult& inv);

}  // namespace safefilter
