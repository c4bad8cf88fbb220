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

#include "safefilter/invariance.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "safefilter/errors.hpp"

namespace safefilter {

bool InvarianceResult::contains(State s) const {
  return std::binary_search(omega_star.begin(), omega_star.end(), s);
}

bool InvarianceResult::is_safe_action(State s, Action a) const {
  const auto& actions = safe_actions.at(s);
  return std::binary_search(actions.begin(), actions.end(), a);
}

std::vector<double> compute_safety_value(const TabularMdp& mdp, const SafetySpec& spec) {
  require_matching(mdp, spec);
  const std::size_t n = mdp.n_states();
  std::vector<double> value = spec.margin();
  std::vector<double> next(n);
  for (std::size_t sweep = 0; sweep <= n + 1; ++sweep) {
    for (State s = 0; s < n; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (Action a = 0; a < mdp.n_actions(); ++a) {
        double worst = std::numeric_limits<double>::infinity();
        for (const auto& t : mdp.kernel(s, a)) {
          worst = std::min(worst, value[t.next]);
        }
        best = std::max(best, worst);
      }
      next[s] = std::min(spec.margin()[s], best);
    }
    if (next == value) {
      return value;
    }
    value.swap(next);
  }
  throw std::logic_error("compute_safety_value: no fixed point after n_states + 1 sweeps");
}

std::vector<std::vector<Action>> safe_actions_for(const TabularMdp& mdp,
                                                  const std::vector<State>& candidate) {
  std::vector<char> inside(mdp.n_states(), 0);
  for (State s : candidate) {
    inside.at(s) = 1;
  }
  std::vector<std::vector<Action>> out(mdp.n_states());
  for (State s = 0; s < mdp.n_states(); ++s) {
    for (Action a = 0; a < mdp.n_actions(); ++a) {
      const auto row = mdp.kernel(s, a);
      const bool stays = std::all_of(row.begin(), row.end(),
                                     [&](const Transition& t) { return inside[t.next] != 0; });
      if (stays) {
        out[s].push_back(a);
      }
    }
  }
  return out;
}

InvarianceResult maximal_invariant_set(const TabularMdp& mdp, const SafetySpec& spec) {
  auto value = compute_safety_value(mdp, spec);
  std::vector<State> omega;
  for (State s = 0; s < value.size(); ++s) {
    if (value[s] >= 0.0) {
      omega.push_back(s);
    }
  }
  auto safe = safe_actions_for(mdp, omega);
  std::vector<Action> fallback(mdp.n_states(), 0);
  for (State s : omega) {
    // Nonempty on a fixed point: S(s) >= 0 needs an action whose successors all have S >= 0.
    fallback[s] = safe[s].front();
  }
  return InvarianceResult{std::move(value), std::move(omega), std::move(safe),
                          TabularPolicy::deterministic(mdp.n_actions(), fallback)};
}

bool is_admissible(const TabularPolicy& policy, const InvarianceResult& inv) {
  if (policy.n_states() != inv.n_states() || policy.n_actions() != inv.n_actions()) {
    throw SpecError("is_admissible: policy dimensions do not match the invariance result");
  }
  for (State s : inv.omega_star) {
    for (Action a : policy.support(s)) {
      if (!inv.is_safe_action(s, a)) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace safefilter
