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

#include "safefilter/filter.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "safefilter/errors.hpp"

namespace safefilter {

SafetyFilter::SafetyFilter(InvarianceResult inv, std::vector<std::vector<Action>> override_rule)
    : inv_(std::move(inv)), rule_(std::move(override_rule)) {
  if (inv_.empty()) {
    throw SynthesisError("empty safe set: no filter can be built");
  }
  if (rule_.size() != inv_.n_states()) {
    throw SpecError("SafetyFilter: override rule must have one row per state");
  }
  for (State s = 0; s < rule_.size(); ++s) {
    const std::size_t expected = inv_.contains(s) ? inv_.n_actions() : 0;
    if (rule_[s].size() != expected) {
      throw SpecError("SafetyFilter: override row " + std::to_string(s) + " has " +
                      std::to_string(rule_[s].size()) + " entries, expected " +
                      std::to_string(expected));
    }
    for (Action b : rule_[s]) {
      if (b >= inv_.n_actions()) {
        throw SpecError("SafetyFilter: override target out of range at state " +
                        std::to_string(s));
      }
    }
  }
}

Action SafetyFilter::apply(State s, Action a) const {
  if (s >= rule_.size() || !inv_.contains(s)) {
    throw OutOfEnvelopeError("state " + std::to_string(s) + " is outside the safe set");
  }
  if (a >= inv_.n_actions()) {
    throw IndexError("action index " + std::to_string(a) + " out of range");
  }
  return rule_[s][a];
}

FilterDecision SafetyFilter::decide(State s, Action a) const {
  const Action b = apply(s, a);
  return {b, b != a};
}

PerfectFilter::PerfectFilter(InvarianceResult inv, std::vector<std::vector<Action>> rule)
    : SafetyFilter(std::move(inv), std::move(rule)) {
  const auto& iv = invariance();
  for (State s : iv.omega_star) {
    for (Action a = 0; a < iv.n_actions(); ++a) {
      const Action b = apply(s, a);
      if (!iv.is_safe_action(s, b)) {
        throw SpecError("PerfectFilter: phi(" + std::to_string(s) + "," + std::to_string(a) +
                        ") is not a safe action");
      }
      if (iv.is_safe_action(s, a) && b != a) {
        throw SpecError("PerfectFilter: safe action " + std::to_string(a) + " at state " +
                        std::to_string(s) + " is overridden");
      }
    }
  }
}

PerfectFilter build_perfect_filter(const InvarianceResult& inv) {
  if (inv.empty()) {
    throw SynthesisError("empty safe set: no filter can be built");
  }
  std::vector<std::vector<Action>> rule(inv.n_states());
  for (State s : inv.omega_star) {
    const Action fallback = inv.fallback.mode(s);
    rule[s].resize(inv.n_actions());
    for (Action a = 0; a < inv.n_actions(); ++a) {
      rule[s][a] = inv.is_safe_action(s, a) ? a : fallback;
    }
  }
  return PerfectFilter(inv, std::move(rule));
}

FilterDecision filter_apply(const SafetyFilter& filter, State s, Action a) {
  return filter.decide(s, a);
}

FilteredMdp::FilteredMdp(TabularMdp base, SafetyFilter filter)
    : base_(std::move(base)), filter_(std::move(filter)) {
  if (filter_.n_states() != base_.n_states() || filter_.n_actions() != base_.n_actions()) {
    throw SpecError("FilteredMdp: filter dimensions do not match the MDP");
  }
}

std::span<const Transition> FilteredMdp::kernel(State s, Action a) const {
  return base_.kernel(s, filter_.apply(s, a));
}

double FilteredMdp::reward(State s, Action a) const {
  return base_.reward(s, filter_.apply(s, a));
}

FilteredMdp make_filtered_mdp(const TabularMdp& mdp, const SafetyFilter& filter) {
  return FilteredMdp(mdp, filter);
}

bool value_monitor(const InvarianceResult& inv, const TabularMdp& mdp, State s, Action a,
                   double margin) {
  mdp.check_index(s, a);
  if (!inv.contains(s)) {
    throw OutOfEnvelopeError("value monitor queried at state " + std::to_string(s) +
                             " outside the safe set");
  }
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& t : mdp.kernel(s, a)) {
    worst = std::min(worst, inv.safety_value[t.next]);
  }
  return worst >= margin;
}

void validate_rollout_config(const TabularMdp& mdp, const SafetySpec& spec,
                             const RolloutMonitorConfig& cfg) {
  require_matching(mdp, spec);
  if (cfg.horizon < 1) {
    throw ConfigError("rollout horizon must be at least 1");
  }
  if (cfg.target_margin.size() != mdp.n_states()) {
    throw ConfigError("target_margin must have one entry per state");
  }
  if (cfg.stop_policy.n_states() != mdp.n_states() ||
      cfg.stop_policy.n_actions() != mdp.n_actions()) {
    throw ConfigError("stop_policy dimensions do not match the MDP");
  }
  if (!cfg.stop_policy.is_deterministic()) {
    throw ConfigError("stop_policy must be deterministic");
  }
  const auto terminal_safe = [&](State x) {
    return cfg.target_margin[x] >= 0.0 && !spec.is_failure(x);
  };
  for (State s = 0; s < mdp.n_states(); ++s) {
    if (!terminal_safe(s)) {
      continue;
    }
    for (const auto& t : mdp.kernel(s, cfg.stop_policy.mode(s))) {
      if (!terminal_safe(t.next)) {
        throw ConfigError("terminal-safe set is not invariant under stop_policy: state " +
                          std::to_string(s) + " can reach " + std::to_string(t.next));
      }
    }
  }
}

RolloutMonitor::RolloutMonitor(const TabularMdp& mdp, const SafetySpec& spec,
                               RolloutMonitorConfig cfg)
    : mdp_(mdp), failure_(mdp.n_states(), 0), cfg_(std::move(cfg)) {
  validate_rollout_config(mdp, spec, cfg_);
  const std::size_t n = mdp.n_states();
  for (State x : spec.failure_set()) {
    failure_[x] = 1;
  }
  reaches_.assign(n, 0);
  for (State x = 0; x < n; ++x) {
    reaches_[x] = (!failure_[x] && cfg_.target_margin[x] >= 0.0) ? 1 : 0;
  }
  std::vector<char> next(n);
  for (std::size_t step = 1; step < cfg_.horizon; ++step) {
    for (State x = 0; x < n; ++x) {
      if (reaches_[x] || failure_[x]) {
        next[x] = reaches_[x];
        continue;
      }
      const auto row = mdp.kernel(x, cfg_.stop_policy.mode(x));
      next[x] = std::all_of(row.begin(), row.end(),
                            [&](const Transition& t) { return reaches_[t.next] != 0; })
                    ? 1
                    : 0;
    }
    if (next == reaches_) {
      break;
    }
    reaches_.swap(next);
  }
}

bool RolloutMonitor::check(State s, Action a) const {
  mdp_.check_index(s, a);
  if (failure_[s]) {
    throw PreconditionError("rollout monitor queried at failure state " + std::to_string(s));
  }
  const auto row = mdp_.kernel(s, a);
  return std::all_of(row.begin(), row.end(),
                     [&](const Transition& t) { return reaches_[t.next] != 0; });
}

bool rollout_monitor(const TabularMdp& mdp, const SafetySpec& spec,
                     const RolloutMonitorConfig& cfg, State s, Action a) {
  return RolloutMonitor(mdp, spec, cfg).check(s, a);
}

std::vector<State> stop_safe_states(const TabularMdp& mdp, const InvarianceResult& inv) {
  std::vector<State> out;
  for (State s : inv.omega_star) {
    for (Action a : inv.safe_actions[s]) {
      const auto row = mdp.kernel(s, a);
      if (row.size() == 1 && row.front().next == s) {
        out.push_back(s);
        break;
      }
    }
  }
  return out;
}

RolloutMonitorConfig make_rollout_config(const TabularMdp& mdp, const InvarianceResult& inv,
                                         const std::vector<State>& targets,
                                         std::size_t horizon) {
  constexpr std::size_t kUnreached = std::numeric_limits<std::size_t>::max();
  const std::size_t n = mdp.n_states();
  if (targets.empty()) {
    throw ConfigError("rollout config needs at least one target state");
  }
  std::vector<double> margin(n, -1.0);
  std::vector<std::size_t> distance(n, kUnreached);
  for (State t : targets) {
    if (t >= n || !inv.contains(t)) {
      throw ConfigError("rollout target " + std::to_string(t) + " is not in the safe set");
    }
    margin[t] = 1.0;
    distance[t] = 0;
  }
  std::vector<Action> stop(n, 0);
  for (State s = 0; s < n; ++s) {
    stop[s] = inv.fallback.mode(s);
  }
  for (State t : targets) {
    bool found = false;
    for (Action a : inv.safe_actions[t]) {
      const auto row = mdp.kernel(t, a);
      if (std::all_of(row.begin(), row.end(),
                      [&](const Transition& tr) { return margin[tr.next] >= 0.0; })) {
        stop[t] = a;
        found = true;
        break;
      }
    }
    if (!found) {
      throw ConfigError("rollout target " + std::to_string(t) +
                        " cannot be held inside the target set");
    }
  }
  // Worst-case attractor of the targets within Omega*, one layer per pass.
  std::size_t max_distance = 0;
  for (std::size_t layer = 1;; ++layer) {
    std::vector<std::pair<State, Action>> added;
    for (State s : inv.omega_star) {
      if (distance[s] != kUnreached) {
        continue;
      }
      for (Action a : inv.safe_actions[s]) {
        const auto row = mdp.kernel(s, a);
        if (std::all_of(row.begin(), row.end(),
                        [&](const Transition& tr) { return distance[tr.next] < layer; })) {
          added.emplace_back(s, a);
          break;
        }
      }
    }
    if (added.empty()) {
      break;
    }
    for (auto [s, a] : added) {
      distance[s] = layer;
      stop[s] = a;
    }
    max_distance = layer;
  }
  return RolloutMonitorConfig{horizon == 0 ? max_distance + 1 : horizon, std::move(margin),
                              TabularPolicy::deterministic(mdp.n_actions(), stop)};
}

namespace {

template <typename Accept>
SafetyFilter monitor_filter(const InvarianceResult& inv, Accept accept) {
  std::vector<std::vector<Action>> rule(inv.n_states());
  for (State s : inv.omega_star) {
    const Action fallback = inv.fallback.mode(s);
    rule[s].resize(inv.n_actions());
    for (Action a = 0; a < inv.n_actions(); ++a) {
      rule[s][a] = accept(s, a) ? a : fallback;
    }
  }
  return SafetyFilter(inv, std::move(rule));
}

}  // namespace

SafetyFilter build_value_monitor_filter(const TabularMdp& mdp, const InvarianceResult& inv,
                                        double margin) {
  return monitor_filter(inv,
                        [&](State s, Action a) { return value_monitor(inv, mdp, s, a, margin); });
}

SafetyFilter build_rollout_monitor_filter(const InvarianceResult& inv,
                                          const RolloutMonitor& monitor) {
  return monitor_filter(inv, [&](State s, Action a) { return monitor.check(s, a); });
}

}  // namespace safefilter
