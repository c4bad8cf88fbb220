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

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "safefilter/rng.hpp"

namespace safefilter {

using State = std::size_t;
using Action = std::size_t;

struct Transition {
  State next;
  double prob;

  bool operator==(const Transition&) const = default;
};

/// Smallest probability mass accepted in a kernel row. Entries that are exactly zero are
/// dropped at construction; entries in (0, kMinProbability) are reported by validate().
inline constexpr double kMinProbability = 1e-15;
inline constexpr double kRowSumTolerance = 1e-12;

/// Finite MDP (S, A, P, r, gamma) with a sparse kernel.
///
/// The kernel and reward tables are indexed by `s * n_actions + a`. The constructor only
/// checks table dimensions; probabilistic invariants are reported by validate().
class TabularMdp {
 public:
  TabularMdp(std::size_t n_states, std::size_t n_actions,
             std::vector<std::vector<Transition>> kernel, std::vector<double> rewards,
             double discount);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  double discount() const { return discount_; }

  /// max |r(s,a)| over the whole table.
  double r_max() const { return r_max_; }

  /// Bound r_max / (1 - gamma) on any discounted value.
  double value_bound() const { return r_max_ / (1.0 - discount_); }

  std::span<const Transition> kernel(State s, Action a) const;
  double reward(State s, Action a) const;

  const std::vector<std::vector<Transition>>& kernel_table() const { return kernel_; }
  const std::vector<double>& reward_table() const { return rewards_; }

  void check_index(State s, Action a) const;
  void check_state(State s) const;

 private:
  std::size_t n_states_;
  std::size_t n_actions_;
  std::vector<std::vector<Transition>> kernel_;
  std::vector<double> rewards_;
  double discount_;
  double r_max_ = 0.0;
};

struct Violation {
  std::string kind;
  State state = 0;
  Action action = 0;
  std::string detail;
};

using ValidationReport = std::vector<Violation>;

/// Lists every broken invariant of `mdp`; an empty report means the model is valid.
ValidationReport validate(const TabularMdp& mdp);

/// Throws SpecError carrying the first violations if `mdp` is not valid.
void require_valid(const TabularMdp& mdp);

/// Draws s' ~ P(. | s, a).
State sample_transition(const TabularMdp& mdp, State s, Action a, RngStream& rng);

/// Sorted set of successors with positive probability.
std::vector<State> support(const TabularMdp& mdp, State s, Action a);

/// Margin table g and its failure set {s : g(s) < 0}.
class SafetySpec {
 public:
  explicit SafetySpec(std::vector<double> margin);

  std::size_t n_states() const { return margin_.size(); }
  const std::vector<double>& margin() const { return margin_; }
  const std::vector<State>& failure_set() const { return failure_set_; }
  bool is_failure(State s) const { return margin_.at(s) < 0.0; }

 private:
  std::vector<double> margin_;
  std::vector<State> failure_set_;
};

/// Throws SpecError when `spec` does not cover exactly the states of `mdp`.
void require_matching(const TabularMdp& mdp, const SafetySpec& spec);

/// Stochastic stationary policy pi(a | s), stored row-major.
class TabularPolicy {
 public:
  TabularPolicy(std::size_t n_states, std::size_t n_actions, std::vector<double> probs);

  static TabularPolicy deterministic(std::size_t n_actions, const std::vector<Action>& actions);
  static TabularPolicy uniform(std::size_t n_states, std::size_t n_actions);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }

  double prob(State s, Action a) const { return probs_[s * n_actions_ + a]; }
  std::span<const double> row(State s) const;
  const std::vector<double>& table() const { return probs_; }

  /// Actions with strictly positive stored probability.
  std::vector<Action> support(State s) const;
  bool is_deterministic() const;

  /// Lowest-index action with maximal probability.
  Action mode(State s) const;

  Action sample(State s, RngStream& rng) const;

  bool operator==(const TabularPolicy&) const = default;

 private:
  std::size_t n_states_;
  std::size_t n_actions_;
  std::vector<double> probs_;
};

/// V(s) for every state of the underlying model.
using ValueTable = std::vector<double>;

class QTable {
 public:
  QTable(std::size_t n_states, std::size_t n_actions, double init = 0.0)
      : n_states_(n_states), n_actions_(n_actions), values_(n_states * n_actions, init) {}
  QTable(std::size_t n_states, std::size_t n_actions, std::vector<double> values);

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }

  double& operator()(State s, Action a) { return values_[s * n_actions_ + a]; }
  double operator()(State s, Action a) const { return values_[s * n_actions_ + a]; }

  std::span<const double> row(State s) const;
  const std::vector<double>& table() const { return values_; }

  /// Lowest-index maximiser of Q(s, .).
  Action greedy(State s) const;
  double max(State s) const;

  bool operator==(const QTable&) const = default;

 private:
  std::size_t n_states_;
  std::size_t n_actions_;
  std::vector<double> values_;
};

}  // namespace safefilter
