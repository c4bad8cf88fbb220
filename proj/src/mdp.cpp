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

#include "safefilter/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "safefilter/errors.hpp"

namespace safefilter {

TabularMdp::TabularMdp(std::size_t n_states, std::size_t n_actions,
                       std::vector<std::vector<Transition>> kernel, std::vector<double> rewards,
                       double discount)
    : n_states_(n_states),
      n_actions_(n_actions),
      kernel_(std::move(kernel)),
      rewards_(std::move(rewards)),
      discount_(discount) {
  if (n_states_ == 0 || n_actions_ == 0) {
    throw SpecError("TabularMdp: state and action sets must be nonempty");
  }
  const std::size_t rows = n_states_ * n_actions_;
  if (kernel_.size() != rows || rewards_.size() != rows) {
    std::ostringstream msg;
    msg << "TabularMdp: expected " << rows << " kernel rows and rewards, got " << kernel_.size()
        << " and " << rewards_.size();
    throw SpecError(msg.str());
  }
  for (auto& row : kernel_) {
    std::erase_if(row, [](const Transition& t) { return t.prob == 0.0; });
  }
  for (double r : rewards_) {
    r_max_ = std::max(r_max_, std::abs(r));
  }
}

void TabularMdp::check_state(State s) const {
  if (s >= n_states_) {
    throw IndexError("state index " + std::to_string(s) + " out of range (n_states = " +
                     std::to_string(n_states_) + ")");
  }
}

void TabularMdp::check_index(State s, Action a) const {
  check_state(s);
  if (a >= n_actions_) {
    throw IndexError("action index " + std::to_string(a) + " out of range (n_actions = " +
                     std::to_string(n_actions_) + ")");
  }
}

std::span<const Transition> TabularMdp::kernel(State s, Action a) const {
  check_index(s, a);
  return kernel_[s * n_actions_ + a];
}

double TabularMdp::reward(State s, Action a) const {
  check_index(s, a);
  return rewards_[s * n_actions_ + a];
}

ValidationReport validate(const TabularMdp& mdp) {
  ValidationReport report;
  if (!(mdp.discount() > 0.0 && mdp.discount() < 1.0)) {
    report.push_back({"discount", 0, 0, "discount must lie in (0, 1)"});
  }
  const std::size_t n = mdp.n_states();
  for (State s = 0; s < n; ++s) {
    for (Action a = 0; a < mdp.n_actions(); ++a) {
      const auto row = mdp.kernel(s, a);
      double sum = 0.0;
      std::vector<State> seen;
      for (const auto& t : row) {
        if (!std::isfinite(t.prob)) {
          report.push_back({"non-finite mass", s, a, "probability is not finite"});
          continue;
        }
        if (t.prob < 0.0) {
          report.push_back({"negative mass", s, a, "probability " + std::to_string(t.prob)});
        } else if (t.prob < kMinProbability) {
          report.push_back({"tiny mass", s, a, "probability below 1e-15"});
        }
        if (t.next >= n) {
          report.push_back({"successor index", s, a, "next state " + std::to_string(t.next)});
        }
        seen.push_back(t.next);
        sum += t.prob;
      }
      std::sort(seen.begin(), seen.end());
      if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
        report.push_back({"duplicate successor", s, a, "repeated next state"});
      }
      if (std::abs(sum - 1.0) > kRowSumTolerance) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "row sums to " << sum;
        report.push_back({"row sum", s, a, msg.str()});
      }
      if (!std::isfinite(mdp.reward(s, a))) {
        report.push_back({"reward", s, a, "reward is not finite"});
      }
    }
  }
  return report;
}

void require_valid(const TabularMdp& mdp) {
  const auto report = validate(mdp);
  if (report.empty()) {
    return;
  }
  std::ostringstream msg;
  msg << "invalid MDP (" << report.size() << " violations):";
  for (std::size_t i = 0; i < report.size() && i < 5; ++i) {
    const auto& v = report[i];
    msg << " [" << v.kind << " at (" << v.state << "," << v.action << "): " << v.detail << "]";
  }
  throw SpecError(msg.str());
}

State sample_transition(const TabularMdp& mdp, State s, Action a, RngStream& rng) {
  const auto row = mdp.kernel(s, a);
  const double u = rng.uniform();
  double cumulative = 0.0;
  for (const auto& t : row) {
    cumulative += t.prob;
    if (u < cumulative) {
      return t.next;
    }
  }
  // Rounding can leave u above the final cumulative sum.
  return row.back().next;
}

std::vector<State> support(const TabularMdp& mdp, State s, Action a) {
  std::vector<State> out;
  for (const auto& t : mdp.kernel(s, a)) {
    if (t.prob > 0.0) {
      out.push_back(t.next);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

SafetySpec::SafetySpec(std::vector<double> margin) : margin_(std::move(margin)) {
  if (margin_.empty()) {
    throw SpecError("SafetySpec: empty margin table");
  }
  for (State s = 0; s < margin_.size(); ++s) {
    if (std::isnan(margin_[s])) {
      throw SpecError("SafetySpec: margin is NaN at state " + std::to_string(s));
    }
    if (margin_[s] < 0.0) {
      failure_set_.push_back(s);
    }
  }
  if (failure_set_.size() == margin_.size()) {
    throw SpecError("SafetySpec: every state is a failure state");
  }
}

void require_matching(const TabularMdp& mdp, const SafetySpec& spec) {
  if (spec.n_states() != mdp.n_states()) {
    throw SpecError("SafetySpec covers " + std::to_string(spec.n_states()) +
                    " states but the MDP has " + std::to_string(mdp.n_states()));
  }
}

TabularPolicy::TabularPolicy(std::size_t n_states, std::size_t n_actions,
                             std::vector<double> probs)
    : n_states_(n_states), n_actions_(n_actions), probs_(std::move(probs)) {
  if (probs_.size() != n_states_ * n_actions_) {
    throw SpecError("TabularPolicy: table size does not match dimensions");
  }
  for (State s = 0; s < n_states_; ++s) {
    double sum = 0.0;
    for (double p : row(s)) {
      if (!(p >= 0.0)) {
        throw SpecError("TabularPolicy: negative or NaN mass at state " + std::to_string(s));
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      throw SpecError("TabularPolicy: row " + std::to_string(s) + " does not sum to 1");
    }
  }
}

TabularPolicy TabularPolicy::deterministic(std::size_t n_actions,
                                           const std::vector<Action>& actions) {
  std::vector<double> probs(actions.size() * n_actions, 0.0);
  for (State s = 0; s < actions.size(); ++s) {
    if (actions[s] >= n_actions) {
      throw IndexError("deterministic policy: action out of range at state " +
                       std::to_string(s));
    }
    probs[s * n_actions + actions[s]] = 1.0;
  }
  return TabularPolicy(actions.size(), n_actions, std::move(probs));
}

TabularPolicy TabularPolicy::uniform(std::size_t n_states, std::size_t n_actions) {
  return TabularPolicy(n_states, n_actions,
                       std::vector<double>(n_states * n_actions, 1.0 / n_actions));
}

std::span<const double> TabularPolicy::row(State s) const {
  return std::span<const double>(probs_).subspan(s * n_actions_, n_actions_);
}

std::vector<Action> TabularPolicy::support(State s) const {
  std::vector<Action> out;
  const auto r = row(s);
  for (Action a = 0; a < n_actions_; ++a) {
    if (r[a] > 0.0) {
      out.push_back(a);
    }
  }
  return out;
}

bool TabularPolicy::is_deterministic() const {
  for (State s = 0; s < n_states_; ++s) {
    if (support(s).size() != 1) {
      return false;
    }
  }
  return true;
}

Action TabularPolicy::mode(State s) const {
  const auto r = row(s);
  return static_cast<Action>(std::max_element(r.begin(), r.end()) - r.begin());
}

Action TabularPolicy::sample(State s, RngStream& rng) const {
  const auto r = row(s);
  const double u = rng.uniform();
  double cumulative = 0.0;
  Action last = 0;
  for (Action a = 0; a < n_actions_; ++a) {
    if (r[a] <= 0.0) {
      continue;
    }
    cumulative += r[a];
    last = a;
    if (u < cumulative) {
      return a;
    }
  }
  return last;
}

QTable::QTable(std::size_t n_states, std::size_t n_actions, std::vector<double> values)
    : n_states_(n_states), n_actions_(n_actions), values_(std::move(values)) {
  if (values_.size() != n_states_ * n_actions_) {
    throw SpecError("QTable: table size does not match dimensions");
  }
}

std::span<const double> QTable::row(State s) const {
  return std::span<const double>(values_).subspan(s * n_actions_, n_actions_);
}

Action QTable::greedy(State s) const {
  const auto r = row(s);
  return static_cast<Action>(std::max_element(r.begin(), r.end()) - r.begin());
}

double QTable::max(State s) const {
  const auto r = row(s);
  return *std::max_element(r.begin(), r.end());
}

}  // namespace safefilter
