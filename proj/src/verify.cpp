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

#include "safefilter/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "safefilter/errors.hpp"
#include "safefilter/linear_solve.hpp"
#include "safefilter/serialize.hpp"

namespace safefilter {

const char* to_string(CheckStatus status) {
  switch (status) {
    case CheckStatus::kPass:
      return "pass";
    case CheckStatus::kFail:
      return "fail";
    case CheckStatus::kSkipped:
      return "skipped";
  }
  return "unknown";
}

bool VerificationReport::passed() const { return count(CheckStatus::kFail) == 0; }

void VerificationReport::append(const VerificationReport& other) {
  checks.insert(checks.end(), other.checks.begin(), other.checks.end());
}

std::size_t VerificationReport::count(CheckStatus status) const {
  return static_cast<std::size_t>(std::count_if(
      checks.begin(), checks.end(), [&](const CheckResult& c) { return c.status == status; }));
}

nlohmann::json VerificationReport::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& c : checks) {
    nlohmann::json entry{{"name", c.name},
                         {"status", safefilter::to_string(c.status)},
                         {"max_deviation", c.max_deviation},
                         {"detail", c.detail}};
    if (c.status == CheckStatus::kFail) {
      entry["counterexample"] = c.counterexample;
    }
    list.push_back(std::move(entry));
  }
  return nlohmann::json{{"passed", passed()},
                        {"n_pass", count(CheckStatus::kPass)},
                        {"n_fail", count(CheckStatus::kFail)},
                        {"n_skipped", count(CheckStatus::kSkipped)},
                        {"checks", std::move(list)}};
}

std::string VerificationReport::summary() const {
  std::ostringstream out;
  out.precision(6);
  for (const auto& c : checks) {
    out << '[' << safefilter::to_string(c.status) << "] " << c.name;
    if (c.status != CheckStatus::kSkipped) {
      out << "  (max deviation " << c.max_deviation << ')';
    }
    if (!c.detail.empty()) {
      out << "  " << c.detail;
    }
    out << '\n';
  }
  out << count(CheckStatus::kPass) << " passed, " << count(CheckStatus::kFail) << " failed, "
      << count(CheckStatus::kSkipped) << " skipped\n";
  return out.str();
}

namespace {

using Chain = std::vector<std::vector<Transition>>;

std::vector<char> failure_mask(const SafetySpec& spec) {
  std::vector<char> mask(spec.n_states(), 0);
  for (State s : spec.failure_set()) {
    mask[s] = 1;
  }
  return mask;
}

/// Hitting probabilities of the failure states in a Markov chain.
std::vector<double> hitting_on_chain(const Chain& chain, const std::vector<char>& failure) {
  const std::size_t n = chain.size();
  std::vector<std::vector<State>> predecessors(n);
  for (State s = 0; s < n; ++s) {
    for (const auto& t : chain[s]) {
      predecessors[t.next].push_back(s);
    }
  }
  std::vector<char> reaches(n, 0);
  std::vector<State> stack;
  for (State s = 0; s < n; ++s) {
    if (failure[s]) {
      reaches[s] = 1;
      stack.push_back(s);
    }
  }
  while (!stack.empty()) {
    const State s = stack.back();
    stack.pop_back();
    for (State p : predecessors[s]) {
      if (!reaches[p] && !failure[p]) {
        reaches[p] = 1;
        stack.push_back(p);
      }
    }
  }

  std::vector<double> h(n, 0.0);
  std::vector<std::size_t> index(n, n);
  std::vector<State> transient;
  for (State s = 0; s < n; ++s) {
    if (failure[s]) {
      h[s] = 1.0;
    } else if (reaches[s]) {
      index[s] = transient.size();
      transient.push_back(s);
    }
  }
  const std::size_t m = transient.size();
  if (m == 0) {
    return h;
  }
  // (I - Q) x = b, Q the chain restricted to transient states that reach F, b the one-step
  // mass into F. States that cannot reach F contribute 0.
  std::vector<double> a(m * m, 0.0);
  std::vector<double> b(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    a[i * m + i] = 1.0;
    for (const auto& t : chain[transient[i]]) {
      if (failure[t.next]) {
        b[i] += t.prob;
      } else if (index[t.next] < n) {
        a[i * m + index[t.next]] -= t.prob;
      }
    }
  }
  auto x = solve_dense(a, b);
  std::vector<double> residual(m);
  double worst = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double r = b[i];
    for (std::size_t j = 0; j < m; ++j) {
      r -= a[i * m + j] * x[j];
    }
    residual[i] = r;
    worst = std::max(worst, std::abs(r));
  }
  if (worst > 1e-12) {
    const auto correction = solve_dense(a, residual);
    for (std::size_t i = 0; i < m; ++i) {
      x[i] += correction[i];
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    h[transient[i]] = std::clamp(x[i], 0.0, 1.0);
  }
  return h;
}

Chain induced_chain(const TabularMdp& mdp, const TabularPolicy& policy) {
  Chain chain(mdp.n_states());
  for (State s = 0; s < mdp.n_states(); ++s) {
    std::map<State, double> mass;
    for (Action a = 0; a < mdp.n_actions(); ++a) {
      const double p = policy.prob(s, a);
      if (p <= 0.0) {
        continue;
      }
      for (const auto& t : mdp.kernel(s, a)) {
        mass[t.next] += p * t.prob;
      }
    }
    for (const auto& [next, prob] : mass) {
      chain[s].push_back({next, prob});
    }
  }
  return chain;
}

Chain deterministic_chain(const TabularMdp& mdp, const std::vector<Action>& actions) {
  Chain chain(mdp.n_states());
  for (State s = 0; s < mdp.n_states(); ++s) {
    const auto row = mdp.kernel(s, actions[s]);
    chain[s].assign(row.begin(), row.end());
  }
  return chain;
}

nlohmann::json instance_json(const TabularMdp& mdp, const SafetySpec& spec) {
  return nlohmann::json{{"mdp", to_json(mdp, &spec)}};
}

CheckResult fail(std::string name, std::string detail, nlohmann::json counterexample,
                 double deviation = 0.0) {
  return CheckResult{std::move(name), CheckStatus::kFail, deviation, std::move(detail),
                     std::move(counterexample)};
}

/// Calls visit(actions) for every deterministic policy over the non-failure states (failure
/// states play action 0). Stops early when visit returns false.
template <typename Visit>
void enumerate_policies(const TabularMdp& mdp, const std::vector<char>& failure, Visit visit) {
  std::vector<State> free;
  for (State s = 0; s < mdp.n_states(); ++s) {
    if (!failure[s]) {
      free.push_back(s);
    }
  }
  std::vector<Action> actions(mdp.n_states(), 0);
  while (true) {
    if (!visit(actions)) {
      return;
    }
    std::size_t i = 0;
    for (; i < free.size(); ++i) {
      if (++actions[free[i]] < mdp.n_actions()) {
        break;
      }
      actions[free[i]] = 0;
    }
    if (i == free.size()) {
      return;
    }
  }
}

bool over_cap(const TabularMdp& mdp, double cap) {
  return std::pow(static_cast<double>(mdp.n_actions()), static_cast<double>(mdp.n_states())) >
         cap;
}

CheckResult skipped(std::string name, const TabularMdp& mdp, double cap) {
  std::ostringstream detail;
  detail << "n_actions^n_states = " << mdp.n_actions() << '^' << mdp.n_states()
         << " exceeds the enumeration cap " << cap;
  return CheckResult{std::move(name), CheckStatus::kSkipped, 0.0, detail.str(), {}};
}

}  // namespace

std::vector<double> hitting_probabilities(const TabularMdp& mdp, const SafetySpec& spec,
                                          const TabularPolicy& policy) {
  require_matching(mdp, spec);
  if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions()) {
    throw SpecError("policy dimensions do not match the MDP");
  }
  return hitting_on_chain(induced_chain(mdp, policy), failure_mask(spec));
}

double violation_probability(const TabularMdp& mdp, const SafetySpec& spec,
                             const TabularPolicy& policy, State s0) {
  mdp.check_state(s0);
  return hitting_probabilities(mdp, spec, policy)[s0];
}

std::vector<State> omega_star_oracle(const TabularMdp& mdp, const SafetySpec& spec) {
  require_matching(mdp, spec);
  const std::size_t n = mdp.n_states();
  std::vector<char> alive(n, 0);
  for (State s = 0; s < n; ++s) {
    alive[s] = spec.margin()[s] < 0.0 ? 0 : 1;
  }
  bool removed = true;
  while (removed) {
    removed = false;
    for (State s = 0; s < n; ++s) {
      if (!alive[s]) {
        continue;
      }
      bool has_staying_action = false;
      for (Action a = 0; a < mdp.n_actions() && !has_staying_action; ++a) {
        bool stays = true;
        for (const auto& t : mdp.kernel(s, a)) {
          if (t.prob > 0.0 && !alive[t.next]) {
            stays = false;
            break;
          }
        }
        has_staying_action = stays;
      }
      if (!has_staying_action) {
        alive[s] = 0;
        removed = true;
      }
    }
  }
  std::vector<State> out;
  for (State s = 0; s < n; ++s) {
    if (alive[s]) {
      out.push_back(s);
    }
  }
  return out;
}

CheckResult check_lemma1(const TabularMdp& mdp, const SafetySpec& spec,
                         const InvarianceResult& inv, const EnumerationOptions& options) {
  const std::string name = "enumeration/no-safe-policy-outside-safe-set";
  if (over_cap(mdp, options.cap)) {
    return skipped(name, mdp, options.cap);
  }
  const auto failure = failure_mask(spec);
  std::vector<State> outside;
  for (State s = 0; s < mdp.n_states(); ++s) {
    if (!failure[s] && !inv.contains(s)) {
      outside.push_back(s);
    }
  }
  if (outside.empty()) {
    return CheckResult{name, CheckStatus::kPass, 0.0, "vacuous: safe set covers every non-failure state", {}};
  }
  double min_probability = 1.0;
  std::size_t policies = 0;
  std::optional<CheckResult> failure_result;
  enumerate_policies(mdp, failure, [&](const std::vector<Action>& actions) {
    ++policies;
    const auto h = hitting_on_chain(deterministic_chain(mdp, actions), failure);
    for (State s : outside) {
      min_probability = std::min(min_probability, h[s]);
      if (h[s] <= options.threshold) {
        auto ce = instance_json(mdp, spec);
        ce["state"] = s;
        ce["policy"] = actions;
        ce["violation_probability"] = h[s];
        failure_result = fail(name,
                              "a deterministic policy stays safe from state " + std::to_string(s) +
                                  " outside the safe set",
                              std::move(ce), h[s]);
        return false;
      }
    }
    return true;
  });
  if (failure_result) {
    return *failure_result;
  }
  return CheckResult{name, CheckStatus::kPass, min_probability,
                     "max deviation = smallest violation probability over " +
                         std::to_string(policies) + " policies and " +
                         std::to_string(outside.size()) + " states",
                     {}};
}

CheckResult check_prop1(const TabularMdp& mdp, const SafetySpec& spec,
                        const InvarianceResult& inv, const EnumerationOptions& options) {
  const std::string name = "enumeration/admissible-set-is-exactly-the-safe-policies";
  if (over_cap(mdp, options.cap)) {
    return skipped(name, mdp, options.cap);
  }
  const auto failure = failure_mask(spec);
  for (State s : inv.omega_star) {
    if (failure[s]) {
      auto ce = instance_json(mdp, spec);
      ce["state"] = s;
      return fail(name, "safe set contains failure state " + std::to_string(s), std::move(ce));
    }
    if (inv.safe_actions[s].empty()) {
      auto ce = instance_json(mdp, spec);
      ce["state"] = s;
      return fail(name, "safe set state " + std::to_string(s) + " has no safe action",
                  std::move(ce));
    }
  }
  double max_admissible = 0.0;
  std::size_t admissible_count = 0;
  std::size_t other_count = 0;
  std::optional<CheckResult> failure_result;
  enumerate_policies(mdp, failure, [&](const std::vector<Action>& actions) {
    bool admissible = true;
    for (State s : inv.omega_star) {
      if (!inv.is_safe_action(s, actions[s])) {
        admissible = false;
        break;
      }
    }
    const auto h = hitting_on_chain(deterministic_chain(mdp, actions), failure);
    double worst = 0.0;
    State worst_state = 0;
    for (State s : inv.omega_star) {
      if (h[s] > worst) {
        worst = h[s];
        worst_state = s;
      }
    }
    auto ce = [&]() {
      auto j = instance_json(mdp, spec);
      j["policy"] = actions;
      j["state"] = worst_state;
      j["violation_probability"] = worst;
      return j;
    };
    if (admissible) {
      ++admissible_count;
      max_admissible = std::max(max_admissible, worst);
      if (worst > options.threshold) {
        failure_result = fail(name, "an admissible policy violates from state " +
                                        std::to_string(worst_state),
                              ce(), worst);
        return false;
      }
    } else {
      ++other_count;
      if (worst <= options.threshold) {
        failure_result = fail(name, "a non-admissible policy never violates from the safe set",
                              ce(), worst);
        return false;
      }
    }
    return true;
  });
  if (failure_result) {
    return *failure_result;
  }
  return CheckResult{name, CheckStatus::kPass, max_admissible,
                     "max deviation = largest violation probability of an admissible policy; " +
                         std::to_string(admissible_count) + " admissible, " +
                         std::to_string(other_count) + " non-admissible policies",
                     {}};
}

CheckResult check_filter(const TabularMdp& mdp, const SafetySpec& spec,
                         const SafetyFilter& filter) {
  const std::string name = "filter/perfect-filter-clauses";
  const auto oracle = omega_star_oracle(mdp, spec);
  const auto& inv = filter.invariance();
  if (inv.omega_star != oracle) {
    auto ce = instance_json(mdp, spec);
    ce["filter"] = to_json(filter);
    ce["oracle_omega_star"] = oracle;
    return fail(name, "filter domain differs from the maximal invariant set", std::move(ce));
  }
  std::vector<char> inside(mdp.n_states(), 0);
  for (State s : oracle) {
    inside[s] = 1;
  }
  const auto stays = [&](State s, Action a) {
    const auto row = mdp.kernel(s, a);
    return std::all_of(row.begin(), row.end(),
                       [&](const Transition& t) { return inside[t.next] != 0; });
  };
  for (State s : oracle) {
    for (Action a = 0; a < mdp.n_actions(); ++a) {
      const Action b = filter.apply(s, a);
      if (!stays(s, b) || (stays(s, a) && b != a)) {
        auto ce = instance_json(mdp, spec);
        ce["filter"] = to_json(filter);
        ce["state"] = s;
        ce["action"] = a;
        return fail(name,
                    std::string(stays(s, b) ? "safe action overridden"
                                            : "filtered action leaves the safe set") +
                        " at (" + std::to_string(s) + "," + std::to_string(a) + ")",
                    std::move(ce), 1.0);
      }
    }
  }
  const auto executed =
      pushforward_policy(TabularPolicy::uniform(mdp.n_states(), mdp.n_actions()), filter);
  const auto h = hitting_probabilities(mdp, spec, executed);
  double worst = 0.0;
  for (State s : oracle) {
    worst = std::max(worst, h[s]);
  }
  if (worst > 0.0) {
    auto ce = instance_json(mdp, spec);
    ce["filter"] = to_json(filter);
    return fail(name, "filtered uniform policy violates with positive probability",
                std::move(ce), worst);
  }
  return CheckResult{name, CheckStatus::kPass, worst,
                     "max deviation = violation probability of the filtered uniform policy",
                     {}};
}

CheckResult check_oracle_agreement(const TabularMdp& mdp, const SafetySpec& spec,
                                   const InvarianceResult& inv) {
  const std::string name = "invariance/oracle-agreement";
  const auto oracle = omega_star_oracle(mdp, spec);
  if (oracle != inv.omega_star) {
    auto ce = instance_json(mdp, spec);
    ce["omega_star"] = inv.omega_star;
    ce["oracle_omega_star"] = oracle;
    return fail(name, "safe sets differ", std::move(ce), 1.0);
  }
  return CheckResult{name, CheckStatus::kPass, 0.0, "", {}};
}

CheckResult check_maximality(const TabularMdp& mdp, const SafetySpec& spec,
                             const InvarianceResult& inv) {
  const std::string name = "invariance/maximality";
  for (State x = 0; x < mdp.n_states(); ++x) {
    if (spec.is_failure(x) || inv.contains(x)) {
      continue;
    }
    auto enlarged = inv.omega_star;
    enlarged.insert(std::upper_bound(enlarged.begin(), enlarged.end(), x), x);
    const auto safe = safe_actions_for(mdp, enlarged);
    const bool invariant = std::all_of(enlarged.begin(), enlarged.end(),
                                       [&](State s) { return !safe[s].empty(); });
    if (invariant) {
      auto ce = instance_json(mdp, spec);
      ce["omega_star"] = inv.omega_star;
      ce["state"] = x;
      return fail(name, "adding state " + std::to_string(x) + " keeps the set invariant",
                  std::move(ce), 1.0);
    }
  }
  return CheckResult{name, CheckStatus::kPass, 0.0, "", {}};
}

CheckResult check_value_equality(const TabularMdp& mdp, const InvarianceResult& inv,
                                 double tol) {
  const std::string name = "values/filtered-equals-constrained";
  const auto filter = build_perfect_filter(inv);
  const FilteredMdp fmdp(mdp, filter);
  const auto filtered = value_iteration(fmdp, tol);
  const auto constrained = constrained_value_iteration(mdp, inv, tol);
  double worst = 0.0;
  for (State s : inv.omega_star) {
    worst = std::max(worst, std::abs(filtered[s] - constrained[s]));
  }
  if (worst > 2.0 * tol) {
    return fail(name, "value gap exceeds 2 tol", nlohmann::json{{"mdp", to_json(mdp)}}, worst);
  }
  return CheckResult{name, CheckStatus::kPass, worst, "max deviation = sup-norm gap on the safe set", {}};
}

CheckResult check_theorem1(const TabularMdp& mdp, const SafetySpec& spec,
                           const std::vector<std::uint64_t>& seeds,
                           const LearningSchedule& sched, const Theorem1Options& options) {
  const std::string name = "learning/safe-convergent-near-optimal";
  const auto inv = maximal_invariant_set(mdp, spec);
  if (inv.empty()) {
    return fail(name, "empty safe set", instance_json(mdp, spec));
  }
  const SafetyFilter filter =
      options.filter_override ? *options.filter_override : build_perfect_filter(inv);
  const FilteredMdp fmdp(mdp, filter);
  const double q_tolerance =
      options.q_tolerance >= 0.0 ? options.q_tolerance : 0.01 * mdp.value_bound();
  const auto q_star = q_values(fmdp, value_iteration(fmdp, options.tol));
  const auto v_sc = constrained_value_iteration(mdp, inv, options.tol);

  double worst_q = 0.0;
  double worst_gap = -std::numeric_limits<double>::infinity();
  for (std::uint64_t seed : seeds) {
    const auto counterexample = [&](const std::string& part) {
      auto ce = instance_json(mdp, spec);
      ce["seed"] = seed;
      ce["part"] = part;
      return ce;
    };
    RngStream rng(seed);
    QLearningResult run{QTable(1, 1), EpsOptimalPolicy{TabularPolicy::uniform(1, 1), 0.0}, {}};
    try {
      run = q_learning(fmdp, spec, sched, rng, options.training);
    } catch (const OutOfEnvelopeError& e) {
      return fail(name, std::string("part 1: training left the safe set: ") + e.what(),
                  counterexample("safe learning"));
    }
    const auto violations = run.log.empty() ? 0 : run.log.back().cumulative_violations;
    if (violations != 0) {
      return fail(name,
                  "part 1: " + std::to_string(violations) + " failure-set entries with seed " +
                      std::to_string(seed),
                  counterexample("safe learning"), static_cast<double>(violations));
    }
    double q_error = 0.0;
    for (State s : inv.omega_star) {
      for (Action a = 0; a < mdp.n_actions(); ++a) {
        q_error = std::max(q_error, std::abs(run.q(s, a) - q_star(s, a)));
      }
    }
    worst_q = std::max(worst_q, q_error);
    if (q_error > q_tolerance) {
      return fail(name,
                  "part 2: ||Q - Q*|| = " + std::to_string(q_error) + " with seed " +
                      std::to_string(seed),
                  counterexample("convergence"), q_error);
    }
    const auto executed = pushforward_policy(run.policy.policy, filter);
    if (!is_admissible(executed, inv)) {
      return fail(name, "part 3: executed policy is not admissible",
                  counterexample("optimality"));
    }
    const auto v_exec = policy_value(mdp, executed, options.tol);
    for (State s : inv.omega_star) {
      const double gap = v_sc[s] - run.policy.epsilon_bound - 2.0 * options.tol - v_exec[s];
      worst_gap = std::max(worst_gap, gap);
      if (gap > 0.0) {
        auto ce = counterexample("optimality");
        ce["state"] = s;
        return fail(name, "part 3: executed value below V*_SC - eps at state " +
                              std::to_string(s),
                    std::move(ce), gap);
      }
    }
  }
  std::ostringstream detail;
  detail << seeds.size() << " seeds, max ||Q - Q*|| = " << worst_q << " (bound " << q_tolerance
         << ")";
  return CheckResult{name, CheckStatus::kPass, worst_q, detail.str(), {}};
}

CheckResult check_monitor_agreement(const TabularMdp& mdp, const SafetySpec& spec,
                                    const InvarianceResult& inv, const RolloutMonitorConfig& cfg,
                                    bool exact) {
  const std::string name =
      exact ? "monitors/rollout-equals-value" : "monitors/rollout-implies-value";
  const RolloutMonitor rollout(mdp, spec, cfg);
  std::size_t accepted = 0;
  std::size_t pairs = 0;
  for (State s : inv.omega_star) {
    for (Action a = 0; a < mdp.n_actions(); ++a) {
      const bool by_rollout = rollout.check(s, a);
      const bool by_value = value_monitor(inv, mdp, s, a);
      ++pairs;
      accepted += by_rollout ? 1 : 0;
      const bool bad = exact ? by_rollout != by_value : (by_rollout && !by_value);
      if (bad) {
        auto ce = instance_json(mdp, spec);
        ce["state"] = s;
        ce["action"] = a;
        ce["horizon"] = cfg.horizon;
        return fail(name,
                    "monitors disagree at (" + std::to_string(s) + "," + std::to_string(a) + ")",
                    std::move(ce), 1.0);
      }
    }
  }
  return CheckResult{name, CheckStatus::kPass, 0.0,
                     "horizon " + std::to_string(cfg.horizon) + ", rollout accepts " +
                         std::to_string(accepted) + " of " + std::to_string(pairs) + " pairs",
                     {}};
}

Environment random_mdp(RngStream& rng, const RandomMdpOptions& options) {
  const auto pick = [&](std::size_t lo, std::size_t hi) {
    return lo + rng.uniform_index(hi - lo + 1);
  };
  while (true) {
    std::size_t n = 0;
    std::size_t m = 0;
    do {
      n = pick(options.min_states, options.max_states);
      m = pick(options.min_actions, options.max_actions);
    } while (options.max_policy_count > 0.0 &&
             std::pow(static_cast<double>(m), static_cast<double>(n)) > options.max_policy_count);

    std::vector<std::vector<Transition>> kernel(n * m);
    std::vector<double> rewards(n * m);
    for (std::size_t row = 0; row < n * m; ++row) {
      const std::size_t k = pick(1, std::min(options.max_support, n));
      std::vector<State> states(n);
      for (State s = 0; s < n; ++s) {
        states[s] = s;
      }
      // Partial Fisher-Yates for k distinct successors.
      for (std::size_t i = 0; i < k; ++i) {
        std::swap(states[i], states[i + rng.uniform_index(n - i)]);
      }
      std::vector<double> weights(k);
      double total = 0.0;
      for (auto& w : weights) {
        w = 0.05 + rng.uniform();
        total += w;
      }
      double assigned = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        const double p = i + 1 == k ? 1.0 - assigned : weights[i] / total;
        assigned += p;
        kernel[row].push_back({states[i], p});
      }
      std::sort(kernel[row].begin(), kernel[row].end(),
                [](const Transition& l, const Transition& r) { return l.next < r.next; });
      rewards[row] = 2.0 * rng.uniform() - 1.0;
    }
    const double discount =
        options.min_discount + (options.max_discount - options.min_discount) * rng.uniform();

    const std::size_t n_fail = pick(1, std::max<std::size_t>(1, n / 2));
    std::vector<State> order(n);
    for (State s = 0; s < n; ++s) {
      order[s] = s;
    }
    for (std::size_t i = 0; i < n_fail; ++i) {
      std::swap(order[i], order[i + rng.uniform_index(n - i)]);
    }
    std::vector<double> margin(n);
    for (State s = 0; s < n; ++s) {
      margin[s] = rng.uniform_index(5) == 0 ? 0.0 : 0.1 + 0.9 * rng.uniform();
    }
    for (std::size_t i = 0; i < n_fail; ++i) {
      margin[order[i]] = -(0.1 + 0.9 * rng.uniform());
    }
    if (n_fail == n) {
      continue;
    }
    Environment env{"random", TabularMdp(n, m, std::move(kernel), std::move(rewards), discount),
                    SafetySpec(std::move(margin)), std::nullopt};
    if (options.require_nonempty_safe_set && omega_star_oracle(env.mdp, env.spec).empty()) {
      continue;
    }
    return env;
  }
}

std::optional<InvarianceResult> mutate_enlarged_omega(const TabularMdp& mdp,
                                                      const SafetySpec& spec,
                                                      const InvarianceResult& inv) {
  for (State x = 0; x < mdp.n_states(); ++x) {
    if (spec.is_failure(x) || inv.contains(x)) {
      continue;
    }
    InvarianceResult mutant = inv;
    mutant.omega_star.insert(std::upper_bound(mutant.omega_star.begin(), mutant.omega_star.end(), x),
                             x);
    mutant.safety_value[x] = 0.0;
    std::vector<Action> one_step;
    for (Action a = 0; a < mdp.n_actions(); ++a) {
      const auto row = mdp.kernel(x, a);
      if (std::none_of(row.begin(), row.end(),
                       [&](const Transition& t) { return spec.is_failure(t.next); })) {
        one_step.push_back(a);
      }
    }
    if (one_step.empty()) {
      for (Action a = 0; a < mdp.n_actions(); ++a) {
        one_step.push_back(a);
      }
    }
    mutant.safe_actions[x] = one_step;
    std::vector<Action> fallback(mdp.n_states());
    for (State s = 0; s < mdp.n_states(); ++s) {
      fallback[s] = inv.fallback.mode(s);
    }
    fallback[x] = one_step.front();
    mutant.fallback = TabularPolicy::deterministic(mdp.n_actions(), fallback);
    return mutant;
  }
  return std::nullopt;
}

std::optional<SafetyFilter> mutate_filter_unsafe(const SafetyFilter& filter) {
  const auto& inv = filter.invariance();
  for (State s : inv.omega_star) {
    for (Action a = 0; a < inv.n_actions(); ++a) {
      if (!inv.is_safe_action(s, a)) {
        auto rule = filter.override_rule();
        rule[s][a] = a;
        return SafetyFilter(inv, std::move(rule));
      }
    }
  }
  return std::nullopt;
}

std::optional<SafetyFilter> mutate_filter_restrictive(const SafetyFilter& filter) {
  const auto& inv = filter.invariance();
  for (State s : inv.omega_star) {
    const auto& safe = inv.safe_actions[s];
    if (safe.size() >= 2) {
      auto rule = filter.override_rule();
      rule[s][safe[1]] = safe[0];
      return SafetyFilter(inv, std::move(rule));
    }
  }
  return std::nullopt;
}

namespace {

/// Folds per-instance results into one line: fails on the first failure, skipped when every
/// instance was skipped.
CheckResult aggregate(const std::string& name, const std::vector<CheckResult>& results) {
  CheckResult out{name, CheckStatus::kPass, 0.0, "", {}};
  std::size_t passed = 0;
  std::size_t skipped_count = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    if (r.status == CheckStatus::kSkipped) {
      ++skipped_count;
      continue;
    }
    out.max_deviation = std::max(out.max_deviation, r.max_deviation);
    if (r.status == CheckStatus::kFail && out.status != CheckStatus::kFail) {
      out.status = CheckStatus::kFail;
      out.counterexample = r.counterexample;
      out.counterexample["instance"] = i;
      out.detail = "instance " + std::to_string(i) + ": " + r.detail + "; ";
    } else if (r.status == CheckStatus::kPass) {
      ++passed;
    }
  }
  if (!results.empty() && skipped_count == results.size()) {
    out.status = CheckStatus::kSkipped;
  }
  out.detail += std::to_string(passed) + "/" + std::to_string(results.size()) + " passed, " +
                std::to_string(skipped_count) + " skipped";
  return out;
}

struct Subject {
  InvarianceResult inv;
  SafetyFilter filter;
};

/// Synthesized invariance result and filter, with the requested mutant swapped in where one
/// exists for this instance.
Subject subject_for(const TabularMdp& mdp, const SafetySpec& spec, Mutant inject) {
  auto inv = maximal_invariant_set(mdp, spec);
  SafetyFilter filter = build_perfect_filter(inv);
  switch (inject) {
    case Mutant::kNone:
      break;
    case Mutant::kEnlargedOmega:
      if (auto m = mutate_enlarged_omega(mdp, spec, inv)) {
        inv = *m;
        std::vector<std::vector<Action>> rule(inv.n_states());
        for (State s : inv.omega_star) {
          rule[s] = filter.invariance().contains(s) ? filter.override_rule()[s]
                                                    : std::vector<Action>(inv.n_actions(), inv.fallback.mode(s));
        }
        filter = SafetyFilter(inv, std::move(rule));
      }
      break;
    case Mutant::kUnsafeFilter:
      if (auto m = mutate_filter_unsafe(filter)) {
        filter = *m;
      }
      break;
    case Mutant::kRestrictiveFilter:
      if (auto m = mutate_filter_restrictive(filter)) {
        filter = *m;
      }
      break;
  }
  return Subject{std::move(inv), std::move(filter)};
}

VerificationReport fixture_checks(const Environment& env, Mutant inject,
                                  const EnumerationOptions& enumeration) {
  VerificationReport report;
  const auto subject = subject_for(env.mdp, env.spec, inject);
  const auto prefix = env.name + ": ";
  const auto tagged = [&](CheckResult r) {
    r.name = prefix + r.name;
    return r;
  };
  report.add(tagged(check_oracle_agreement(env.mdp, env.spec, subject.inv)));
  report.add(tagged(check_maximality(env.mdp, env.spec, subject.inv)));
  report.add(tagged(check_lemma1(env.mdp, env.spec, subject.inv, enumeration)));
  report.add(tagged(check_prop1(env.mdp, env.spec, subject.inv, enumeration)));
  report.add(tagged(check_filter(env.mdp, env.spec, subject.filter)));
  report.add(tagged(check_value_equality(env.mdp, maximal_invariant_set(env.mdp, env.spec))));
  return report;
}

/// Each seeded mutant must be flagged by at least one detector on the given instances.
CheckResult mutation_self_test(const std::vector<Environment>& instances) {
  const std::string name = "mutation/seeded-mutants-detected";
  std::size_t enlarged = 0;
  std::size_t unsafe = 0;
  std::size_t restrictive = 0;
  std::size_t missed = 0;
  nlohmann::json missed_case;
  for (const auto& env : instances) {
    const auto inv = maximal_invariant_set(env.mdp, env.spec);
    if (inv.empty()) {
      continue;
    }
    const auto filter = build_perfect_filter(inv);
    if (auto m = mutate_enlarged_omega(env.mdp, env.spec, inv)) {
      ++enlarged;
      if (check_prop1(env.mdp, env.spec, *m).status != CheckStatus::kFail ||
          check_oracle_agreement(env.mdp, env.spec, *m).status != CheckStatus::kFail) {
        ++missed;
        missed_case = instance_json(env.mdp, env.spec);
        missed_case["mutant"] = "enlarged omega";
      }
    }
    if (auto m = mutate_filter_unsafe(filter)) {
      ++unsafe;
      if (check_filter(env.mdp, env.spec, *m).status != CheckStatus::kFail) {
        ++missed;
        missed_case = instance_json(env.mdp, env.spec);
        missed_case["mutant"] = "unsafe filter";
      }
    }
    if (auto m = mutate_filter_restrictive(filter)) {
      ++restrictive;
      if (check_filter(env.mdp, env.spec, *m).status != CheckStatus::kFail) {
        ++missed;
        missed_case = instance_json(env.mdp, env.spec);
        missed_case["mutant"] = "restrictive filter";
      }
    }
  }
  const std::string detail = std::to_string(enlarged) + " enlarged-set, " +
                             std::to_string(unsafe) + " unsafe-filter, " +
                             std::to_string(restrictive) + " restrictive-filter mutants";
  if (missed > 0 || enlarged == 0 || unsafe == 0 || restrictive == 0) {
    return fail(name, std::to_string(missed) + " undetected; " + detail, missed_case,
                static_cast<double>(missed));
  }
  return CheckResult{name, CheckStatus::kPass, 0.0, detail, {}};
}

}  // namespace

VerificationReport run_default_suite(const SuiteOptions& options) {
  VerificationReport report;
  RngStream master(options.seed);
  const EnumerationOptions enumeration{options.enumeration_policy_cap, 1e-10};

  const auto chain = build_chain3();
  const auto trap = build_trap3();
  report.append(fixture_checks(chain, options.inject, enumeration));
  report.append(fixture_checks(trap, options.inject, enumeration));

  {
    RngStream rng = master.split(1);
    std::vector<CheckResult> agreement;
    std::vector<CheckResult> maximality;
    std::vector<CheckResult> equality;
    std::vector<CheckResult> filters;
    for (std::size_t i = 0; i < options.random_instances; ++i) {
      const auto env = random_mdp(rng);
      const auto subject = subject_for(env.mdp, env.spec, options.inject);
      agreement.push_back(check_oracle_agreement(env.mdp, env.spec, subject.inv));
      maximality.push_back(check_maximality(env.mdp, env.spec, subject.inv));
      equality.push_back(check_value_equality(env.mdp, maximal_invariant_set(env.mdp, env.spec)));
      filters.push_back(check_filter(env.mdp, env.spec, subject.filter));
    }
    report.add(aggregate("random: invariance/oracle-agreement", agreement));
    report.add(aggregate("random: invariance/maximality", maximality));
    report.add(aggregate("random: values/filtered-equals-constrained", equality));
    report.add(aggregate("random: filter/perfect-filter-clauses", filters));
  }

  std::vector<Environment> enumerated;
  {
    RngStream rng = master.split(2);
    RandomMdpOptions small;
    small.max_states = 10;
    small.max_policy_count = options.enumeration_policy_cap;
    std::vector<CheckResult> lemma;
    std::vector<CheckResult> prop;
    for (std::size_t i = 0; i < options.enumeration_instances; ++i) {
      enumerated.push_back(random_mdp(rng, small));
      const auto& env = enumerated.back();
      const auto subject = subject_for(env.mdp, env.spec, options.inject);
      lemma.push_back(check_lemma1(env.mdp, env.spec, subject.inv, enumeration));
      prop.push_back(check_prop1(env.mdp, env.spec, subject.inv, enumeration));
    }
    report.add(aggregate("random: enumeration/no-safe-policy-outside-safe-set", lemma));
    report.add(aggregate("random: enumeration/admissible-set-is-exactly-the-safe-policies", prop));
  }

  {
    std::vector<Environment> mutation_instances{chain, trap};
    for (std::size_t i = 0; i < enumerated.size() && i < 50; ++i) {
      mutation_instances.push_back(enumerated[i]);
    }
    report.add(mutation_self_test(mutation_instances));
  }

  std::vector<Environment> grids;
  std::vector<State> targets;
  for (double slip : {0.0, 0.2}) {
    const std::size_t side = slip > 0.0 ? 8 : 5;
    const auto goal = default_goal_params(side, side, slip);
    grids.push_back(build_grid_goal(goal));
    grids.back().name = "goal" + std::to_string(side) + "x" + std::to_string(side) + " slip " +
                        std::to_string(slip).substr(0, 3);
    targets.push_back(grids.back().grid->state_of(goal.goal));
    GridCircleParams circle;
    circle.width = 6;
    circle.height = 6;
    circle.slip_prob = slip;
    grids.push_back(build_grid_circle(circle));
    grids.back().name = "circle6x6 slip " + std::to_string(slip).substr(0, 3);
    targets.push_back(circle_ring_states(circle).front());
  }
  for (std::size_t i = 0; i < grids.size(); ++i) {
    const auto& env = grids[i];
    report.append(fixture_checks(env, options.inject, enumeration));
    const auto inv = maximal_invariant_set(env.mdp, env.spec);
    const bool deterministic = env.name.find("slip 0.0") != std::string::npos;
    const auto cfg = make_rollout_config(
        env.mdp, inv,
        deterministic ? std::vector<State>{targets[i]} : grid_spawn_states(*env.grid, env.spec),
        env.grid->diameter() + 1);
    auto result = check_monitor_agreement(env.mdp, env.spec, inv, cfg, deterministic);
    result.name = env.name + ": " + result.name;
    report.add(std::move(result));
  }

  LearningSchedule chain_schedule;
  chain_schedule.n_steps = options.chain_steps;
  LearningSchedule grid_schedule;
  grid_schedule.n_steps = options.grid_steps;
  for (const Environment* env : std::initializer_list<const Environment*>{&chain, &grids.front()}) {
    Theorem1Options t1;
    const auto subject = subject_for(env->mdp, env->spec, options.inject);
    if (options.inject == Mutant::kUnsafeFilter) {
      t1.filter_override = subject.filter;
    }
    const auto& schedule = env == &chain ? chain_schedule : grid_schedule;
    auto result = check_theorem1(env->mdp, env->spec, options.training_seeds, schedule, t1);
    result.name = env->name + ": " + result.name;
    report.add(std::move(result));
  }
  return report;
}

}  // namespace safefilter
