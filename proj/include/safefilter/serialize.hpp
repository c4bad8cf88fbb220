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

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "safefilter/filter.hpp"
#include "safefilter/invariance.hpp"
#include "safefilter/mdp.hpp"

namespace safefilter {

// JSON layouts (all indices zero-based):
//   MDP file   {"n_states", "n_actions", "discount", "rewards": [[r(s,a)]...],
//               "kernel": [[[[s', p], ...] per action] per state], "margin": [g(s)] (optional)}
//   policy     {"n_states", "n_actions", "probs": [[pi(a|s)]...]}
//   Q table    {"n_states", "n_actions", "q": [[Q(s,a)]...]}
//   invariance {"safety_value", "omega_star", "safe_actions", "fallback": [action per state]}
//   filter     {"omega_star", "safe_actions", "override_rule": [[phi(s,a)] or [] per state],
//               "safety_value"}
// Doubles are written with round-trip precision, so reading back reproduces every bit.

using Json = nlohmann::json;

Json to_json(const TabularMdp& mdp, const SafetySpec* spec = nullptr);
Json to_json(const SafetySpec& spec);
Json to_json(const TabularPolicy& policy);
Json to_json(const QTable& q);
Json to_json(const InvarianceResult& inv);
Json to_json(const SafetyFilter& filter);

/// Reads an MDP file; throws SpecError on a malformed document.
TabularMdp mdp_from_json(const Json& j);
/// The "margin" entry of an MDP file, if present.
std::optional<SafetySpec> spec_from_mdp_json(const Json& j);
SafetySpec spec_from_json(const Json& j);
TabularPolicy policy_from_json(const Json& j);
QTable q_table_from_json(const Json& j);
InvarianceResult invariance_from_json(const Json& j);
/// Rebuilds the filter on top of an invariance result (the filter layout does not repeat the
/// fallback). Throws SpecError if the stored Omega* or safe actions disagree with `inv`.
SafetyFilter filter_from_json(const Json& j, const InvarianceResult& inv);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

}  // namespace safefilter
