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

#include "safefilter/serialize.hpp"

#include <fstream>

#include "safefilter/errors.hpp"

namespace safefilter {

namespace {

template <typename T>
T field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw SpecError(std::string("missing key \"") + key + "\"");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("bad value for \"") + key + "\": " + e.what());
  }
}

Json nested(const std::vector<double>& flat, std::size_t rows, std::size_t cols) {
  Json out = Json::array();
  for (std::size_t r = 0; r < rows; ++r) {
    out.push_back(std::vector<double>(flat.begin() + r * cols, flat.begin() + (r + 1) * cols));
  }
  return out;
}

std::vector<double> flatten(const Json& j, const char* key, std::size_t rows, std::size_t cols) {
  const auto table = field<std::vector<std::vector<double>>>(j, key);
  if (table.size() != rows) {
    throw SpecError(std::string("\"") + key + "\" must have one row per state");
  }
  std::vector<double> flat;
  flat.reserve(rows * cols);
  for (const auto& row : table) {
    if (row.size() != cols) {
      throw SpecError(std::string("\"") + key + "\" rows must have one entry per action");
    }
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return flat;
}

}  // namespace

Json to_json(const TabularMdp& mdp, const SafetySpec* spec) {
  Json kernel = Json::array();
  for (State s = 0; s < mdp.n_states(); ++s) {
    Json per_action = Json::array();
    for (Action a = 0; a < mdp.n_actions(); ++a) {
      Json row = Json::array();
      for (const auto& t : mdp.kernel(s, a)) {
        row.push_back(Json::array({t.next, t.prob}));
      }
      per_action.push_back(std::move(row));
    }
    kernel.push_back(std::move(per_action));
  }
  Json j{{"n_states", mdp.n_states()},
         {"n_actions", mdp.n_actions()},
         {"discount", mdp.discount()},
         {"rewards", nested(mdp.reward_table(), mdp.n_states(), mdp.n_actions())},
         {"kernel", std::move(kernel)}};
  if (spec != nullptr) {
    j["margin"] = spec->margin();
  }
  return j;
}

Json to_json(const SafetySpec& spec) { return Json{{"margin", spec.margin()}}; }

Json to_json(const TabularPolicy& policy) {
  return Json{{"n_states", policy.n_states()},
              {"n_actions", policy.n_actions()},
              {"probs", nested(policy.table(), policy.n_states(), policy.n_actions())}};
}

Json to_json(const QTable& q) {
  return Json{{"n_states", q.n_states()},
              {"n_actions", q.n_actions()},
              {"q", nested(q.table(), q.n_states(), q.n_actions())}};
}

Json to_json(const InvarianceResult& inv) {
  std::vector<Action> fallback(inv.n_states());
  for (State s = 0; s < inv.n_states(); ++s) {
    fallback[s] = inv.fallback.mode(s);
  }
  return Json{{"n_states", inv.n_states()},
              {"n_actions", inv.n_actions()},
              {"safety_value", inv.safety_value},
              {"omega_star", inv.omega_star},
              {"safe_actions", inv.safe_actions},
              {"fallback", fallback}};
}

Json to_json(const SafetyFilter& filter) {
  const auto& inv = filter.invariance();
  return Json{{"omega_star", inv.omega_star},
              {"safe_actions", inv.safe_actions},
              {"override_rule", filter.override_rule()},
              {"safety_value", inv.safety_value}};
}

TabularMdp mdp_from_json(const Json& j) {
  const auto n_states = field<std::size_t>(j, "n_states");
  const auto n_actions = field<std::size_t>(j, "n_actions");
  const auto discount = field<double>(j, "discount");
  auto rewards = flatten(j, "rewards", n_states, n_actions);
  const auto raw = field<std::vector<std::vector<std::vector<std::pair<std::size_t, double>>>>>(
      j, "kernel");
  if (raw.size() != n_states) {
    throw SpecError("\"kernel\" must have one entry per state");
  }
  std::vector<std::vector<Transition>> kernel;
  kernel.reserve(n_states * n_actions);
  for (const auto& per_action : raw) {
    if (per_action.size() != n_actions) {
      throw SpecError("\"kernel\" entries must have one row per action");
    }
    for (const auto& row : per_action) {
      std::vector<Transition> out;
      for (const auto& [next, prob] : row) {
        out.push_back({next, prob});
      }
      kernel.push_back(std::move(out));
    }
  }
  return TabularMdp(n_states, n_actions, std::move(kernel), std::move(rewards), discount);
}

std::optional<SafetySpec> spec_from_mdp_json(const Json& j) {
  if (!j.contains("margin")) {
    return std::nullopt;
  }
  return spec_from_json(j);
}

SafetySpec spec_from_json(const Json& j) {
  return SafetySpec(field<std::vector<double>>(j, "margin"));
}

TabularPolicy policy_from_json(const Json& j) {
  const auto n_states = field<std::size_t>(j, "n_states");
  const auto n_actions = field<std::size_t>(j, "n_actions");
  return TabularPolicy(n_states, n_actions, flatten(j, "probs", n_states, n_actions));
}

QTable q_table_from_json(const Json& j) {
  const auto n_states = field<std::size_t>(j, "n_states");
  const auto n_actions = field<std::size_t>(j, "n_actions");
  return QTable(n_states, n_actions, flatten(j, "q", n_states, n_actions));
}

InvarianceResult invariance_from_json(const Json& j) {
  const auto n_actions = field<std::size_t>(j, "n_actions");
  auto value = field<std::vector<double>>(j, "safety_value");
  auto omega = field<std::vector<State>>(j, "omega_star");
  auto safe = field<std::vector<std::vector<Action>>>(j, "safe_actions");
  const auto fallback = field<std::vector<Action>>(j, "fallback");
  if (safe.size() != value.size() || fallback.size() != value.size()) {
    throw SpecError("invariance tables must have one entry per state");
  }
  return InvarianceResult{std::move(value), std::move(omega), std::move(safe),
                          TabularPolicy::deterministic(n_actions, fallback)};
}

SafetyFilter filter_from_json(const Json& j, const InvarianceResult& inv) {
  if (field<std::vector<State>>(j, "omega_star") != inv.omega_star ||
      field<std::vector<std::vector<Action>>>(j, "safe_actions") != inv.safe_actions) {
    throw SpecError("filter does not match its invariance result");
  }
  return SafetyFilter(inv, field<std::vector<std::vector<Action>>>(j, "override_rule"));
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw SpecError("cannot open " + path);
  }
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SpecError(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) {
    throw SpecError("cannot write " + path);
  }
  out << j.dump(1) << '\n';
}

}  // namespace safefilter
