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

#include "safefilter/envs.hpp"
#include "safefilter/solvers.hpp"

namespace safefilter::harness {

struct EnvConfig {
  /// goal | circle | file | chain3 | trap3
  std::string type = "goal";
  std::size_t width = 5;
  std::size_t height = 5;
  double slip_prob = 0.0;
  /// Unset means the size-dependent default layout; an empty list means no pillars.
  std::optional<std::vector<Cell>> pillars;
  std::optional<Cell> goal;
  double step_reward_scale = 1.0;
  double goal_bonus = 1.0;
  double discount = 0.9;
  double ring_radius = 0.0;
  double tangential_scale = 1.0;
  double off_ring_penalty = 0.1;
  /// MDP JSON file for type = file; must carry a "margin" array.
  std::string path;
};

struct FilterConfig {
  /// none | perfect | value | rollout
  std::string mode = "perfect";
  /// Synthesized filter file to load instead of synthesizing (perfect mode only).
  std::string file;
  double value_margin = 0.0;
  /// Rollout horizon; 0 picks the worst-case target distance plus one.
  std::size_t horizon = 0;
  /// Rollout targets: "stop" (every stop-safe state), "goal" or a state/cell list.
  std::string targets = "stop";
};

struct VerifyConfig {
  std::uint64_t seed = 0;
  std::size_t random_instances = 1000;
  std::size_t enumeration_instances = 200;
  double enumeration_policy_cap = 1e5;
  std::size_t chain_steps = 50000;
  std::size_t grid_steps = 200000;
};

struct RunConfig {
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::string out = "out";
  std::size_t eval_episodes = 100;
  /// Length of sampled evaluation episodes (training episodes use [algo] episode_length).
  std::size_t eval_episode_length = 200;
  /// Episode starts: "omega" (uniform over the safe set), "spawn" (grid cells at least two
  /// cells from every failure state) or an explicit state/cell list.
  std::string starts = "omega";
  /// Evaluation start set, same syntax; empty means `starts`.
  std::string eval_starts;
};

struct ExperimentConfig {
  EnvConfig env;
  FilterConfig filter;
  LearningSchedule algo;
  RunConfig run;
  VerifyConfig verify;
};

/// Parses an INI document with sections [env], [filter], [algo], [run] and [verify].
/// Unknown sections or keys and malformed values throw ConfigError.
ExperimentConfig parse_config_string(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// "x,y;x,y" (whitespace ignored). An empty string or "none" gives an empty list.
std::vector<Cell> parse_cells(const std::string& text);
std::vector<std::uint64_t> parse_seeds(const std::string& text);

}  // namespace safefilter::harness
