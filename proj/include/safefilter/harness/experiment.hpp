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
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "safefilter/envs.hpp"
#include "safefilter/filter.hpp"
#include "safefilter/harness/config.hpp"
#include "safefilter/invariance.hpp"
#include "safefilter/solvers.hpp"

namespace safefilter::harness {

/// A referenced input file does not exist.
class MissingFileError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// An input file does not fit the configured environment.
class DimensionMismatchError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

Environment make_environment(const EnvConfig& cfg);

/// "omega", "spawn" or an explicit list: "x,y;x,y" cells on grids, "i,j,k" state indices
/// otherwise. Throws ConfigError on unknown states or an empty result.
std::vector<State> resolve_states(const std::string& text, const Environment& env,
                                  const InvarianceResult& inv);

/// {"n_states", "n_actions", "invariance", "filter"}.
nlohmann::json filter_file_json(const SafetyFilter& filter);
SafetyFilter load_filter_file(const std::string& path, const Environment& env);

/// Filter for the configured mode; nullopt for mode "none". Throws SynthesisError on an empty
/// safe set.
std::optional<SafetyFilter> make_filter(const ExperimentConfig& cfg, const Environment& env);

struct SeedRun {
  std::uint64_t seed = 0;
  MetricsLog log;
  QTable q{1, 1};
  /// Greedy policy on the proposed actions.
  TabularPolicy policy = TabularPolicy::uniform(1, 1);
  /// Executed policy (pushforward through the filter); equals `policy` without a filter.
  TabularPolicy executed = TabularPolicy::uniform(1, 1);
  /// A-posteriori certificate; absent for unfiltered runs.
  std::optional<double> epsilon_bound;
};

/// One run per configured seed (plus `seed_offset`), executed concurrently and returned in
/// seed order.
std::vector<SeedRun> train_seeds(const ExperimentConfig& cfg, const Environment& env,
                                 const std::optional<SafetyFilter>& filter,
                                 std::uint64_t seed_offset = 0);

/// Shortest decimal that round-trips to the same double.
std::string format_double(double value);

inline constexpr const char* kMetricsHeader =
    "env_step,episodic_return_train,episodic_return_eval,cumulative_violations,"
    "cumulative_interventions,seed";

std::string metrics_csv(const MetricsLog& log);
/// Every row of every run, in seed order.
std::string merged_metrics_csv(const std::vector<SeedRun>& runs);
/// Per env_step: mean and standard error across seeds.
std::string summary_csv(const std::vector<SeedRun>& runs);

/// Writes the per-seed and merged CSVs and the policy and Q tables under `dir`.
void write_training_outputs(const std::string& dir, const std::vector<SeedRun>& runs);

struct EvalResult {
  std::size_t episodes = 0;
  double mean_return = 0.0;
  double stderr_return = 0.0;
  std::uint64_t violations = 0;
  /// Exact expected discounted return averaged over the start set.
  double exact_value = 0.0;
};

/// Samples `episodes` episodes of `episode_length` steps; actions pass through `filter` when
/// given. Entering the failure set counts a violation and ends the episode.
EvalResult evaluate_policy(const Environment& env, const std::optional<SafetyFilter>& filter,
                           const TabularPolicy& policy, const std::vector<State>& starts,
                           std::size_t episodes, std::size_t episode_length, RngStream& rng);

}  // namespace safefilter::harness
