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

#include "safefilter/harness/experiment.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <sstream>

#include "safefilter/errors.hpp"
#include "safefilter/serialize.hpp"

namespace safefilter::harness {

namespace fs = std::filesystem;

Environment make_environment(const EnvConfig& cfg) {
  if (cfg.type == "chain3") {
    return build_chain3();
  }
  if (cfg.type == "trap3") {
    return build_trap3();
  }
  if (cfg.type == "file") {
    if (!fs::exists(cfg.path)) {
      throw MissingFileError("MDP file not found: " + cfg.path);
    }
    const auto j = read_json_file(cfg.path);
    auto mdp = mdp_from_json(j);
    auto spec = spec_from_mdp_json(j);
    if (!spec) {
      throw ConfigError("MDP file " + cfg.path + " has no margin array");
    }
    require_valid(mdp);
    require_matching(mdp, *spec);
    return Environment{"file", std::move(mdp), std::move(*spec), std::nullopt};
  }
  if (cfg.type == "goal") {
    auto params = default_goal_params(cfg.width, cfg.height, cfg.slip_prob);
    if (cfg.pillars) {
      params.pillars = *cfg.pillars;
    }
    if (cfg.goal) {
      params.goal = *cfg.goal;
      if (!cfg.pillars) {
        std::erase(params.pillars, params.goal);
      }
    }
    params.step_reward_scale = cfg.step_reward_scale;
    params.goal_bonus = cfg.goal_bonus;
    params.discount = cfg.discount;
    return build_grid_goal(params);
  }
  if (cfg.type == "circle") {
    GridCircleParams params;
    params.width = cfg.width;
    params.height = cfg.height;
    params.slip_prob = cfg.slip_prob;
    params.ring_radius = cfg.ring_radius;
    params.tangential_scale = cfg.tangential_scale;
    params.off_ring_penalty = cfg.off_ring_penalty;
    params.discount = cfg.discount;
    return build_grid_circle(params);
  }
  throw ConfigError("unknown environment type " + cfg.type);
}

namespace {

std::vector<State> non_failure_states(const SafetySpec& spec) {
  std::vector<State> out;
  for (State s = 0; s < spec.n_states(); ++s) {
    if (!spec.is_failure(s)) {
      out.push_back(s);
    }
  }
  return out;
}

std::vector<State> parse_state_list(const std::string& text, const Environment& env) {
  std::vector<State> out;
  if (env.grid) {
    for (Cell c : parse_cells(text)) {
      if (!env.grid->inside(c)) {
        throw ConfigError("cell (" + std::to_string(c.x) + "," + std::to_string(c.y) +
                          ") lies outside the grid");
      }
      out.push_back(env.grid->state_of(c));
    }
  } else {
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
      State s = 0;
      const auto first = item.find_first_not_of(" \t");
      const auto last = item.find_last_not_of(" \t");
      if (first == std::string::npos) {
        continue;
      }
      const char* begin = item.data() + first;
      const char* end = item.data() + last + 1;
      const auto [ptr, ec] = std::from_chars(begin, end, s);
      if (ec != std::errc() || ptr != end || s >= env.mdp.n_states()) {
        throw ConfigError("invalid state '" + item + "'");
      }
      out.push_back(s);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

std::vector<State> resolve_states(const std::string& text, const Environment& env,
                                  const InvarianceResult& inv) {
  std::vector<State> out;
  if (text == "omega") {
    out = inv.omega_star;
  } else if (text == "spawn") {
    if (!env.grid) {
      throw ConfigError("start set 'spawn' needs a grid environment");
    }
    out = grid_spawn_states(*env.grid, env.spec);
  } else {
    out = parse_state_list(text, env);
  }
  if (out.empty()) {
    throw ConfigError("start set '" + text + "' is empty");
  }
  return out;
}

nlohmann::json filter_file_json(const SafetyFilter& filter) {
  return nlohmann::json{{"n_states", filter.n_states()},
                        {"n_actions", filter.n_actions()},
                        {"invariance", to_json(filter.invariance())},
                        {"filter", to_json(filter)}};
}

SafetyFilter load_filter_file(const std::string& path, const Environment& env) {
  if (!fs::exists(path)) {
    throw MissingFileError("filter file not found: " + path);
  }
  const auto j = read_json_file(path);
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  try {
    n_states = j.at("n_states").get<std::size_t>();
    n_actions = j.at("n_actions").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(path + ": " + e.what());
  }
  if (n_states != env.mdp.n_states() || n_actions != env.mdp.n_actions()) {
    throw DimensionMismatchError("filter file " + path + " is " + std::to_string(n_states) +
                                 " x " + std::to_string(n_actions) + ", environment is " +
                                 std::to_string(env.mdp.n_states()) + " x " +
                                 std::to_string(env.mdp.n_actions()));
  }
  try {
    const auto inv = invariance_from_json(j.at("invariance"));
    if (inv.n_states() != n_states || inv.n_actions() != n_actions) {
      throw DimensionMismatchError("filter file " + path + " has inconsistent tables");
    }
    return filter_from_json(j.at("filter"), inv);
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(path + ": " + e.what());
  }
}

std::optional<SafetyFilter> make_filter(const ExperimentConfig& cfg, const Environment& env) {
  const auto& mode = cfg.filter.mode;
  if (mode == "none") {
    return std::nullopt;
  }
  if (mode == "perfect" && !cfg.filter.file.empty()) {
    return load_filter_file(cfg.filter.file, env);
  }
  const auto inv = maximal_invariant_set(env.mdp, env.spec);
  if (inv.empty()) {
    throw SynthesisError("empty safe set");
  }
  if (mode == "perfect") {
    return build_perfect_filter(inv);
  }
  if (mode == "value") {
    return build_value_monitor_filter(env.mdp, inv, cfg.filter.value_margin);
  }
  std::vector<State> targets;
  if (cfg.filter.targets == "stop") {
    targets = stop_safe_states(env.mdp, inv);
  } else if (cfg.filter.targets == "goal") {
    if (cfg.env.type != "goal") {
      throw ConfigError("[filter] targets = goal needs a goal environment");
    }
    const Cell goal = cfg.env.goal ? *cfg.env.goal
                                   : default_goal_params(cfg.env.width, cfg.env.height,
                                                         cfg.env.slip_prob)
                                         .goal;
    targets = {env.grid->state_of(goal)};
  } else {
    targets = parse_state_list(cfg.filter.targets, env);
  }
  auto rollout = make_rollout_config(env.mdp, inv, targets, cfg.filter.horizon);
  const RolloutMonitor monitor(env.mdp, env.spec, std::move(rollout));
  return build_rollout_monitor_filter(inv, monitor);
}

std::vector<SeedRun> train_seeds(const ExperimentConfig& cfg, const Environment& env,
                                 const std::optional<SafetyFilter>& filter,
                                 std::uint64_t seed_offset) {
  const auto inv = filter ? filter->invariance() : maximal_invariant_set(env.mdp, env.spec);
  TrainingOptions options;
  if (!filter && inv.empty() && cfg.run.starts == "omega") {
    options.starts = non_failure_states(env.spec);
  } else {
    options.starts = resolve_states(cfg.run.starts, env, inv);
  }
  if (!cfg.run.eval_starts.empty()) {
    options.eval_starts = resolve_states(cfg.run.eval_starts, env, inv);
  }
  std::optional<FilteredMdp> fmdp;
  if (filter) {
    fmdp.emplace(env.mdp, *filter);
  }

  auto one = [&](std::uint64_t seed) {
    RngStream rng(seed);
    SeedRun run;
    run.seed = seed;
    if (fmdp) {
      auto result = q_learning(*fmdp, env.spec, cfg.algo, rng, options);
      run.log = std::move(result.log);
      run.q = std::move(result.q);
      run.executed = pushforward_policy(result.policy.policy, *filter);
      run.policy = std::move(result.policy.policy);
      run.epsilon_bound = result.policy.epsilon_bound;
    } else {
      auto result = baseline_q_learning_terminating(env.mdp, env.spec, cfg.algo, rng, options);
      run.log = std::move(result.log);
      run.q = std::move(result.q);
      run.policy = result.policy;
      run.executed = std::move(result.policy);
    }
    return run;
  };

  std::vector<std::future<SeedRun>> pending;
  pending.reserve(cfg.run.seeds.size());
  for (std::uint64_t seed : cfg.run.seeds) {
    pending.push_back(std::async(std::launch::async, one, seed + seed_offset));
  }
  std::vector<SeedRun> runs;
  runs.reserve(pending.size());
  for (auto& f : pending) {
    runs.push_back(f.get());
  }
  return runs;
}

std::string format_double(double value) {
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc()) {
    throw std::runtime_error("format_double: buffer too small");
  }
  return std::string(buffer, ptr);
}

namespace {

void append_row(std::string& out, const MetricsRow& row) {
  out += std::to_string(row.env_step);
  out += ',';
  out += format_double(row.episodic_return_train);
  out += ',';
  out += format_double(row.episodic_return_eval);
  out += ',';
  out += std::to_string(row.cumulative_violations);
  out += ',';
  out += std::to_string(row.cumulative_interventions);
  out += ',';
  out += std::to_string(row.seed);
  out += '\n';
}

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
};

MeanStderr mean_stderr(const std::vector<double>& xs) {
  MeanStderr out;
  if (xs.empty()) {
    return out;
  }
  for (double x : xs) {
    out.mean += x;
  }
  out.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) {
      ss += (x - out.mean) * (x - out.mean);
    }
    const double n = static_cast<double>(xs.size());
    out.stderr_ = std::sqrt(ss / (n - 1.0) / n);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << text;
}

}  // namespace

std::string metrics_csv(const MetricsLog& log) {
  std::string out = std::string(kMetricsHeader) + '\n';
  for (const auto& row : log) {
    append_row(out, row);
  }
  return out;
}

std::string merged_metrics_csv(const std::vector<SeedRun>& runs) {
  std::string out = std::string(kMetricsHeader) + '\n';
  for (const auto& run : runs) {
    for (const auto& row : run.log) {
      append_row(out, row);
    }
  }
  return out;
}

std::string summary_csv(const std::vector<SeedRun>& runs) {
  std::map<std::size_t, std::vector<const MetricsRow*>> by_step;
  for (const auto& run : runs) {
    for (const auto& row : run.log) {
      by_step[row.env_step].push_back(&row);
    }
  }
  std::string out =
      "env_step,n_seeds,return_train_mean,return_train_stderr,return_eval_mean,"
      "return_eval_stderr,violations_mean,violations_stderr,interventions_mean,"
      "interventions_stderr\n";
  for (const auto& [step, rows] : by_step) {
    std::vector<double> train;
    std::vector<double> eval;
    std::vector<double> violations;
    std::vector<double> interventions;
    for (const auto* r : rows) {
      train.push_back(r->episodic_return_train);
      eval.push_back(r->episodic_return_eval);
      violations.push_back(static_cast<double>(r->cumulative_violations));
      interventions.push_back(static_cast<double>(r->cumulative_interventions));
    }
    out += std::to_string(step) + ',' + std::to_string(rows.size());
    for (const auto* xs : {&train, &eval, &violations, &interventions}) {
      const auto ms = mean_stderr(*xs);
      out += ',' + format_double(ms.mean) + ',' + format_double(ms.stderr_);
    }
    out += '\n';
  }
  return out;
}

void write_training_outputs(const std::string& dir, const std::vector<SeedRun>& runs) {
  const fs::path root(dir);
  fs::create_directories(root);
  for (const auto& run : runs) {
    const auto tag = std::to_string(run.seed);
    write_text(root / ("metrics_seed" + tag + ".csv"), metrics_csv(run.log));
    write_json_file((root / ("q_seed" + tag + ".json")).string(), to_json(run.q));
    write_json_file((root / ("policy_seed" + tag + ".json")).string(), to_json(run.policy));
    write_json_file((root / ("policy_exec_seed" + tag + ".json")).string(),
                    to_json(run.executed));
  }
  write_text(root / "metrics.csv", merged_metrics_csv(runs));
  write_text(root / "summary.csv", summary_csv(runs));
}

EvalResult evaluate_policy(const Environment& env, const std::optional<SafetyFilter>& filter,
                           const TabularPolicy& policy, const std::vector<State>& starts,
                           std::size_t episodes, std::size_t episode_length, RngStream& rng) {
  if (policy.n_states() != env.mdp.n_states() || policy.n_actions() != env.mdp.n_actions()) {
    throw DimensionMismatchError("policy dimensions do not match the environment");
  }
  if (starts.empty() || episodes == 0) {
    throw ConfigError("evaluation needs a start state and at least one episode");
  }
  const double gamma = env.mdp.discount();
  std::vector<double> returns;
  returns.reserve(episodes);
  EvalResult result;
  result.episodes = episodes;
  for (std::size_t e = 0; e < episodes; ++e) {
    State s = starts[rng.uniform_index(starts.size())];
    double ret = 0.0;
    double power = 1.0;
    for (std::size_t t = 0; t < episode_length; ++t) {
      Action a = policy.sample(s, rng);
      if (filter) {
        a = filter->apply(s, a);
      }
      ret += power * env.mdp.reward(s, a);
      power *= gamma;
      s = sample_transition(env.mdp, s, a, rng);
      if (env.spec.is_failure(s)) {
        ++result.violations;
        break;
      }
    }
    returns.push_back(ret);
  }
  const auto ms = mean_stderr(returns);
  result.mean_return = ms.mean;
  result.stderr_return = ms.stderr_;
  if (filter) {
    const FilteredMdp fmdp(env.mdp, *filter);
    result.exact_value = mean_over(policy_value(fmdp, policy), starts);
  } else {
    result.exact_value = mean_over(policy_value(terminating_view(env.mdp, env.spec), policy),
                                   starts);
  }
  return result;
}

}  // namespace safefilter::harness
