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

#include "safefilter/harness/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>

#include <CLI11.hpp>

#include "safefilter/errors.hpp"
#include "safefilter/harness/config.hpp"
#include "safefilter/harness/experiment.hpp"
#include "safefilter/serialize.hpp"
#include "safefilter/verify.hpp"

namespace safefilter::harness {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string filter_mode;
  std::uint64_t seed_offset = 0;
  std::string policy;
  std::size_t episodes = 0;
  std::string mutant;
};

ExperimentConfig resolve_config(const Options& opts, bool required) {
  ExperimentConfig cfg;
  if (!opts.config.empty()) {
    cfg = load_config(opts.config);
  } else if (required) {
    throw ConfigError("--config is required");
  }
  if (!opts.out.empty()) {
    cfg.run.out = opts.out;
  }
  if (!opts.filter_mode.empty()) {
    static const std::set<std::string> kModes{"none", "perfect", "value", "rollout"};
    if (!kModes.count(opts.filter_mode)) {
      throw ConfigError("unknown --filter-mode '" + opts.filter_mode + "'");
    }
    cfg.filter.mode = opts.filter_mode;
  }
  return cfg;
}

int cmd_synth(const Options& opts, std::ostream& out) {
  const auto cfg = resolve_config(opts, true);
  const auto env = make_environment(cfg.env);
  const auto inv = maximal_invariant_set(env.mdp, env.spec);
  if (inv.empty()) {
    throw SynthesisError("empty safe set");
  }
  const auto filter = build_perfect_filter(inv);
  fs::create_directories(cfg.run.out);
  const auto path = (fs::path(cfg.run.out) / "filter.json").string();
  write_json_file(path, filter_file_json(filter));
  if (env.grid) {
    const auto cells = std::count_if(inv.omega_star.begin(), inv.omega_star.end(),
                                     [&](State s) { return s < env.grid->n_cells(); });
    out << "safe set: " << cells << " of " << env.grid->n_cells() << " grid cells\n";
  } else {
    out << "safe set: " << inv.omega_star.size() << " of " << env.mdp.n_states() << " states\n";
  }
  if (env.grid && !grid_safe_set_connected(*env.grid, inv)) {
    out << "warning: safe set cells are not 4-connected\n";
  }
  out << "wrote " << path << '\n';
  return kExitOk;
}

int cmd_train(const Options& opts, std::ostream& out) {
  const auto cfg = resolve_config(opts, true);
  const auto env = make_environment(cfg.env);
  const auto filter = make_filter(cfg, env);
  const auto runs = train_seeds(cfg, env, filter, opts.seed_offset);
  write_training_outputs(cfg.run.out, runs);
  for (const auto& run : runs) {
    const auto& last = run.log.back();
    out << "seed " << run.seed << ": eval return " << format_double(last.episodic_return_eval)
        << ", violations " << last.cumulative_violations << ", interventions "
        << last.cumulative_interventions;
    if (run.epsilon_bound) {
      out << ", certified epsilon " << format_double(*run.epsilon_bound);
    }
    out << '\n';
  }
  out << "wrote " << cfg.run.out << '\n';
  return kExitOk;
}

int cmd_eval(const Options& opts, std::ostream& out) {
  const auto cfg = resolve_config(opts, true);
  const auto env = make_environment(cfg.env);
  const auto filter = make_filter(cfg, env);
  const auto inv = filter ? filter->invariance() : maximal_invariant_set(env.mdp, env.spec);

  TabularPolicy policy = TabularPolicy::uniform(1, 1);
  if (!opts.policy.empty()) {
    if (!fs::exists(opts.policy)) {
      throw MissingFileError("policy file not found: " + opts.policy);
    }
    policy = policy_from_json(read_json_file(opts.policy));
    if (policy.n_states() != env.mdp.n_states() || policy.n_actions() != env.mdp.n_actions()) {
      throw DimensionMismatchError("policy file does not match the environment");
    }
  } else if (filter) {
    policy = greedy_policy(FilteredMdp(env.mdp, *filter),
                           value_iteration(FilteredMdp(env.mdp, *filter)));
  } else {
    const auto model = terminating_view(env.mdp, env.spec);
    policy = greedy_policy(model, value_iteration(model));
  }

  const std::string start_text = cfg.run.eval_starts.empty() ? cfg.run.starts : cfg.run.eval_starts;
  std::vector<State> starts;
  if (inv.empty() && start_text == "omega") {
    for (State s = 0; s < env.mdp.n_states(); ++s) {
      if (!env.spec.is_failure(s)) {
        starts.push_back(s);
      }
    }
  } else {
    starts = resolve_states(start_text, env, inv);
  }
  const std::size_t episodes = opts.episodes > 0 ? opts.episodes : cfg.run.eval_episodes;
  RngStream rng(cfg.run.seeds.front() + opts.seed_offset);
  const auto result = evaluate_policy(env, filter, policy, starts, episodes,
                                      cfg.run.eval_episode_length, rng);
  out << "episodes " << result.episodes << '\n'
      << "mean return " << format_double(result.mean_return) << '\n'
      << "stderr " << format_double(result.stderr_return) << '\n'
      << "violations " << result.violations << '\n'
      << "exact value " << format_double(result.exact_value) << '\n';
  return kExitOk;
}

Mutant parse_mutant(const std::string& name) {
  if (name.empty() || name == "none") {
    return Mutant::kNone;
  }
  if (name == "enlarged-omega") {
    return Mutant::kEnlargedOmega;
  }
  if (name == "unsafe-filter") {
    return Mutant::kUnsafeFilter;
  }
  if (name == "restrictive-filter") {
    return Mutant::kRestrictiveFilter;
  }
  throw ConfigError("unknown mutant '" + name + "'");
}

int cmd_verify(const Options& opts, std::ostream& out) {
  const auto cfg = resolve_config(opts, false);
  SuiteOptions suite;
  suite.seed = cfg.verify.seed;
  suite.random_instances = cfg.verify.random_instances;
  suite.enumeration_instances = cfg.verify.enumeration_instances;
  suite.enumeration_policy_cap = cfg.verify.enumeration_policy_cap;
  suite.chain_steps = cfg.verify.chain_steps;
  suite.grid_steps = cfg.verify.grid_steps;
  suite.training_seeds = cfg.run.seeds;
  suite.inject = parse_mutant(opts.mutant);
  const auto report = run_default_suite(suite);
  fs::create_directories(cfg.run.out);
  const auto path = (fs::path(cfg.run.out) / "report.json").string();
  write_json_file(path, report.to_json());
  out << report.summary() << "wrote " << path << '\n';
  return report.passed() ? kExitOk : kExitVerifyFailed;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Safety filter synthesis, filtered Q-learning and verification"};
  app.require_subcommand(1);
  Options opts;

  const auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* config = sub->add_option("--config", opts.config, "INI experiment config");
    if (config_required) {
      config->required();
    }
    sub->add_option("--out", opts.out, "Output directory (overrides [run] out)");
  };

  auto* synth = app.add_subcommand("synth", "Synthesize the perfect filter and write filter.json");
  add_common(synth, true);

  auto* train = app.add_subcommand("train", "Train one Q-learning run per seed");
  add_common(train, true);
  train->add_option("--seed-offset", opts.seed_offset, "Added to every configured seed");
  train->add_option("--filter-mode", opts.filter_mode, "none | perfect | value | rollout");

  auto* eval = app.add_subcommand("eval", "Evaluate a policy by sampled episodes");
  add_common(eval, true);
  eval->add_option("--filter-mode", opts.filter_mode, "none | perfect | value | rollout");
  eval->add_option("--episodes", opts.episodes, "Episodes (overrides [run] eval_episodes)");
  eval->add_option("--seed-offset", opts.seed_offset, "Added to the evaluation seed");
  eval->add_option("--policy", opts.policy)->group("");

  auto* verify = app.add_subcommand("verify", "Run the verification suite and write report.json");
  add_common(verify, false);
  verify->add_option("--inject-mutant", opts.mutant)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (*synth) {
      return cmd_synth(opts, out);
    }
    if (*train) {
      return cmd_train(opts, out);
    }
    if (*eval) {
      return cmd_eval(opts, out);
    }
    return cmd_verify(opts, out);
  } catch (const SynthesisError& e) {
    err << "error: empty safe set: " << e.what() << '\n';
    return kExitEmptySafeSet;
  } catch (const MissingFileError& e) {
    err << "error: " << e.what() << '\n';
    return kExitMissingFile;
  } catch (const DimensionMismatchError& e) {
    err << "error: dimension mismatch: " << e.what() << '\n';
    return kExitDimensionMismatch;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }
}

}  // namespace safefilter::harness
