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

#include "safefilter/harness/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "safefilter/errors.hpp"

namespace safefilter::harness {

namespace {

using boost::property_tree::ptree;

std::string trimmed(std::string s) {
  boost::algorithm::trim(s);
  return s;
}

template <typename T>
T parse_number(const std::string& key, const std::string& raw) {
  const std::string text = trimmed(raw);
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ConfigError("invalid value for " + key + ": '" + raw + "'");
  }
  return value;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  boost::algorithm::split(parts, text, [sep](char c) { return c == sep; });
  for (auto& p : parts) {
    boost::algorithm::trim(p);
  }
  return parts;
}

/// Reads the keys of one section, rejecting names not in `known`.
class Section {
 public:
  Section(const ptree& root, std::string name, std::set<std::string> known)
      : name_(std::move(name)) {
    if (const auto child = root.get_child_optional(name_)) {
      for (const auto& [key, node] : *child) {
        if (!known.count(key)) {
          throw ConfigError("unknown key [" + name_ + "] " + key);
        }
        values_.emplace_back(key, node.data());
      }
    }
  }

  std::optional<std::string> raw(const std::string& key) const {
    for (const auto& [k, v] : values_) {
      if (k == key) {
        return trimmed(v);
      }
    }
    return std::nullopt;
  }

  void read(const std::string& key, std::string& out) const {
    if (auto v = raw(key)) {
      out = *v;
    }
  }

  template <typename T>
  void read(const std::string& key, T& out) const {
    if (auto v = raw(key)) {
      out = parse_number<T>("[" + name_ + "] " + key, *v);
    }
  }

 private:
  std::string name_;
  std::vector<std::pair<std::string, std::string>> values_;
};

Cell parse_cell(const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() != 2) {
    throw ConfigError("invalid cell '" + text + "', expected x,y");
  }
  return Cell{parse_number<int>("cell x", parts[0]), parse_number<int>("cell y", parts[1])};
}

}  // namespace

std::vector<Cell> parse_cells(const std::string& text) {
  const std::string t = trimmed(text);
  std::vector<Cell> cells;
  if (t.empty() || t == "none") {
    return cells;
  }
  for (const auto& part : split(t, ';')) {
    if (!part.empty()) {
      cells.push_back(parse_cell(part));
    }
  }
  return cells;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& part : split(text, ',')) {
    seeds.push_back(parse_number<std::uint64_t>("[run] seeds", part));
  }
  auto sorted = seeds;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ConfigError("[run] seeds must be distinct");
  }
  if (seeds.empty()) {
    throw ConfigError("[run] seeds must not be empty");
  }
  return seeds;
}

ExperimentConfig parse_config_string(const std::string& text) {
  ptree root;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, root);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  static const std::set<std::string> kSections{"env", "filter", "algo", "run", "verify"};
  for (const auto& [name, node] : root) {
    if (!kSections.count(name)) {
      throw ConfigError("unknown section [" + name + "]");
    }
    if (node.data().size() > 0) {
      throw ConfigError("key outside any section: " + name);
    }
  }

  ExperimentConfig cfg;
  const Section env(root, "env",
                    {"type", "width", "height", "slip", "pillars", "goal", "step_reward_scale",
                     "goal_bonus", "discount", "ring_radius", "tangential_scale",
                     "off_ring_penalty", "path"});
  env.read("type", cfg.env.type);
  env.read("width", cfg.env.width);
  env.read("height", cfg.env.height);
  env.read("slip", cfg.env.slip_prob);
  if (auto v = env.raw("pillars")) {
    cfg.env.pillars = parse_cells(*v);
  }
  if (auto v = env.raw("goal")) {
    cfg.env.goal = parse_cell(*v);
  }
  env.read("step_reward_scale", cfg.env.step_reward_scale);
  env.read("goal_bonus", cfg.env.goal_bonus);
  env.read("discount", cfg.env.discount);
  env.read("ring_radius", cfg.env.ring_radius);
  env.read("tangential_scale", cfg.env.tangential_scale);
  env.read("off_ring_penalty", cfg.env.off_ring_penalty);
  env.read("path", cfg.env.path);
  static const std::set<std::string> kEnvTypes{"goal", "circle", "file", "chain3", "trap3"};
  if (!kEnvTypes.count(cfg.env.type)) {
    throw ConfigError("unknown [env] type '" + cfg.env.type + "'");
  }
  if (cfg.env.type == "file" && cfg.env.path.empty()) {
    throw ConfigError("[env] type = file needs a path");
  }

  const Section filter(root, "filter", {"mode", "file", "value_margin", "horizon", "targets"});
  filter.read("mode", cfg.filter.mode);
  filter.read("file", cfg.filter.file);
  filter.read("value_margin", cfg.filter.value_margin);
  filter.read("horizon", cfg.filter.horizon);
  filter.read("targets", cfg.filter.targets);
  static const std::set<std::string> kModes{"none", "perfect", "value", "rollout"};
  if (!kModes.count(cfg.filter.mode)) {
    throw ConfigError("unknown [filter] mode '" + cfg.filter.mode + "'");
  }

  const Section algo(root, "algo",
                     {"n_steps", "stepsize_c", "eps0", "eps_min", "eps_decay_fraction",
                      "episode_length", "eval_interval"});
  algo.read("n_steps", cfg.algo.n_steps);
  algo.read("stepsize_c", cfg.algo.stepsize_c);
  algo.read("eps0", cfg.algo.eps0);
  algo.read("eps_min", cfg.algo.eps_min);
  algo.read("eps_decay_fraction", cfg.algo.eps_decay_fraction);
  algo.read("episode_length", cfg.algo.episode_length);
  algo.read("eval_interval", cfg.algo.eval_interval);
  cfg.algo.validate();

  const Section run(root, "run", {"seeds", "out", "eval_episodes", "eval_episode_length", "starts", "eval_starts"});
  if (auto v = run.raw("seeds")) {
    cfg.run.seeds = parse_seeds(*v);
  }
  run.read("out", cfg.run.out);
  run.read("eval_episodes", cfg.run.eval_episodes);
  run.read("eval_episode_length", cfg.run.eval_episode_length);
  run.read("starts", cfg.run.starts);
  run.read("eval_starts", cfg.run.eval_starts);
  if (cfg.run.eval_episodes == 0 || cfg.run.eval_episode_length == 0) {
    throw ConfigError("[run] eval_episodes and eval_episode_length must be positive");
  }

  const Section verify(root, "verify",
                       {"seed", "random_instances", "enumeration_instances",
                        "enumeration_policy_cap", "chain_steps", "grid_steps"});
  verify.read("seed", cfg.verify.seed);
  verify.read("random_instances", cfg.verify.random_instances);
  verify.read("enumeration_instances", cfg.verify.enumeration_instances);
  verify.read("enumeration_policy_cap", cfg.verify.enumeration_policy_cap);
  verify.read("chain_steps", cfg.verify.chain_steps);
  verify.read("grid_steps", cfg.verify.grid_steps);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file " + path);
  }
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_string(text.str());
}

}  // namespace safefilter::harness
