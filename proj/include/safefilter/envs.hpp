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
#include <vector>

#include "safefilter/invariance.hpp"
#include "safefilter/mdp.hpp"

namespace safefilter {

// Gridworlds: the state of cell (x, y) is y * width + x, and one extra absorbing state
// (index width * height) stands for the square wall. Moving off the grid enters the wall.
// Actions are up (+y), down (-y), left (-x), right (+x) and stay. A move keeps its direction
// with probability 1 - slip and turns 90 degrees to either side with probability slip / 2;
// stay never slips. Failure states (wall and pillars) are absorbing with zero reward. The
// margin is +1 off the failure set and -1 on it.

enum GridAction : Action { kUp = 0, kDown = 1, kLeft = 2, kRight = 3, kStay = 4 };
inline constexpr std::size_t kGridActions = 5;

struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell&) const = default;
};

struct GridLayout {
  std::size_t width = 0;
  std::size_t height = 0;

  std::size_t n_cells() const { return width * height; }
  State wall_state() const { return n_cells(); }
  bool inside(Cell c) const;
  State state_of(Cell c) const;
  Cell cell_of(State s) const;
  /// Longest shortest 4-neighbour path over a full grid: (width - 1) + (height - 1).
  std::size_t diameter() const { return width + height - 2; }
};

struct GridGoalParams {
  std::size_t width = 5;
  std::size_t height = 5;
  std::vector<Cell> pillars{{2, 2}};
  Cell goal{4, 4};
  double slip_prob = 0.0;
  double step_reward_scale = 1.0;
  double goal_bonus = 1.0;
  double discount = 0.9;
};

struct GridCircleParams {
  std::size_t width = 10;
  std::size_t height = 10;
  /// Ring cells are those whose centre lies within 0.5 of this radius around the grid
  /// centre. Zero picks min(width, height) / 2 - 1.
  double ring_radius = 0.0;
  double tangential_scale = 1.0;
  double off_ring_penalty = 0.1;
  double slip_prob = 0.0;
  double discount = 0.9;
};

struct Environment {
  std::string name;
  TabularMdp mdp;
  SafetySpec spec;
  std::optional<GridLayout> grid;
};

/// Goal task: r(s,a) = scale * (d(s) - E[d(s')]) + bonus * [s = goal], d the Euclidean distance
/// to the goal (off-grid targets keep their off-grid coordinates). The goal is not absorbing.
/// Throws SpecError on invalid geometry.
Environment build_grid_goal(const GridGoalParams& params);

/// Goal parameters for a width x height grid. Below 8 cells per side: one pillar at the
/// centre and the goal in the upper-right corner. Otherwise: two pillars off the main
/// diagonal and the goal one cell in from the upper-right corner.
GridGoalParams default_goal_params(std::size_t width, std::size_t height, double slip_prob);

/// Circle task: on ring cells r(s,a) = scale * (expected displacement . counter-clockwise unit
/// tangent); off ring cells r(s,a) = -penalty * (distance from the ring radius).
/// Throws SpecError on invalid geometry.
Environment build_grid_circle(const GridCircleParams& params);

/// Ring cells of a circle task, sorted by state index.
std::vector<State> circle_ring_states(const GridCircleParams& params);

/// Per (cell, action) tangential reward table of a circle task (wall row included, zero).
std::vector<double> circle_tangential_reward(const GridCircleParams& params);

/// Three states with actions {stay, right}; `right` moves one step to the right and s2 is an
/// absorbing failure. r(s, right) = 1 off the failure set, everything else 0; gamma = 0.9.
Environment build_chain3();

/// Three states with actions {hold, go}. s0: hold loops, go moves to s1. s1: both actions
/// stay at s1 or fall into the failure s2 with probability 1/2 each. r(s, go) = 1 off the
/// failure set; gamma = 0.9.
Environment build_trap3();

/// Non-failure cells whose Chebyshev distance to every failure state is at least `keepout`
/// (off-grid positions count as wall), sorted by state index.
std::vector<State> grid_spawn_states(const GridLayout& grid, const SafetySpec& spec,
                                     int keepout = 2);

/// True if the Omega* cells of a grid form one 4-connected component.
bool grid_safe_set_connected(const GridLayout& grid, const InvarianceResult& inv);

}  // namespace safefilter
