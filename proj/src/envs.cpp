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

#include "safefilter/envs.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <string>

#include "safefilter/errors.hpp"

namespace safefilter {

bool GridLayout::inside(Cell c) const {
  return c.x >= 0 && c.y >= 0 && static_cast<std::size_t>(c.x) < width &&
         static_cast<std::size_t>(c.y) < height;
}

State GridLayout::state_of(Cell c) const {
  if (!inside(c)) {
    return wall_state();
  }
  return static_cast<State>(c.y) * width + static_cast<State>(c.x);
}

Cell GridLayout::cell_of(State s) const {
  if (s >= n_cells()) {
    throw IndexError("state " + std::to_string(s) + " is not a grid cell");
  }
  return Cell{static_cast<int>(s % width), static_cast<int>(s / width)};
}

namespace {

struct Move {
  int dx;
  int dy;
};

constexpr std::array<Move, kGridActions> kMoves{{{0, 1}, {0, -1}, {-1, 0}, {1, 0}, {0, 0}}};

struct Outcome {
  Cell target;
  double prob;
};

/// Attempted target cells of an action, before walls and pillars are resolved.
std::vector<Outcome> outcomes(Cell from, Action a, double slip) {
  const Move m = kMoves[a];
  if (a == kStay) {
    return {{from, 1.0}};
  }
  std::vector<Outcome> out{{{from.x + m.dx, from.y + m.dy}, 1.0 - slip}};
  if (slip > 0.0) {
    // Perpendicular turns: (dx, dy) -> (-dy, dx) and (dy, -dx).
    out.push_back({{from.x - m.dy, from.y + m.dx}, slip / 2.0});
    out.push_back({{from.x + m.dy, from.y - m.dx}, slip / 2.0});
  }
  return out;
}

struct GridModel {
  GridLayout layout;
  std::vector<char> failure;
  std::vector<std::vector<Transition>> kernel;
  std::vector<double> rewards;
};

void check_common(std::size_t width, std::size_t height, double slip, double discount) {
  if (width == 0 || height == 0) {
    throw SpecError("grid dimensions must be positive");
  }
  if (!(slip >= 0.0 && slip <= 0.5)) {
    throw SpecError("slip_prob must lie in [0, 0.5]");
  }
  if (!(discount > 0.0 && discount < 1.0)) {
    throw SpecError("discount must lie in (0, 1)");
  }
}

/// Kernel of a grid with the given failure cells; rewards are filled by the caller.
GridModel grid_kernel(const GridLayout& layout, const std::vector<Cell>& blocked, double slip) {
  const std::size_t n = layout.n_cells() + 1;
  GridModel g{layout, std::vector<char>(n, 0), std::vector<std::vector<Transition>>(n * kGridActions),
              std::vector<double>(n * kGridActions, 0.0)};
  g.failure[layout.wall_state()] = 1;
  for (Cell c : blocked) {
    g.failure[layout.state_of(c)] = 1;
  }
  for (State s = 0; s < n; ++s) {
    for (Action a = 0; a < kGridActions; ++a) {
      auto& row = g.kernel[s * kGridActions + a];
      if (g.failure[s]) {
        row.push_back({s, 1.0});
        continue;
      }
      for (const auto& o : outcomes(layout.cell_of(s), a, slip)) {
        const State next = layout.state_of(o.target);
        auto it = std::find_if(row.begin(), row.end(),
                               [&](const Transition& t) { return t.next == next; });
        if (it != row.end()) {
          it->prob += o.prob;
        } else {
          row.push_back({next, o.prob});
        }
      }
      std::sort(row.begin(), row.end(),
                [](const Transition& l, const Transition& r) { return l.next < r.next; });
    }
  }
  return g;
}

Environment finish(std::string name, GridModel g, double discount) {
  std::vector<double> margin(g.failure.size());
  for (State s = 0; s < margin.size(); ++s) {
    margin[s] = g.failure[s] ? -1.0 : 1.0;
  }
  const std::size_t n = g.failure.size();
  TabularMdp mdp(n, kGridActions, std::move(g.kernel), std::move(g.rewards), discount);
  require_valid(mdp);
  return Environment{std::move(name), std::move(mdp), SafetySpec(std::move(margin)), g.layout};
}

double distance(double x0, double y0, double x1, double y1) {
  return std::hypot(x1 - x0, y1 - y0);
}

}  // namespace

Environment build_grid_goal(const GridGoalParams& params) {
  check_common(params.width, params.height, params.slip_prob, params.discount);
  const GridLayout layout{params.width, params.height};
  if (!layout.inside(params.goal)) {
    throw SpecError("goal cell lies outside the grid");
  }
  for (Cell c : params.pillars) {
    if (!layout.inside(c)) {
      throw SpecError("pillar cell lies outside the grid");
    }
    if (c == params.goal) {
      throw SpecError("goal cell coincides with a pillar");
    }
  }
  auto g = grid_kernel(layout, params.pillars, params.slip_prob);
  const double gx = params.goal.x;
  const double gy = params.goal.y;
  for (State s = 0; s < layout.n_cells(); ++s) {
    if (g.failure[s]) {
      continue;
    }
    const Cell c = layout.cell_of(s);
    const double here = distance(c.x, c.y, gx, gy);
    const double bonus = c == params.goal ? params.goal_bonus : 0.0;
    for (Action a = 0; a < kGridActions; ++a) {
      double expected = 0.0;
      for (const auto& o : outcomes(c, a, params.slip_prob)) {
        expected += o.prob * distance(o.target.x, o.target.y, gx, gy);
      }
      g.rewards[s * kGridActions + a] = params.step_reward_scale * (here - expected) + bonus;
    }
  }
  return finish("goal", std::move(g), params.discount);
}

GridGoalParams default_goal_params(std::size_t width, std::size_t height, double slip_prob) {
  GridGoalParams p;
  p.width = width;
  p.height = height;
  p.slip_prob = slip_prob;
  const int w = static_cast<int>(width);
  const int h = static_cast<int>(height);
  if (width < 8 || height < 8) {
    p.goal = Cell{w - 1, h - 1};
    p.pillars = {{w / 2, h / 2}};
  } else {
    p.goal = Cell{w - 2, h - 2};
    p.pillars = {{w / 4, h - 1 - h / 4}, {w - 1 - w / 4, h / 4}};
  }
  std::erase(p.pillars, p.goal);
  return p;
}

namespace {

double resolved_radius(const GridCircleParams& p) {
  return p.ring_radius > 0.0 ? p.ring_radius
                             : static_cast<double>(std::min(p.width, p.height)) / 2.0 - 1.0;
}

struct CircleGeometry {
  double cx;
  double cy;
  double radius;
};

CircleGeometry geometry(const GridCircleParams& p) {
  return {(static_cast<double>(p.width) - 1.0) / 2.0, (static_cast<double>(p.height) - 1.0) / 2.0,
          resolved_radius(p)};
}

bool on_ring(const CircleGeometry& geo, Cell c) {
  return std::abs(distance(geo.cx, geo.cy, c.x, c.y) - geo.radius) <= 0.5;
}

}  // namespace

std::vector<State> circle_ring_states(const GridCircleParams& params) {
  const GridLayout layout{params.width, params.height};
  const auto geo = geometry(params);
  std::vector<State> out;
  for (State s = 0; s < layout.n_cells(); ++s) {
    if (on_ring(geo, layout.cell_of(s))) {
      out.push_back(s);
    }
  }
  return out;
}

std::vector<double> circle_tangential_reward(const GridCircleParams& params) {
  const GridLayout layout{params.width, params.height};
  const auto geo = geometry(params);
  std::vector<double> table((layout.n_cells() + 1) * kGridActions, 0.0);
  for (State s = 0; s < layout.n_cells(); ++s) {
    const Cell c = layout.cell_of(s);
    const double px = c.x - geo.cx;
    const double py = c.y - geo.cy;
    const double norm = std::hypot(px, py);
    if (norm == 0.0) {
      continue;
    }
    // Counter-clockwise unit tangent.
    const double tx = -py / norm;
    const double ty = px / norm;
    for (Action a = 0; a < kGridActions; ++a) {
      double dx = 0.0;
      double dy = 0.0;
      for (const auto& o : outcomes(c, a, params.slip_prob)) {
        dx += o.prob * (o.target.x - c.x);
        dy += o.prob * (o.target.y - c.y);
      }
      table[s * kGridActions + a] = params.tangential_scale * (dx * tx + dy * ty);
    }
  }
  return table;
}

Environment build_grid_circle(const GridCircleParams& params) {
  check_common(params.width, params.height, params.slip_prob, params.discount);
  if (!(resolved_radius(params) > 0.0)) {
    throw SpecError("ring radius must be positive");
  }
  const GridLayout layout{params.width, params.height};
  auto g = grid_kernel(layout, {}, params.slip_prob);
  const auto geo = geometry(params);
  const auto tangential = circle_tangential_reward(params);
  bool any_ring = false;
  for (State s = 0; s < layout.n_cells(); ++s) {
    const Cell c = layout.cell_of(s);
    const bool ring = on_ring(geo, c);
    any_ring = any_ring || ring;
    const double off = std::abs(distance(geo.cx, geo.cy, c.x, c.y) - geo.radius);
    for (Action a = 0; a < kGridActions; ++a) {
      const std::size_t idx = s * kGridActions + a;
      g.rewards[idx] = ring ? tangential[idx] : -params.off_ring_penalty * off;
    }
  }
  if (!any_ring) {
    throw SpecError("ring radius selects no grid cell");
  }
  return finish("circle", std::move(g), params.discount);
}

Environment build_chain3() {
  // Actions: 0 = stay, 1 = right.
  std::vector<std::vector<Transition>> kernel{
      {{0, 1.0}}, {{1, 1.0}},  // s0
      {{1, 1.0}}, {{2, 1.0}},  // s1
      {{2, 1.0}}, {{2, 1.0}},  // s2 (failure)
  };
  std::vector<double> rewards{0.0, 1.0, 0.0, 1.0, 0.0, 0.0};
  return Environment{"chain3", TabularMdp(3, 2, std::move(kernel), std::move(rewards), 0.9),
                     SafetySpec({1.0, 1.0, -1.0}), std::nullopt};
}

Environment build_trap3() {
  // Actions: 0 = hold, 1 = go.
  std::vector<std::vector<Transition>> kernel{
      {{0, 1.0}}, {{1, 1.0}},                        // s0
      {{1, 0.5}, {2, 0.5}}, {{1, 0.5}, {2, 0.5}},  // s1
      {{2, 1.0}}, {{2, 1.0}},                        // s2 (failure)
  };
  std::vector<double> rewards{0.0, 1.0, 0.0, 1.0, 0.0, 0.0};
  return Environment{"trap3", TabularMdp(3, 2, std::move(kernel), std::move(rewards), 0.9),
                     SafetySpec({1.0, 1.0, -1.0}), std::nullopt};
}

std::vector<State> grid_spawn_states(const GridLayout& grid, const SafetySpec& spec,
                                     int keepout) {
  std::vector<State> out;
  for (State s = 0; s < grid.n_cells(); ++s) {
    if (spec.is_failure(s)) {
      continue;
    }
    const Cell c = grid.cell_of(s);
    bool clear = true;
    for (int dx = 1 - keepout; dx < keepout && clear; ++dx) {
      for (int dy = 1 - keepout; dy < keepout && clear; ++dy) {
        clear = !spec.is_failure(grid.state_of({c.x + dx, c.y + dy}));
      }
    }
    if (clear) {
      out.push_back(s);
    }
  }
  return out;
}

bool grid_safe_set_connected(const GridLayout& grid, const InvarianceResult& inv) {
  std::vector<State> cells;
  for (State s : inv.omega_star) {
    if (s < grid.n_cells()) {
      cells.push_back(s);
    }
  }
  if (cells.empty()) {
    return true;
  }
  std::vector<char> seen(grid.n_cells(), 0);
  std::queue<State> frontier;
  frontier.push(cells.front());
  seen[cells.front()] = 1;
  std::size_t reached = 0;
  while (!frontier.empty()) {
    const State s = frontier.front();
    frontier.pop();
    ++reached;
    const Cell c = grid.cell_of(s);
    for (Action a = 0; a < kStay; ++a) {
      const Cell nb{c.x + kMoves[a].dx, c.y + kMoves[a].dy};
      if (!grid.inside(nb)) {
        continue;
      }
      const State t = grid.state_of(nb);
      if (!seen[t] && inv.contains(t)) {
        seen[t] = 1;
        frontier.push(t);
      }
    }
  }
  return reached == cells.size();
}

}  // namespace safefilter
