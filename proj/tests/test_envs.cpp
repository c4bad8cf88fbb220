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

#include <doctest.h>

#include <algorithm>
#include <cstdlib>

#include "safefilter/envs.hpp"
#include "safefilter/errors.hpp"
#include "safefilter/invariance.hpp"
#include "safefilter/verify.hpp"

using namespace safefilter;

namespace {

std::size_t grid_cells_in(const Environment& env, const InvarianceResult& inv) {
  return static_cast<std::size_t>(
      std::count_if(inv.omega_star.begin(), inv.omega_star.end(),
                    [&](State s) { return s < env.grid->n_cells(); }));
}

}  // namespace

TEST_CASE("grid layout indexing") {
  const GridLayout g{4, 3};
  CHECK(g.state_of({1, 2}) == 9);
  CHECK(g.cell_of(9) == Cell{1, 2});
  CHECK(g.state_of({-1, 0}) == g.wall_state());
  CHECK(g.state_of({4, 0}) == 12);
  CHECK(g.diameter() == 5);
  CHECK_THROWS_AS(g.cell_of(12), IndexError);
}

TEST_CASE("default goal grid keeps every cell except the pillar") {
  const auto env = build_grid_goal(GridGoalParams{});
  CHECK(validate(env.mdp).empty());
  CHECK(env.mdp.n_states() == 26);
  const auto inv = maximal_invariant_set(env.mdp, env.spec);
  CHECK(grid_cells_in(env, inv) == 24);
  CHECK_FALSE(inv.contains(env.grid->state_of({2, 2})));
  CHECK(inv.omega_star == omega_star_oracle(env.mdp, env.spec));
  CHECK(grid_safe_set_connected(*env.grid, inv));
}

TEST_CASE("slip removes moves that can clip the wall") {
  GridGoalParams params;
  params.slip_prob = 0.3;
  const auto env = build_grid_goal(params);
  const auto inv = maximal_invariant_set(env.mdp, env.spec);
  const State s = env.grid->state_of({0, 2});
  CHECK(inv.safe_actions[s] == std::vector<Action>{kRight, kStay});
  CHECK(inv.omega_star == omega_star_oracle(env.mdp, env.spec));
}

TEST_CASE("stay never slips") {
  GridGoalParams params;
  params.slip_prob = 0.5;
  const auto env = build_grid_goal(params);
  const State s = env.grid->state_of({1, 1});
  const auto row = env.mdp.kernel(s, kStay);
  REQUIRE(row.size() == 1);
  CHECK(row[0] == Transition{s, 1.0});
}

TEST_CASE("goal reward") {
  GridGoalParams params;
  params.goal_bonus = 0.0;
  const auto env = build_grid_goal(params);
  const State goal = env.grid->state_of(params.goal);
  CHECK(env.mdp.reward(goal, kStay) == 0.0);
  const State next_to_goal = env.grid->state_of({3, 4});
  CHECK(env.mdp.reward(next_to_goal, kRight) == doctest::Approx(1.0));
  CHECK(env.mdp.reward(next_to_goal, kLeft) == doctest::Approx(-1.0));
}

TEST_CASE("goal params are checked") {
  GridGoalParams params;
  params.goal = {5, 5};
  CHECK_THROWS_AS(build_grid_goal(params), SpecError);
  params = GridGoalParams{};
  params.pillars = {{4, 4}};
  CHECK_THROWS_AS(build_grid_goal(params), SpecError);
  params = GridGoalParams{};
  params.slip_prob = 0.6;
  CHECK_THROWS_AS(build_grid_goal(params), SpecError);
}

TEST_CASE("default goal params by grid size") {
  const auto small = default_goal_params(5, 5, 0.0);
  CHECK(small.goal == Cell{4, 4});
  CHECK(small.pillars == std::vector<Cell>{{2, 2}});
  const auto large = default_goal_params(8, 8, 0.2);
  CHECK(large.goal == Cell{6, 6});
  CHECK(large.pillars == std::vector<Cell>{{2, 5}, {5, 2}});
  const auto env = build_grid_goal(large);
  const auto inv = maximal_invariant_set(env.mdp, env.spec);
  CHECK(grid_safe_set_connected(*env.grid, inv));
}

TEST_CASE("circle grid") {
  const GridCircleParams params;
  const auto env = build_grid_circle(params);
  CHECK(validate(env.mdp).empty());
  const auto inv = maximal_invariant_set(env.mdp, env.spec);
  CHECK(grid_cells_in(env, inv) == 100);
  const auto ring = circle_ring_states(params);
  REQUIRE_FALSE(ring.empty());
  // Cell (8, 5) sits right of the centre (4.5, 4.5) at distance ~3.54, so it is on the ring;
  // counter-clockwise there is +y.
  const State east = env.grid->state_of({8, 5});
  REQUIRE(std::find(ring.begin(), ring.end(), east) != ring.end());
  CHECK(env.mdp.reward(east, kUp) > 0.0);
  CHECK(env.mdp.reward(east, kDown) < 0.0);
  const State centre = env.grid->state_of({4, 4});
  CHECK(env.mdp.reward(centre, kStay) < 0.0);
}

TEST_CASE("circle with slip keeps a nonempty safe set") {
  GridCircleParams params;
  params.slip_prob = 0.1;
  const auto env = build_grid_circle(params);
  const auto inv = maximal_invariant_set(env.mdp, env.spec);
  CHECK(inv.omega_star == omega_star_oracle(env.mdp, env.spec));
  CHECK(grid_cells_in(env, inv) == 100);
  // Corners can only stay.
  CHECK(inv.safe_actions[env.grid->state_of({0, 0})] == std::vector<Action>{kStay});
}

TEST_CASE("spawn states respect the keepout") {
  const auto env = build_grid_goal(default_goal_params(8, 8, 0.2));
  const auto spawn = grid_spawn_states(*env.grid, env.spec);
  REQUIRE_FALSE(spawn.empty());
  for (State s : spawn) {
    const Cell c = env.grid->cell_of(s);
    CHECK(c.x >= 1);
    CHECK(c.y >= 1);
    CHECK(c.x <= 6);
    CHECK(c.y <= 6);
    for (Cell p : {Cell{2, 5}, Cell{5, 2}}) {
      CHECK(std::max(std::abs(c.x - p.x), std::abs(c.y - p.y)) >= 2);
    }
  }
  CHECK(grid_spawn_states(*env.grid, env.spec, 0).size() == 62);
}

TEST_CASE("chain3 and trap3 fixtures are valid") {
  CHECK(validate(build_chain3().mdp).empty());
  CHECK(validate(build_trap3().mdp).empty());
}
