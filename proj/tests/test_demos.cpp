#include <cmath>

#include "cbfirl/demos.hpp"
#include "cbfirl/error.hpp"
#include "cbfirl/rng.hpp"
#include "doctest.h"

using namespace cbfirl;

namespace {

// Force formula written out independently of the implementation.
Vec reference_expert(const WorldState& s, const EnvConfig& cfg, const ExpertConfig& e) {
  const double gx = cfg.goal[0] - s.agent_pos[0], gy = cfg.goal[1] - s.agent_pos[1];
  double ax = e.k_att * gx, ay = e.k_att * gy;
  const double an = std::hypot(ax, ay);
  if (an > cfg.a_max) {
    ax *= cfg.a_max / an;
    ay *= cfg.a_max / an;
  }
  const double rho = e.influence_factor * cfg.collision_radius;
  for (const Obstacle& o : s.obstacles) {
    const double dx = s.agent_pos[0] - o.pos[0], dy = s.agent_pos[1] - o.pos[1];
    const double d = std::hypot(dx, dy);
    if (d > 0 && d < rho) {
      const double m = e.k_rep * (1 / (d * d) - 1 / (rho * rho));
      ax += m * dx / d;
      ay += m * dy / d;
    }
  }
  ax -= e.k_damp * s.agent_vel[0];
  ay -= e.k_damp * s.agent_vel[1];
  const double n = std::hypot(ax, ay);
  if (n > cfg.a_max) {
    ax *= cfg.a_max / n;
    ay *= cfg.a_max / n;
  }
  return {ax, ay};
}

WorldState at_rest(const Vec& pos, const std::vector<Vec>& obstacles) {
  WorldState s;
  s.agent_pos = pos;
  s.agent_vel = {0, 0};
  for (const Vec& p : obstacles) s.obstacles.push_back({p, {0, 0}});
  return s;
}

}  // namespace

TEST_CASE("expert action examples") {
  EnvConfig cfg = EnvConfig::racecar(1);
  cfg.k_nearest = 1;
  const WorldState s = at_rest({-0.5, 0.1}, {{0.5, -0.5}});
  const Vec a = expert_action(s, cfg).accel;
  const double gx = cfg.goal[0] + 0.5, gy = cfg.goal[1] - 0.1;
  CHECK(a[0] * gy - a[1] * gx == doctest::Approx(0.0).scale(1.0));
  CHECK(a[0] * gx + a[1] * gy > 0.0);

  // Goal, agent and obstacle on the diagonal.
  const WorldState c = at_rest({0.0, 0.0}, {{-0.1, -0.1}});
  const Vec ac = expert_action(c, cfg).accel;
  CHECK(ac[0] == doctest::Approx(ac[1]));

  const EnvConfig full = EnvConfig::racecar(8);
  Rng rng(6);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    WorldState r = reset(full, seed);
    r.agent_pos = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    r.agent_vel = {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)};
    // Put one obstacle inside the influence radius.
    r.obstacles[0].pos = {r.agent_pos[0] + 0.08, r.agent_pos[1] - 0.03};
    const Vec got = expert_action(r, full).accel;
    const Vec want = reference_expert(r, full, ExpertConfig{});
    CHECK(got[0] == doctest::Approx(want[0]).epsilon(1e-12));
    CHECK(got[1] == doctest::Approx(want[1]).epsilon(1e-12));
    CHECK(norm(got) <= full.a_max + 1e-12);
  }
}

TEST_CASE("demos on a nearly empty arena") {
  EnvConfig cfg = EnvConfig::racecar(1);
  cfg.k_nearest = 1;
  cfg.collision_radius = 1e-4;
  const DemoBatch one = generate_demos(cfg, 1, 0);
  REQUIRE(one.trajectories.size() == 1);
  CHECK(one.trajectories[0].reached_goal());
  CHECK_FALSE(one.trajectories[0].any_collision());
}

TEST_CASE("default demos replay safely") {
  const EnvConfig cfg = EnvConfig::racecar(8);
  const DemoBatch batch = generate_demos(cfg, 64, 0);
  REQUIRE(batch.trajectories.size() == 64);
  CHECK(batch.acceptance_ratio >= 0.5);
  CHECK(batch.acceptance_ratio == doctest::Approx(64.0 / batch.attempts));
  const DemoBatch again = generate_demos(cfg, 64, 0);
  CHECK(again.trajectories == batch.trajectories);

  for (const Trajectory& traj : batch.trajectories) {
    CHECK(static_cast<int>(traj.steps.size()) <= cfg.horizon);
    WorldState s = reset(cfg, traj.seed);
    for (const TrajectoryStep& st : traj.steps) {
      CHECK(observe(s, cfg) == st.obs);
      s = step(s, {st.action}, cfg);
      CHECK(is_collision(s, cfg) == st.collision);
      CHECK(is_success(s, cfg) == st.success);
      CHECK_FALSE(st.collision);
    }
    CHECK(traj.reached_goal());
  }

  const auto safe = collect_safe_states(batch.trajectories);
  std::size_t total = 0;
  for (const Trajectory& t : batch.trajectories) total += t.steps.size();
  CHECK(safe.size() == total);
  CHECK(safe.front() == batch.trajectories.front().steps.front().obs);
  CHECK(safe.back() == batch.trajectories.back().steps.back().obs);
  for (const Observation& o : safe) CHECK(nearest_obstacle_distance(o, cfg) >= cfg.collision_radius);
}

TEST_CASE("collect_safe_states counts") {
  Trajectory a, b;
  a.steps.resize(10);
  b.steps.resize(15);
  for (int i = 0; i < 10; ++i) a.steps[i].obs = {static_cast<double>(i)};
  for (int i = 0; i < 15; ++i) b.steps[i].obs = {100.0 + i};
  const auto s = collect_safe_states({a, b});
  CHECK(s.size() == 25);
  CHECK(s[10] == Vec{100.0});
  Trajectory one;
  one.steps.resize(1);
  one.steps[0].obs = {7.0};
  CHECK(collect_safe_states({one}) == std::vector<Observation>{{7.0}});
}

TEST_CASE("pd and clear state collectors") {
  const EnvConfig cfg = EnvConfig::racecar(8);
  const auto pd = collect_pd_states(cfg, 1024, 0.1, 1);
  CHECK(pd.size() == 1024);
  CHECK(pd == collect_pd_states(cfg, 1024, 0.1, 1));
  for (const Observation& o : pd) {
    const double d = nearest_obstacle_distance(o, cfg);
    CHECK(d >= cfg.collision_radius);
    CHECK(d < 0.1);
    CHECK(norm(std::span(o).subspan(2, 2)) <= cfg.v_max);
  }
  const auto clear = collect_clear_states(cfg, 200, 0.15, 2);
  CHECK(clear.size() == 200);
  for (const Observation& o : clear) CHECK(nearest_obstacle_distance(o, cfg) >= 0.15);

  CHECK_THROWS_AS(collect_pd_states(cfg, 10, 0.04, 1), Error);
  try {
    collect_pd_states(cfg, 10, 0.0500001, 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kThresholdInfeasible);
  }
}

TEST_CASE("expert too weak") {
  EnvConfig cfg = EnvConfig::racecar(8);
  ExpertConfig lazy;
  lazy.k_att = 0.0;
  try {
    generate_demos(cfg, 1, 0, lazy);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kExpertTooWeak);
  }
}

TEST_CASE("build_demo_set") {
  const EnvConfig cfg = EnvConfig::racecar(8);
  DemoSetConfig d;
  d.n_demos = 8;
  d.pd_count = 64;
  d.clear_count = 32;
  const DemoSet set = build_demo_set(cfg, d);
  CHECK(set.demos.size() == 8);
  CHECK(set.pd_states.size() == 64);
  CHECK(set.clear_states.size() == 32);
  CHECK(set.d_pd == 0.1);
  for (const Observation& o : set.clear_states) CHECK(nearest_obstacle_distance(o, cfg) >= 0.15);
}
