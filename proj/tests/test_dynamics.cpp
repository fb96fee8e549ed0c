#include <cmath>

#include "cbfirl/dynamics.hpp"
#include "cbfirl/error.hpp"
#include "cbfirl/rng.hpp"
#include "doctest.h"
#include "fd_oracle.hpp"

using namespace cbfirl;

namespace {

WorldState single(const Vec& pos, const Vec& vel, const std::vector<Vec>& obstacle_pos) {
  WorldState s;
  s.agent_pos = pos;
  s.agent_vel = vel;
  for (const Vec& p : obstacle_pos) s.obstacles.push_back({p, Vec(pos.size(), 0.0)});
  return s;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kIo;
}

}  // namespace

TEST_CASE("config validation") {
  CHECK_NOTHROW(EnvConfig::racecar(8).validate());
  CHECK_NOTHROW(EnvConfig::drone().validate());
  CHECK(EnvConfig::drone().horizon == 400);
  CHECK(EnvConfig::racecar(16).horizon == 100);

  EnvConfig cfg = EnvConfig::racecar(8);
  cfg.dt = 0.0;
  CHECK(kind_of([&] { cfg.validate(); }) == ErrorKind::kInvalidConfig);
  cfg = EnvConfig::racecar(2);
  cfg.k_nearest = 3;
  CHECK(kind_of([&] { cfg.validate(); }) == ErrorKind::kInvalidConfig);
  cfg = EnvConfig::racecar(8);
  cfg.goal = {-0.85, -0.9};
  CHECK(kind_of([&] { cfg.validate(); }) == ErrorKind::kInvalidConfig);
  cfg = EnvConfig::racecar(8);
  cfg.dim = 4;
  CHECK(kind_of([&] { cfg.validate(); }) == ErrorKind::kInvalidConfig);
  cfg = EnvConfig::racecar(8);
  cfg.start = {1.5, 0.0};
  CHECK(kind_of([&] { cfg.validate(); }) == ErrorKind::kInvalidConfig);
}

TEST_CASE("reset") {
  const EnvConfig cfg = EnvConfig::racecar(8);
  const WorldState a = reset(cfg, 7);
  CHECK(a == reset(cfg, 7));
  CHECK(a.t == 0);
  CHECK(a.agent_pos == cfg.start);
  CHECK(a.agent_vel == Vec{0.0, 0.0});
  CHECK(!(a == reset(cfg, 8)));

  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const WorldState s = reset(cfg, seed);
    REQUIRE(s.obstacles.size() == 8);
    for (const Obstacle& o : s.obstacles) {
      CHECK(distance(o.pos, cfg.start) > 2 * cfg.collision_radius);
      CHECK(distance(o.pos, cfg.goal) > 2 * cfg.collision_radius);
      CHECK(norm(o.vel) <= cfg.obstacle_speed_max);
      for (double x : o.pos) CHECK(std::abs(x) <= cfg.arena_half_width);
    }
  }

  EnvConfig crowded = EnvConfig::racecar(8);
  crowded.collision_radius = 2.0;
  crowded.goal_radius = 0.1;
  CHECK(kind_of([&] { reset(crowded, 0); }) == ErrorKind::kConfigInfeasible);
}

TEST_CASE("step examples") {
  EnvConfig cfg = EnvConfig::racecar(1);
  cfg.v_max = 2.0;
  WorldState s = single({0, 0}, {0, 0}, {{0.5, 0.5}});
  WorldState n = step(s, {{0, 0}}, cfg);
  CHECK(n.agent_pos == Vec{0, 0});
  CHECK(n.agent_vel == Vec{0, 0});
  CHECK(n.t == 1);

  s = single({0, 0}, {1, 0}, {{0.5, 0.5}});
  n = step(s, {{0, 0}}, cfg);
  CHECK(n.agent_pos[0] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(n.agent_pos[1] == 0.0);
  CHECK(s.agent_pos == Vec{0, 0});

  cfg = EnvConfig::racecar(1);
  s = single({0, 0}, {0.49, 0}, {{0.5, 0.5}});
  n = step(s, {{1, 0}}, cfg);
  CHECK(norm(n.agent_vel) == doctest::Approx(cfg.v_max).epsilon(1e-15));

  // Action components are clamped before integration.
  s = single({0, 0}, {0, 0}, {{0.5, 0.5}});
  n = step(s, {{5, -5}}, cfg);
  CHECK(n.agent_vel[0] == doctest::Approx(cfg.a_max * cfg.dt));
  CHECK(n.agent_vel[1] == doctest::Approx(-cfg.a_max * cfg.dt));

  s.t = cfg.horizon;
  CHECK(kind_of([&] { step(s, {{0, 0}}, cfg); }) == ErrorKind::kEpisodeFinished);
}

TEST_CASE("step invariants over random rollouts") {
  const EnvConfig cfg = EnvConfig::racecar(8);
  Rng rng(11);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    WorldState s = reset(cfg, seed);
    std::vector<double> speeds;
    for (const Obstacle& o : s.obstacles) speeds.push_back(norm(o.vel));
    const std::size_t size = observe(s, cfg).size();
    while (s.t < cfg.horizon) {
      const Action a{{rng.uniform(-2, 2), rng.uniform(-2, 2)}};
      const WorldState n = step(s, a, cfg);
      CHECK(n == step(s, a, cfg));
      CHECK(norm(n.agent_vel) <= cfg.v_max + 1e-12);
      for (std::size_t i = 0; i < n.obstacles.size(); ++i) {
        for (double x : n.obstacles[i].pos) CHECK(std::abs(x) <= cfg.arena_half_width);
        CHECK(norm(n.obstacles[i].vel) == doctest::Approx(speeds[i]).epsilon(1e-12));
      }
      for (double x : n.agent_pos) CHECK(std::abs(x) <= cfg.arena_half_width);
      CHECK(observe(n, cfg).size() == size);
      s = n;
    }
  }
}

TEST_CASE("observe ordering") {
  EnvConfig cfg = EnvConfig::racecar(1);
  cfg.k_nearest = 1;
  WorldState s = single({0.1, 0.2}, {0.3, 0.0}, {{0.5, 0.2}});
  s.obstacles[0].vel = {0.05, -0.05};
  const Observation o = observe(s, cfg);
  REQUIRE(o.size() == 8);
  CHECK(o[0] == 0.1);
  CHECK(o[2] == 0.3);
  CHECK(o[4] == doctest::Approx(0.4));
  CHECK(o[5] == 0.0);
  CHECK(o[6] == 0.05);
  CHECK(o[7] == -0.05);

  cfg = EnvConfig::racecar(3);
  cfg.k_nearest = 2;
  s = single({0, 0}, {0, 0}, {{0.3, 0}, {0.1, 0}, {0.2, 0}});
  Observation o2 = observe(s, cfg);
  CHECK(o2[4] == doctest::Approx(0.1));
  CHECK(o2[8] == doctest::Approx(0.2));

  // Equidistant obstacles keep index order.
  s = single({0, 0}, {0, 0}, {{0, 0.2}, {0.2, 0}, {0.5, 0.5}});
  o2 = observe(s, cfg);
  CHECK(o2[4] == 0.0);
  CHECK(o2[5] == 0.2);
  CHECK(o2[8] == 0.2);
  CHECK(o2[9] == 0.0);
}

TEST_CASE("distance predicates") {
  EnvConfig cfg = EnvConfig::racecar(3);
  cfg.k_nearest = 3;
  WorldState s = single({0, 0}, {0, 0}, {{1.0, 0}, {0, 0.4}, {2.2, 0}});
  CHECK(min_obstacle_distance(s) == doctest::Approx(0.4));
  s = single({0.3, 0.3}, {0, 0}, {{0.3, 0.3}});
  CHECK(min_obstacle_distance(s) == 0.0);
  CHECK(is_collision(s, cfg));
  s = single({0, 0}, {0, 0}, {{cfg.collision_radius, 0}});
  CHECK_FALSE(is_collision(s, cfg));
  s = single({0, 0}, {0, 0}, {{0.99 * cfg.collision_radius, 0}});
  CHECK(is_collision(s, cfg));

  s = single(cfg.goal, {0, 0}, {{0, 0}});
  CHECK(is_success(s, cfg));
  s = single({cfg.goal[0] - cfg.goal_radius, cfg.goal[1]}, {0, 0}, {{0, 0}});
  CHECK(is_success(s, cfg));
  CHECK_FALSE(is_success(reset(cfg, 0), cfg));

  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    const WorldState r = reset(EnvConfig::racecar(8), static_cast<std::uint64_t>(i));
    double best = 1e9;
    for (const Obstacle& o : r.obstacles) {
      best = std::min(best, std::hypot(o.pos[0] - r.agent_pos[0], o.pos[1] - r.agent_pos[1]));
    }
    CHECK(min_obstacle_distance(r) == doctest::Approx(best).epsilon(1e-14));
  }
}

TEST_CASE("advance_observation agrees with step on tracked obstacles") {
  EnvConfig cfg = EnvConfig::racecar(8);
  cfg.k_nearest = 8;
  Rng rng(2);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    WorldState s = reset(cfg, seed);
    s.agent_pos = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    s.agent_vel = {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)};
    const Vec accel = {rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
    const Observation next = advance_observation(observe(s, cfg), accel, cfg);
    const WorldState n = step(s, {accel}, cfg);
    // Same multiset of obstacles, only the ordering may differ.
    Observation expected = observe(n, cfg);
    for (int k = 0; k < 4; ++k) CHECK(next[k] == doctest::Approx(expected[k]).epsilon(1e-12));
    CHECK(nearest_obstacle_distance(expected, cfg) == doctest::Approx(min_obstacle_distance(n)).epsilon(1e-12));
    double next_min = 1e9;
    for (int j = 0; j < cfg.k_nearest; ++j) next_min = std::min(next_min, std::hypot(next[4 + 4 * j], next[5 + 4 * j]));
    CHECK(next_min == doctest::Approx(min_obstacle_distance(n)).epsilon(1e-12));
  }
}

TEST_CASE("advance_observation_vjp matches finite differences") {
  const EnvConfig cfg = EnvConfig::racecar(4);
  Rng rng(9);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    WorldState s = reset(cfg, seed);
    s.agent_pos = {rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)};
    // Fast agents exercise the speed clamp.
    const double speed = seed % 2 == 0 ? 0.2 : 0.499;
    const double angle = rng.uniform(0, 6.28);
    s.agent_vel = {speed * std::cos(angle), speed * std::sin(angle)};
    const Observation obs = observe(s, cfg);
    Vec accel = {rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9)};
    Vec cot(obs.size());
    for (double& c : cot) c = rng.uniform(-1, 1);
    const Vec analytic = advance_observation_vjp(obs, accel, cfg, cot);
    const auto f = [&] {
      const Observation n = advance_observation(obs, accel, cfg);
      double dot = 0.0;
      for (std::size_t i = 0; i < n.size(); ++i) dot += cot[i] * n[i];
      return dot;
    };
    const Vec numeric = cbfirl::testing::central_difference(accel, f);
    CHECK(cbfirl::testing::max_relative_error(analytic, numeric) < 1e-4);
  }
}
