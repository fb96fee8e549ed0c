#include <cmath>
#include <sstream>

#include "cbfirl/config.hpp"
#include "cbfirl/error.hpp"
#include "cbfirl/harness.hpp"
#include "cbfirl/io.hpp"
#include "doctest.h"

using namespace cbfirl;

namespace {

// Linear proportional-derivative controller toward the goal as a policy.
Policy pd_policy(const EnvConfig& env) {
  Policy p;
  p.mean_net = Mlp({env.observation_size(), env.dim});
  auto w = p.mean_net.params();
  const int in = env.observation_size();
  for (int i = 0; i < env.dim; ++i) {
    w[i * in + i] = -4.0;
    w[i * in + env.dim + i] = -2.5;
    w[p.mean_net.bias_offset(0) + i] = 4.0 * env.goal[i];
  }
  p.log_std.assign(env.dim, -1.0);
  return p;
}

template <class T, class W, class R>
T round_trip(const T& value, W write, R read) {
  std::stringstream ss;
  write(ss, value);
  return read(ss);
}

}  // namespace

TEST_CASE("evaluate") {
  EnvConfig env = EnvConfig::racecar(8);
  env.collision_radius = 1e-6;
  const Metrics good = evaluate(pd_policy(env), env, 10, 3);
  CHECK(good.success_rate == 1.0);
  CHECK(good.collision_rate == 0.0);
  CHECK(good.n_episodes == 10);
  CHECK(good.episodes.front().seed == 3);
  CHECK(good.episodes.back().seed == 12);

  Policy still = pd_policy(env);
  for (double& v : still.mean_net.params()) v = 0.0;
  const Metrics stuck = evaluate(still, env, 5, 0);
  CHECK(stuck.success_rate == 0.0);
  for (const EpisodeRecord& e : stuck.episodes) CHECK(e.steps == env.horizon);

  const EnvConfig full = EnvConfig::racecar(8);
  const Metrics a = evaluate(pd_policy(full), full, 20, 100);
  CHECK(a == evaluate(pd_policy(full), full, 20, 100));
  CHECK(Metrics::from_records(a.episodes) == a);
  CHECK_THROWS_AS(evaluate(still, env, 0, 0), Error);
}

TEST_CASE("metrics from records") {
  const Metrics m = Metrics::from_records({{1, true, false, 10}, {2, true, true, 12}, {3, false, true, 100},
                                           {4, false, false, 100}});
  CHECK(m.success_rate == 0.5);
  CHECK(m.collision_rate == 0.5);
  CHECK(m.n_episodes == 4);
}

TEST_CASE("heatmap") {
  const EnvConfig env = EnvConfig::racecar(8);
  Barrier b{Mlp({env.observation_size(), 8, 1})};
  b.h_net.params()[b.h_net.bias_offset(1)] = 0.1;
  const WorldState frozen = reset(env, 0);
  const Heatmap map = heatmap(b, frozen, env, 16);
  CHECK(map.values.size() == 256);
  for (double v : map.values) CHECK(v == 0.1);

  const Heatmap corners = heatmap(b, frozen, env, 2);
  CHECK(corners.values.size() == 4);
  CHECK(corners.x_at(0) == -1.0);
  CHECK(corners.x_at(1) == 1.0);
  CHECK(corners.y_at(1) == 1.0);

  const Heatmap big = heatmap(b, frozen, env, 64);
  CHECK(big.values.size() == 4096);

  Rng rng(1);
  const Barrier r = Barrier::init(env, {8}, 0.1, rng);
  const Heatmap rm = heatmap(r, frozen, env, 5);
  WorldState probe = frozen;
  probe.agent_pos = {rm.x_at(3), rm.y_at(1)};
  probe.agent_vel = {0, 0};
  CHECK(rm.values[1 * 5 + 3] == r.value(observe(probe, env)));

  const EnvConfig drone = EnvConfig::drone();
  Barrier b3{Mlp({drone.observation_size(), 1})};
  try {
    heatmap(b3, reset(drone, 0), drone, 8);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kUnsupportedDimension);
  }
}

TEST_CASE("heatmap contrast") {
  EnvConfig env = EnvConfig::racecar(1);
  env.k_nearest = 1;
  WorldState frozen;
  frozen.agent_pos = env.start;
  frozen.agent_vel = {0, 0};
  frozen.obstacles = {{{0.0, 0.0}, {0.0, 0.0}}};
  Heatmap map;
  map.resolution = 3;
  map.x_min = map.y_min = -1;
  map.x_max = map.y_max = 1;
  map.values = {1, 2, 3, 4, -5, 6, 7, 8, 9};
  const HeatmapContrast c = heatmap_contrast(map, frozen, 0.1, 0.2);
  CHECK(c.near_cells == 1);
  CHECK(c.near_mean == -5.0);
  CHECK(c.far_cells == 8);
  CHECK(c.far_mean == doctest::Approx(40.0 / 8));
}

TEST_CASE("config parsing") {
  const RunConfig def;
  const RunConfig back = parse_config(def.to_text());
  CHECK(back.to_text() == def.to_text());

  const RunConfig c = parse_config("# comment\nseed = 7\n\nmode = airl\nenv = racecar16\nw = 0.25\n");
  CHECK(c.seed == 7);
  CHECK(c.mode == Mode::kAirl);
  CHECK(c.env.n_obstacles == 16);
  CHECK(c.cbf.w == 0.25);
  CHECK(parse_config(c.to_text()).to_text() == c.to_text());

  const RunConfig drone = parse_config("n_obstacles = 32\nenv = drone32\n");
  CHECK(drone.env.dim == 3);
  CHECK(drone.env.n_obstacles == 32);

  const RunConfig dt = parse_config("dt = 0.05\n");
  CHECK(dt.cbf.dt == 0.05);

  try {
    parse_config("bogus_key = 1\n");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("bogus_key") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("seed = x\n"), Error);
  CHECK_THROWS_AS(parse_config("no equals sign\n"), Error);
  CHECK_THROWS_AS(parse_config("lambda = 20\n"), Error);
  CHECK(RunConfig::keys().size() > 50);
}

TEST_CASE("file round trips") {
  const EnvConfig env = EnvConfig::racecar(8);
  const DemoBatch demos = generate_demos(env, 3, 0);
  CHECK(round_trip(demos.trajectories, write_trajectories, read_trajectories) == demos.trajectories);

  const auto pd = collect_pd_states(env, 20, 0.1, 1);
  CHECK(round_trip(pd, write_states, read_states) == pd);

  const Metrics m = evaluate(pd_policy(env), env, 6, 0);
  CHECK(round_trip(m, write_metrics, read_metrics) == m);

  Rng rng(2);
  const Barrier b = Barrier::init(env, {8}, 0.1, rng);
  const Heatmap map = heatmap(b, reset(env, 0), env, 7);
  CHECK(round_trip(map, write_heatmap, read_heatmap) == map);

  std::vector<IterationRecord> log(3);
  log[0].iteration = 1;
  log[0].loss_d = 1.0 / 3.0;
  log[1].iteration = 2;
  log[1].success_rate = 0.25;
  log[2].estimate_y = std::numeric_limits<double>::infinity();
  const auto back = round_trip(log, write_metrics_log, read_metrics_log);
  REQUIRE(back.size() == 3);
  CHECK(back[0].loss_d == log[0].loss_d);
  CHECK(std::isnan(back[0].success_rate));
  CHECK(back[1].success_rate == 0.25);
  CHECK(std::isinf(back[2].estimate_y));

  BarrierReport rep{60, 1.25, 0.99, 100, 25};
  const BarrierReport rb = round_trip(rep, write_barrier_report, read_barrier_report);
  CHECK(rb.epochs_run == 60);
  CHECK(rb.final_loss == 1.25);
  CHECK(rb.n_heldout == 25);

  const Policy p = Policy::init(env, {8}, -0.7, rng);
  CHECK(round_trip(p, write_policy, read_policy) == p);

  std::stringstream bad("episode_id,t,obs_0,action_0,collision,success\n0,1,0.5,0.5,0,0\n");
  CHECK_THROWS_AS(read_trajectories(bad), Error);
  std::stringstream bad_map("resolution = 2\nx_min = -1\nx_max = 1\ny_min = -1\ny_max = 1\n1,2\n");
  CHECK_THROWS_AS(read_heatmap(bad_map), Error);
}
