#include "cbfirl/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "cbfirl/error.hpp"
#include "cbfirl/rng.hpp"

namespace cbfirl {

namespace {

constexpr int kMaxPlacementAttempts = 10000;

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::kInvalidConfig, what);
}

bool inside_arena(std::span<const double> p, double half_width) {
  return std::all_of(p.begin(), p.end(), [&](double x) { return std::abs(x) <= half_width; });
}

void reflect(double& pos, double& vel, double half_width) {
  // Loop covers displacements longer than the arena width.
  for (;;) {
    if (pos > half_width) {
      pos = 2.0 * half_width - pos;
      vel = -vel;
    } else if (pos < -half_width) {
      pos = -2.0 * half_width - pos;
      vel = -vel;
    } else {
      return;
    }
  }
}

// Velocity after the clamped acceleration and the speed clamp.
Vec integrate_velocity(std::span<const double> vel, std::span<const double> accel,
                       const EnvConfig& cfg) {
  Vec v(vel.begin(), vel.end());
  for (int i = 0; i < cfg.dim; ++i) {
    v[i] += std::clamp(accel[i], -cfg.a_max, cfg.a_max) * cfg.dt;
  }
  const double speed = norm(v);
  if (speed > cfg.v_max) {
    const double scale = cfg.v_max / speed;
    for (double& x : v) x *= scale;
  }
  return v;
}

}  // namespace

EnvConfig EnvConfig::racecar(int n_obstacles) {
  EnvConfig cfg;
  cfg.n_obstacles = n_obstacles;
  return cfg;
}

EnvConfig EnvConfig::drone(int n_obstacles) {
  EnvConfig cfg;
  cfg.dim = 3;
  cfg.n_obstacles = n_obstacles;
  cfg.horizon = 400;
  cfg.start = {-0.9, -0.9, -0.9};
  cfg.goal = {0.9, 0.9, 0.9};
  return cfg;
}

void EnvConfig::validate() const {
  require(dim == 2 || dim == 3, "dim must be 2 or 3");
  require(dt > 0.0, "dt must be positive");
  require(horizon >= 1, "horizon must be at least 1");
  require(n_obstacles >= 1, "n_obstacles must be at least 1");
  require(k_nearest >= 1 && k_nearest <= n_obstacles, "k_nearest must lie in [1, n_obstacles]");
  require(arena_half_width > 0.0, "arena_half_width must be positive");
  require(goal_radius > 0.0 && collision_radius > 0.0, "radii must be positive");
  require(obstacle_speed_max >= 0.0, "obstacle_speed_max must be non-negative");
  require(a_max > 0.0 && v_max > 0.0, "a_max and v_max must be positive");
  require(static_cast<int>(start.size()) == dim && static_cast<int>(goal.size()) == dim,
          "start and goal must have dim components");
  require(inside_arena(start, arena_half_width) && inside_arena(goal, arena_half_width),
          "start and goal must lie inside the arena");
  require(distance(start, goal) > goal_radius, "start must lie outside the goal region");
}

double norm(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

double distance(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

WorldState reset(const EnvConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  WorldState s;
  s.agent_pos = cfg.start;
  s.agent_vel.assign(cfg.dim, 0.0);
  const double clearance = 2.0 * cfg.collision_radius;
  const double hw = cfg.arena_half_width;
  s.obstacles.reserve(cfg.n_obstacles);
  for (int k = 0; k < cfg.n_obstacles; ++k) {
    Obstacle ob;
    ob.pos.resize(cfg.dim);
    bool placed = false;
    for (int attempt = 0; attempt < kMaxPlacementAttempts && !placed; ++attempt) {
      for (double& x : ob.pos) x = rng.uniform(-hw, hw);
      placed = distance(ob.pos, cfg.start) > clearance && distance(ob.pos, cfg.goal) > clearance;
    }
    if (!placed) {
      throw Error(ErrorKind::kConfigInfeasible,
                  "could not place obstacle " + std::to_string(k) + " outside the start/goal clearance");
    }
    ob.vel.resize(cfg.dim);
    do {
      for (double& x : ob.vel) x = rng.uniform(-1.0, 1.0);
    } while (norm(ob.vel) > 1.0);
    for (double& x : ob.vel) x *= cfg.obstacle_speed_max;
    s.obstacles.push_back(std::move(ob));
  }
  return s;
}

WorldState step(const WorldState& s, const Action& a, const EnvConfig& cfg) {
  if (s.t >= cfg.horizon) {
    throw Error(ErrorKind::kEpisodeFinished, "step called at t = " + std::to_string(s.t));
  }
  if (static_cast<int>(a.accel.size()) != cfg.dim) {
    throw Error(ErrorKind::kDimensionMismatch, "action has wrong dimension");
  }
  const double hw = cfg.arena_half_width;
  WorldState next = s;
  next.agent_vel = integrate_velocity(s.agent_vel, a.accel, cfg);
  for (int i = 0; i < cfg.dim; ++i) {
    next.agent_pos[i] = std::clamp(s.agent_pos[i] + next.agent_vel[i] * cfg.dt, -hw, hw);
  }
  for (Obstacle& ob : next.obstacles) {
    for (int i = 0; i < cfg.dim; ++i) {
      ob.pos[i] += ob.vel[i] * cfg.dt;
      reflect(ob.pos[i], ob.vel[i], hw);
    }
  }
  ++next.t;
  return next;
}

Observation observe(const WorldState& s, const EnvConfig& cfg) {
  const int n = static_cast<int>(s.obstacles.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Vec dist(n);
  for (int k = 0; k < n; ++k) dist[k] = distance(s.obstacles[k].pos, s.agent_pos);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return dist[a] < dist[b]; });

  Observation obs;
  obs.reserve(cfg.observation_size());
  obs.insert(obs.end(), s.agent_pos.begin(), s.agent_pos.end());
  obs.insert(obs.end(), s.agent_vel.begin(), s.agent_vel.end());
  for (int j = 0; j < cfg.k_nearest; ++j) {
    const Obstacle& ob = s.obstacles[order[j]];
    for (int i = 0; i < cfg.dim; ++i) obs.push_back(ob.pos[i] - s.agent_pos[i]);
    obs.insert(obs.end(), ob.vel.begin(), ob.vel.end());
  }
  return obs;
}

double min_obstacle_distance(const WorldState& s) {
  double best = std::numeric_limits<double>::infinity();
  for (const Obstacle& ob : s.obstacles) best = std::min(best, distance(ob.pos, s.agent_pos));
  return best;
}

bool is_collision(const WorldState& s, const EnvConfig& cfg) {
  return min_obstacle_distance(s) < cfg.collision_radius;
}

bool is_success(const WorldState& s, const EnvConfig& cfg) {
  return distance(s.agent_pos, cfg.goal) <= cfg.goal_radius;
}

double nearest_obstacle_distance(const Observation& obs, const EnvConfig& cfg) {
  return norm(std::span<const double>(obs).subspan(2 * cfg.dim, cfg.dim));
}

Observation advance_observation(const Observation& obs, std::span<const double> accel,
                                const EnvConfig& cfg) {
  const int d = cfg.dim;
  const double hw = cfg.arena_half_width;
  std::span<const double> o(obs);
  Observation next(obs.size());
  const Vec vel = integrate_velocity(o.subspan(d, d), accel, cfg);
  for (int i = 0; i < d; ++i) {
    next[i] = std::clamp(obs[i] + vel[i] * cfg.dt, -hw, hw);
    next[d + i] = vel[i];
  }
  for (int k = 0; k < cfg.k_nearest; ++k) {
    const int base = 2 * d * (1 + k);
    for (int i = 0; i < d; ++i) {
      double pos = obs[i] + obs[base + i];
      double v = obs[base + d + i];
      pos += v * cfg.dt;
      reflect(pos, v, hw);
      next[base + i] = pos - next[i];
      next[base + d + i] = v;
    }
  }
  return next;
}

Vec advance_observation_vjp(const Observation& obs, std::span<const double> accel,
                            const EnvConfig& cfg, std::span<const double> next_cotangent) {
  const int d = cfg.dim;
  const double hw = cfg.arena_half_width;
  const auto& g = next_cotangent;

  Vec pre(d);  // velocity before the speed clamp
  for (int i = 0; i < d; ++i) {
    pre[i] = obs[d + i] + std::clamp(accel[i], -cfg.a_max, cfg.a_max) * cfg.dt;
  }
  const double speed = norm(pre);
  Vec vel = pre;
  if (speed > cfg.v_max) {
    for (double& x : vel) x *= cfg.v_max / speed;
  }

  // Cotangent of the next agent position: its own slot minus every relative slot.
  Vec g_vel(d);
  for (int i = 0; i < d; ++i) {
    double g_pos = g[i];
    for (int k = 0; k < cfg.k_nearest; ++k) g_pos -= g[2 * d * (1 + k) + i];
    const double unclamped = obs[i] + vel[i] * cfg.dt;
    const bool clamped = unclamped > hw || unclamped < -hw;
    g_vel[i] = g[d + i] + (clamped ? 0.0 : cfg.dt * g_pos);
  }

  // Speed clamp: J = (v_max / |w|) (I - w w^T / |w|^2), symmetric.
  Vec g_pre = g_vel;
  if (speed > cfg.v_max) {
    double dot = 0.0;
    for (int i = 0; i < d; ++i) dot += pre[i] * g_vel[i];
    const double scale = cfg.v_max / speed;
    for (int i = 0; i < d; ++i) g_pre[i] = scale * (g_vel[i] - pre[i] * dot / (speed * speed));
  }

  Vec g_accel(d);
  for (int i = 0; i < d; ++i) {
    const bool saturated = accel[i] > cfg.a_max || accel[i] < -cfg.a_max;
    g_accel[i] = saturated ? 0.0 : cfg.dt * g_pre[i];
  }
  return g_accel;
}

}  // namespace cbfirl
