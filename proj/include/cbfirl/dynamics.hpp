#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace cbfirl {

using Vec = std::vector<double>;

// Point-mass obstacle-avoidance world. The arena is the cube
// [-arena_half_width, arena_half_width]^dim.
struct EnvConfig {
  int dim = 2;
  int n_obstacles = 8;
  int k_nearest = 4;
  double dt = 0.1;
  int horizon = 100;
  double arena_half_width = 1.0;
  Vec start = {-0.9, -0.9};
  Vec goal = {0.9, 0.9};
  double goal_radius = 0.1;
  // Agent radius plus obstacle radius.
  double collision_radius = 0.05;
  double obstacle_speed_max = 0.1;
  double a_max = 1.0;
  double v_max = 0.5;
  std::uint64_t seed = 0;

  static EnvConfig racecar(int n_obstacles);
  static EnvConfig drone(int n_obstacles = 32);

  // Throws Error(kInvalidConfig) when an invariant does not hold.
  void validate() const;

  int observation_size() const { return 2 * dim * (1 + k_nearest); }
};

struct Obstacle {
  Vec pos;
  Vec vel;

  bool operator==(const Obstacle&) const = default;
};

struct WorldState {
  int t = 0;
  Vec agent_pos;
  Vec agent_vel;
  std::vector<Obstacle> obstacles;

  bool operator==(const WorldState&) const = default;
};

// [agent_pos, agent_vel, (rel_pos_k, obs_vel_k) for the k nearest obstacles].
using Observation = Vec;

struct Action {
  Vec accel;

  bool operator==(const Action&) const = default;
};

WorldState reset(const EnvConfig& cfg, std::uint64_t seed);

// Semi-implicit Euler double integrator; obstacles move at constant velocity
// and reflect elastically off the arena walls.
WorldState step(const WorldState& s, const Action& a, const EnvConfig& cfg);

Observation observe(const WorldState& s, const EnvConfig& cfg);

double min_obstacle_distance(const WorldState& s);
bool is_collision(const WorldState& s, const EnvConfig& cfg);
bool is_success(const WorldState& s, const EnvConfig& cfg);

double norm(std::span<const double> v);
double distance(std::span<const double> a, std::span<const double> b);

// Distance to the nearest tracked obstacle, read off an observation.
double nearest_obstacle_distance(const Observation& obs, const EnvConfig& cfg);

// One-step transition applied directly to an observation: the agent advances
// under the action exactly as in step(), and each tracked obstacle advances by
// its own velocity with wall reflection. Tracked obstacles are not re-sorted.
Observation advance_observation(const Observation& obs, std::span<const double> accel,
                                const EnvConfig& cfg);

// Vector-Jacobian product of advance_observation with respect to the action.
Vec advance_observation_vjp(const Observation& obs, std::span<const double> accel,
                            const EnvConfig& cfg, std::span<const double> next_cotangent);

}  // namespace cbfirl
