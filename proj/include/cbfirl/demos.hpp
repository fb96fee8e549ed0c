#pragma once

#include <cstdint>
#include <vector>

#include "cbfirl/dynamics.hpp"

namespace cbfirl {

// Potential-field expert gains.
struct ExpertConfig {
  double k_att = 4.0;
  double k_rep = 0.2;
  double k_damp = 2.5;
  // Repulsion acts inside influence_factor * collision_radius.
  double influence_factor = 3.0;
};

struct TrajectoryStep {
  Observation obs;
  Vec action;
  // Predicates evaluated on the state reached after applying the action.
  bool collision = false;
  bool success = false;

  bool operator==(const TrajectoryStep&) const = default;
};

struct Trajectory {
  std::uint64_t seed = 0;
  std::vector<TrajectoryStep> steps;

  bool any_collision() const;
  bool reached_goal() const;

  bool operator==(const Trajectory&) const = default;
};

struct DemoSet {
  std::vector<Trajectory> demos;
  std::vector<Observation> safe_states;
  std::vector<Observation> pd_states;
  // Random states clear of every obstacle; extra positive examples for
  // barrier training so that h does not key on the demo route.
  std::vector<Observation> clear_states;
  double d_pd = 0.1;
  double acceptance_ratio = 1.0;
};

// Attractive term (norm-limited to a_max) toward the goal, inverse-square
// repulsion from obstacles inside the influence radius, velocity damping.
// The sum is norm-clamped to a_max.
Action expert_action(const WorldState& s, const EnvConfig& cfg, const ExpertConfig& expert = {});

// Rolls the expert out from reset(cfg, seed) until success or the horizon.
Trajectory rollout_expert(const EnvConfig& cfg, std::uint64_t seed, const ExpertConfig& expert = {});

struct DemoBatch {
  std::vector<Trajectory> trajectories;
  int attempts = 0;
  double acceptance_ratio = 0.0;
};

// Tries seeds seed, seed+1, ... keeping collision-free successful rollouts
// until n are accepted.
DemoBatch generate_demos(const EnvConfig& cfg, int n, std::uint64_t seed, const ExpertConfig& expert = {});

std::vector<Observation> collect_safe_states(const std::vector<Trajectory>& demos);

// Random world states whose nearest obstacle lies in [collision_radius, d_pd).
std::vector<Observation> collect_pd_states(const EnvConfig& cfg, int count, double d_pd, std::uint64_t seed);

// Random states whose nearest obstacle is at least `clearance` away.
std::vector<Observation> collect_clear_states(const EnvConfig& cfg, int count, double clearance, std::uint64_t seed);

struct DemoSetConfig {
  int n_demos = 64;
  std::uint64_t demo_seed = 0;
  int pd_count = 1024;
  double d_pd = 0.1;
  std::uint64_t pd_seed = 1;
  int clear_count = 2048;
  // Defaults to the expert's influence radius when non-positive.
  double clearance = 0.0;
  std::uint64_t clear_seed = 2;
};

DemoSet build_demo_set(const EnvConfig& cfg, const DemoSetConfig& dcfg, const ExpertConfig& expert = {});

}  // namespace cbfirl
