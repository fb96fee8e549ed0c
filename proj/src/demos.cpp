#include "cbfirl/demos.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cbfirl/error.hpp"
#include "cbfirl/rng.hpp"

namespace cbfirl {

namespace {

void clamp_norm(Vec& v, double limit) {
  const double n = norm(v);
  if (n > limit) {
    for (double& x : v) x *= limit / n;
  }
}

constexpr int kDemoProbeAttempts = 1000;
constexpr double kMinDemoAcceptance = 0.05;
constexpr long kPdProbeProposals = 1000000;
constexpr double kMinPdAcceptance = 0.001;

}  // namespace

bool Trajectory::any_collision() const {
  return std::any_of(steps.begin(), steps.end(), [](const TrajectoryStep& s) { return s.collision; });
}

bool Trajectory::reached_goal() const { return !steps.empty() && steps.back().success; }

Action expert_action(const WorldState& s, const EnvConfig& cfg, const ExpertConfig& expert) {
  const int d = cfg.dim;
  Vec attract(d);
  for (int i = 0; i < d; ++i) attract[i] = expert.k_att * (cfg.goal[i] - s.agent_pos[i]);
  clamp_norm(attract, cfg.a_max);

  Vec accel = attract;
  const double influence = expert.influence_factor * cfg.collision_radius;
  for (const Obstacle& ob : s.obstacles) {
    const double dist = distance(s.agent_pos, ob.pos);
    if (dist >= influence || dist <= 0.0) continue;
    const double mag = expert.k_rep * (1.0 / (dist * dist) - 1.0 / (influence * influence));
    for (int i = 0; i < d; ++i) accel[i] += mag * (s.agent_pos[i] - ob.pos[i]) / dist;
  }
  for (int i = 0; i < d; ++i) accel[i] -= expert.k_damp * s.agent_vel[i];
  clamp_norm(accel, cfg.a_max);
  return Action{accel};
}

Trajectory rollout_expert(const EnvConfig& cfg, std::uint64_t seed, const ExpertConfig& expert) {
  Trajectory traj;
  traj.seed = seed;
  WorldState s = reset(cfg, seed);
  while (s.t < cfg.horizon) {
    TrajectoryStep st;
    st.obs = observe(s, cfg);
    Action a = expert_action(s, cfg, expert);
    s = step(s, a, cfg);
    st.action = std::move(a.accel);
    st.collision = is_collision(s, cfg);
    st.success = is_success(s, cfg);
    const bool done = st.success;
    traj.steps.push_back(std::move(st));
    if (done) break;
  }
  return traj;
}

DemoBatch generate_demos(const EnvConfig& cfg, int n, std::uint64_t seed, const ExpertConfig& expert) {
  if (n < 1) throw Error(ErrorKind::kInvalidConfig, "demo count must be at least 1");
  DemoBatch batch;
  while (static_cast<int>(batch.trajectories.size()) < n) {
    Trajectory traj = rollout_expert(cfg, seed + static_cast<std::uint64_t>(batch.attempts), expert);
    ++batch.attempts;
    if (traj.reached_goal() && !traj.any_collision()) batch.trajectories.push_back(std::move(traj));
    if (batch.attempts == kDemoProbeAttempts &&
        static_cast<double>(batch.trajectories.size()) / kDemoProbeAttempts < kMinDemoAcceptance) {
      throw Error(ErrorKind::kExpertTooWeak,
                  std::to_string(batch.trajectories.size()) + " of " + std::to_string(kDemoProbeAttempts) +
                      " expert rollouts were safe and successful");
    }
  }
  batch.acceptance_ratio = static_cast<double>(batch.trajectories.size()) / batch.attempts;
  return batch;
}

std::vector<Observation> collect_safe_states(const std::vector<Trajectory>& demos) {
  std::vector<Observation> states;
  for (const Trajectory& traj : demos) {
    for (const TrajectoryStep& st : traj.steps) states.push_back(st.obs);
  }
  return states;
}

namespace {

// Uniform agent position, velocity uniform in the v_max ball, reset-sampled
// obstacles; keeps states whose nearest obstacle distance lies in [lo, hi).
std::vector<Observation> sample_band(const EnvConfig& cfg, int count, double lo, double hi, std::uint64_t seed) {
  Rng rng(seed);
  const double hw = cfg.arena_half_width;
  std::vector<Observation> states;
  long proposals = 0;
  while (static_cast<int>(states.size()) < count) {
    WorldState s = reset(cfg, rng.next_u64());
    for (double& x : s.agent_pos) x = rng.uniform(-hw, hw);
    do {
      for (double& x : s.agent_vel) x = rng.uniform(-1.0, 1.0);
    } while (norm(s.agent_vel) > 1.0);
    for (double& x : s.agent_vel) x *= cfg.v_max;
    ++proposals;
    const double dmin = min_obstacle_distance(s);
    if (dmin >= lo && dmin < hi) states.push_back(observe(s, cfg));
    if (proposals == kPdProbeProposals &&
        static_cast<double>(states.size()) / kPdProbeProposals < kMinPdAcceptance) {
      throw Error(ErrorKind::kThresholdInfeasible,
                  "only " + std::to_string(states.size()) + " states in the distance band in " +
                      std::to_string(kPdProbeProposals) + " proposals");
    }
  }
  return states;
}

}  // namespace

std::vector<Observation> collect_pd_states(const EnvConfig& cfg, int count, double d_pd, std::uint64_t seed) {
  cfg.validate();
  if (!(d_pd > cfg.collision_radius)) {
    throw Error(ErrorKind::kInvalidConfig, "d_pd must exceed collision_radius");
  }
  return sample_band(cfg, count, cfg.collision_radius, d_pd, seed);
}

std::vector<Observation> collect_clear_states(const EnvConfig& cfg, int count, double clearance, std::uint64_t seed) {
  cfg.validate();
  return sample_band(cfg, count, clearance, std::numeric_limits<double>::infinity(), seed);
}

DemoSet build_demo_set(const EnvConfig& cfg, const DemoSetConfig& dcfg, const ExpertConfig& expert) {
  DemoBatch batch = generate_demos(cfg, dcfg.n_demos, dcfg.demo_seed, expert);
  DemoSet set;
  set.demos = std::move(batch.trajectories);
  set.acceptance_ratio = batch.acceptance_ratio;
  set.safe_states = collect_safe_states(set.demos);
  set.pd_states = collect_pd_states(cfg, dcfg.pd_count, dcfg.d_pd, dcfg.pd_seed);
  const double clearance =
      dcfg.clearance > 0.0 ? dcfg.clearance : expert.influence_factor * cfg.collision_radius;
  if (dcfg.clear_count > 0) {
    set.clear_states = collect_clear_states(cfg, dcfg.clear_count, clearance, dcfg.clear_seed);
  }
  set.d_pd = dcfg.d_pd;
  return set;
}

}  // namespace cbfirl
