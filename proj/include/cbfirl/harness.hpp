#pragma once

#include <cstdint>
#include <vector>

#include "cbfirl/airl.hpp"
#include "cbfirl/cbf.hpp"
#include "cbfirl/dynamics.hpp"

namespace cbfirl {

struct Metrics {
  double success_rate = 0.0;
  double collision_rate = 0.0;
  int n_episodes = 0;
  std::vector<EpisodeRecord> episodes;

  // Rates as flag means over the episode records.
  static Metrics from_records(std::vector<EpisodeRecord> records);

  bool operator==(const Metrics&) const = default;
};

// Deterministic rollouts of the policy mean; episode i resets with seed + i
// and ends at the goal or the horizon. Success and collision are independent
// any-step flags.
Metrics evaluate(const Policy& p, const EnvConfig& cfg, int n_episodes, std::uint64_t seed);

struct Heatmap {
  int resolution = 0;
  double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;
  // Row-major: row r is y = y_min + r * (y_max - y_min) / (resolution - 1),
  // column c is x = x_min + c * (x_max - x_min) / (resolution - 1).
  std::vector<double> values;

  double x_at(int col) const;
  double y_at(int row) const;
  bool operator==(const Heatmap&) const = default;
};

// Barrier values over a grid of agent positions with zero agent velocity and
// the obstacles of `frozen` held in place. 2D only.
Heatmap heatmap(const Barrier& b, const WorldState& frozen, const EnvConfig& cfg, int resolution);

struct HeatmapContrast {
  double near_mean = 0.0;  // cells within d_pd of some obstacle
  double far_mean = 0.0;   // cells farther than far_distance from every obstacle
  int near_cells = 0;
  int far_cells = 0;
};
HeatmapContrast heatmap_contrast(const Heatmap& map, const WorldState& frozen, double d_pd, double far_distance);

}  // namespace cbfirl
