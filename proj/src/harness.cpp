#include "cbfirl/harness.hpp"

#include <limits>

#include "cbfirl/error.hpp"

namespace cbfirl {

Metrics Metrics::from_records(std::vector<EpisodeRecord> records) {
  Metrics m;
  m.n_episodes = static_cast<int>(records.size());
  int successes = 0;
  int collisions = 0;
  for (const EpisodeRecord& r : records) {
    successes += r.success;
    collisions += r.collision;
  }
  if (m.n_episodes > 0) {
    m.success_rate = static_cast<double>(successes) / m.n_episodes;
    m.collision_rate = static_cast<double>(collisions) / m.n_episodes;
  }
  m.episodes = std::move(records);
  return m;
}

Metrics evaluate(const Policy& p, const EnvConfig& cfg, int n_episodes, std::uint64_t seed) {
  if (n_episodes < 1) throw Error(ErrorKind::kInvalidConfig, "n_episodes must be at least 1");
  std::vector<EpisodeRecord> records;
  records.reserve(n_episodes);
  for (int i = 0; i < n_episodes; ++i) {
    EpisodeRecord rec;
    rec.seed = seed + static_cast<std::uint64_t>(i);
    WorldState s = reset(cfg, rec.seed);
    while (s.t < cfg.horizon) {
      s = step(s, Action{p.mean(observe(s, cfg))}, cfg);
      ++rec.steps;
      rec.collision = rec.collision || is_collision(s, cfg);
      if (is_success(s, cfg)) {
        rec.success = true;
        break;
      }
    }
    records.push_back(rec);
  }
  return Metrics::from_records(std::move(records));
}

double Heatmap::x_at(int col) const { return x_min + col * (x_max - x_min) / (resolution - 1); }
double Heatmap::y_at(int row) const { return y_min + row * (y_max - y_min) / (resolution - 1); }

Heatmap heatmap(const Barrier& b, const WorldState& frozen, const EnvConfig& cfg, int resolution) {
  if (cfg.dim != 2) throw Error(ErrorKind::kUnsupportedDimension, "heatmaps are defined for 2D arenas only");
  if (resolution < 2) throw Error(ErrorKind::kInvalidConfig, "heatmap resolution must be at least 2");
  Heatmap map;
  map.resolution = resolution;
  map.x_min = map.y_min = -cfg.arena_half_width;
  map.x_max = map.y_max = cfg.arena_half_width;
  map.values.reserve(static_cast<std::size_t>(resolution) * resolution);
  WorldState s = frozen;
  s.agent_vel.assign(cfg.dim, 0.0);
  for (int row = 0; row < resolution; ++row) {
    for (int col = 0; col < resolution; ++col) {
      s.agent_pos = {map.x_at(col), map.y_at(row)};
      map.values.push_back(b.value(observe(s, cfg)));
    }
  }
  return map;
}

HeatmapContrast heatmap_contrast(const Heatmap& map, const WorldState& frozen, double d_pd, double far_distance) {
  HeatmapContrast c;
  WorldState s = frozen;
  for (int row = 0; row < map.resolution; ++row) {
    for (int col = 0; col < map.resolution; ++col) {
      s.agent_pos = {map.x_at(col), map.y_at(row)};
      const double dmin = min_obstacle_distance(s);
      const double v = map.values[static_cast<std::size_t>(row) * map.resolution + col];
      if (dmin < d_pd) {
        c.near_mean += v;
        ++c.near_cells;
      } else if (dmin > far_distance) {
        c.far_mean += v;
        ++c.far_cells;
      }
    }
  }
  c.near_mean = c.near_cells ? c.near_mean / c.near_cells : std::numeric_limits<double>::quiet_NaN();
  c.far_mean = c.far_cells ? c.far_mean / c.far_cells : std::numeric_limits<double>::quiet_NaN();
  return c;
}

}  // namespace cbfirl
