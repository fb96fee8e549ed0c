#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cbfirl/airl.hpp"
#include "cbfirl/cbf.hpp"
#include "cbfirl/demos.hpp"
#include "cbfirl/harness.hpp"

namespace cbfirl {

// All writers emit plain text with 17 significant digits, so every reader
// reproduces the written values bit for bit. Readers throw Error(kParse).

// Columns: episode_id, t, obs_0.., action_0.., collision, success.
// episode_id is the reset seed of the trajectory.
void write_trajectories(std::ostream& out, const std::vector<Trajectory>& demos);
std::vector<Trajectory> read_trajectories(std::istream& in);

// Header s_0..s_{n-1}, one observation per row.
void write_states(std::ostream& out, const std::vector<Observation>& states);
std::vector<Observation> read_states(std::istream& in);

// `key = value` summary followed by one `seed,success,collision,steps` row per episode.
void write_metrics(std::ostream& out, const Metrics& m);
Metrics read_metrics(std::istream& in);

// `key = value` header with resolution and bounds, then one comma-separated row per grid row.
void write_heatmap(std::ostream& out, const Heatmap& map);
Heatmap read_heatmap(std::istream& in);

// One CSV row per iteration; values that were not computed are written as nan.
void write_metrics_log(std::ostream& out, const std::vector<IterationRecord>& records);
std::vector<IterationRecord> read_metrics_log(std::istream& in);

void write_barrier_report(std::ostream& out, const BarrierReport& report);
BarrierReport read_barrier_report(std::istream& in);

// Mean net in the checkpoint format with log_std as the extra lines.
void write_policy(std::ostream& out, const Policy& p);
Policy read_policy(std::istream& in);

std::string read_file(const std::string& path);
// Writes through a temporary file and renames it into place.
void write_file(const std::string& path, const std::string& contents);

}  // namespace cbfirl
