#include "cbfirl/io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "cbfirl/error.hpp"

namespace cbfirl {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void parse_error(const std::string& what) { throw Error(ErrorKind::kParse, what); }

double to_double(const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || errno == ERANGE) parse_error("bad number '" + s + "'");
  return v;
}

long long to_int(const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0' || errno == ERANGE) parse_error("bad integer '" + s + "'");
  return v;
}

std::uint64_t to_u64(const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || s[0] == '-' || *end != '\0' || errno == ERANGE) parse_error("bad integer '" + s + "'");
  return v;
}

bool to_flag(const std::string& s) {
  if (s == "0") return false;
  if (s == "1") return true;
  parse_error("bad flag '" + s + "'");
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool next_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

std::string require_line(std::istream& in, const char* what) {
  std::string line;
  if (!next_line(in, line)) parse_error(std::string("missing ") + what);
  return line;
}

void write_row(std::ostream& out, std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) out << (i ? "," : "") << fmt(values[i]);
  out << '\n';
}

// Reads `key = value` lines until a line without " = " or the end.
std::map<std::string, std::string> read_pairs(std::istream& in, std::string* rest) {
  std::map<std::string, std::string> kv;
  std::string line;
  while (next_line(in, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) {
      if (rest) *rest = line;
      return kv;
    }
    kv[line.substr(0, eq)] = line.substr(eq + 3);
  }
  if (rest) rest->clear();
  return kv;
}

const std::string& get(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) parse_error("missing key '" + key + "'");
  return it->second;
}

}  // namespace

void write_trajectories(std::ostream& out, const std::vector<Trajectory>& demos) {
  std::size_t n_obs = 0, n_act = 0;
  if (!demos.empty() && !demos.front().steps.empty()) {
    n_obs = demos.front().steps.front().obs.size();
    n_act = demos.front().steps.front().action.size();
  }
  out << "episode_id,t";
  for (std::size_t i = 0; i < n_obs; ++i) out << ",obs_" << i;
  for (std::size_t i = 0; i < n_act; ++i) out << ",action_" << i;
  out << ",collision,success\n";
  for (const Trajectory& traj : demos) {
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
      const TrajectoryStep& st = traj.steps[t];
      out << traj.seed << ',' << t;
      for (double v : st.obs) out << ',' << fmt(v);
      for (double v : st.action) out << ',' << fmt(v);
      out << ',' << (st.collision ? 1 : 0) << ',' << (st.success ? 1 : 0) << '\n';
    }
  }
}

std::vector<Trajectory> read_trajectories(std::istream& in) {
  const auto header = split(require_line(in, "trajectory header"));
  if (header.size() < 4 || header[0] != "episode_id" || header[1] != "t") parse_error("bad trajectory header");
  std::size_t n_obs = 0, n_act = 0;
  for (const std::string& h : header) {
    if (h.rfind("obs_", 0) == 0) ++n_obs;
    if (h.rfind("action_", 0) == 0) ++n_act;
  }
  if (header.size() != 4 + n_obs + n_act) parse_error("bad trajectory header");
  std::vector<Trajectory> demos;
  std::string line;
  while (next_line(in, line)) {
    const auto cells = split(line);
    if (cells.size() != header.size()) parse_error("bad trajectory row: " + line);
    const std::uint64_t id = to_u64(cells[0]);
    const long long t = to_int(cells[1]);
    if (t == 0) demos.push_back(Trajectory{id, {}});
    if (demos.empty() || demos.back().seed != id || static_cast<long long>(demos.back().steps.size()) != t) {
      parse_error("trajectory rows out of order: " + line);
    }
    TrajectoryStep st;
    for (std::size_t i = 0; i < n_obs; ++i) st.obs.push_back(to_double(cells[2 + i]));
    for (std::size_t i = 0; i < n_act; ++i) st.action.push_back(to_double(cells[2 + n_obs + i]));
    st.collision = to_flag(cells[2 + n_obs + n_act]);
    st.success = to_flag(cells[3 + n_obs + n_act]);
    demos.back().steps.push_back(std::move(st));
  }
  return demos;
}

void write_states(std::ostream& out, const std::vector<Observation>& states) {
  const std::size_t n = states.empty() ? 0 : states.front().size();
  for (std::size_t i = 0; i < n; ++i) out << (i ? "," : "") << "s_" << i;
  out << '\n';
  for (const Observation& s : states) write_row(out, s);
}

std::vector<Observation> read_states(std::istream& in) {
  const std::string header = require_line(in, "state header");
  const std::size_t n = header.empty() ? 0 : split(header).size();
  std::vector<Observation> states;
  std::string line;
  while (next_line(in, line)) {
    const auto cells = split(line);
    if (cells.size() != n) parse_error("bad state row: " + line);
    Observation s;
    for (const std::string& c : cells) s.push_back(to_double(c));
    states.push_back(std::move(s));
  }
  return states;
}

void write_metrics(std::ostream& out, const Metrics& m) {
  out << "success_rate = " << fmt(m.success_rate) << '\n';
  out << "collision_rate = " << fmt(m.collision_rate) << '\n';
  out << "n_episodes = " << m.n_episodes << '\n';
  out << "seed,success,collision,steps\n";
  for (const EpisodeRecord& e : m.episodes) {
    out << e.seed << ',' << (e.success ? 1 : 0) << ',' << (e.collision ? 1 : 0) << ',' << e.steps << '\n';
  }
}

Metrics read_metrics(std::istream& in) {
  std::string header;
  const auto kv = read_pairs(in, &header);
  if (header != "seed,success,collision,steps") parse_error("bad metrics episode header");
  Metrics m;
  m.success_rate = to_double(get(kv, "success_rate"));
  m.collision_rate = to_double(get(kv, "collision_rate"));
  m.n_episodes = static_cast<int>(to_int(get(kv, "n_episodes")));
  std::string line;
  while (next_line(in, line)) {
    const auto cells = split(line);
    if (cells.size() != 4) parse_error("bad metrics row: " + line);
    m.episodes.push_back(EpisodeRecord{to_u64(cells[0]), to_flag(cells[1]), to_flag(cells[2]),
                                       static_cast<int>(to_int(cells[3]))});
  }
  if (static_cast<int>(m.episodes.size()) != m.n_episodes) parse_error("episode count does not match n_episodes");
  return m;
}

void write_heatmap(std::ostream& out, const Heatmap& map) {
  out << "resolution = " << map.resolution << '\n';
  out << "x_min = " << fmt(map.x_min) << '\n';
  out << "x_max = " << fmt(map.x_max) << '\n';
  out << "y_min = " << fmt(map.y_min) << '\n';
  out << "y_max = " << fmt(map.y_max) << '\n';
  const std::size_t r = static_cast<std::size_t>(map.resolution);
  for (std::size_t row = 0; row < r; ++row) write_row(out, std::span(map.values).subspan(row * r, r));
}

Heatmap read_heatmap(std::istream& in) {
  std::string first;
  const auto kv = read_pairs(in, &first);
  Heatmap map;
  map.resolution = static_cast<int>(to_int(get(kv, "resolution")));
  map.x_min = to_double(get(kv, "x_min"));
  map.x_max = to_double(get(kv, "x_max"));
  map.y_min = to_double(get(kv, "y_min"));
  map.y_max = to_double(get(kv, "y_max"));
  if (map.resolution < 2) parse_error("heatmap resolution must be at least 2");
  std::string line = first;
  for (int row = 0; row < map.resolution; ++row) {
    if (row > 0 && !next_line(in, line)) parse_error("heatmap has too few rows");
    const auto cells = split(line);
    if (static_cast<int>(cells.size()) != map.resolution) parse_error("bad heatmap row");
    for (const std::string& c : cells) map.values.push_back(to_double(c));
  }
  if (next_line(in, line) && !line.empty()) parse_error("heatmap has too many rows");
  return map;
}

void write_metrics_log(std::ostream& out, const std::vector<IterationRecord>& records) {
  out << "iteration,loss_d,loss_policy,loss_barrier,loss_derivative,estimate_y,success_rate,collision_rate\n";
  for (const IterationRecord& r : records) {
    out << r.iteration;
    for (double v : {r.loss_d, r.loss_policy, r.loss_barrier, r.loss_derivative, r.estimate_y, r.success_rate,
                     r.collision_rate}) {
      out << ',' << fmt(v);
    }
    out << '\n';
  }
}

std::vector<IterationRecord> read_metrics_log(std::istream& in) {
  const auto header = split(require_line(in, "metrics log header"));
  if (header.size() != 8 || header[0] != "iteration") parse_error("bad metrics log header");
  std::vector<IterationRecord> records;
  std::string line;
  while (next_line(in, line)) {
    const auto c = split(line);
    if (c.size() != 8) parse_error("bad metrics log row: " + line);
    IterationRecord r;
    r.iteration = static_cast<int>(to_int(c[0]));
    r.loss_d = to_double(c[1]);
    r.loss_policy = to_double(c[2]);
    r.loss_barrier = to_double(c[3]);
    r.loss_derivative = to_double(c[4]);
    r.estimate_y = to_double(c[5]);
    r.success_rate = to_double(c[6]);
    r.collision_rate = to_double(c[7]);
    records.push_back(r);
  }
  return records;
}

void write_barrier_report(std::ostream& out, const BarrierReport& report) {
  out << "epochs_run = " << report.epochs_run << '\n';
  out << "final_loss = " << fmt(report.final_loss) << '\n';
  out << "heldout_accuracy = " << fmt(report.heldout_accuracy) << '\n';
  out << "n_train = " << report.n_train << '\n';
  out << "n_heldout = " << report.n_heldout << '\n';
}

BarrierReport read_barrier_report(std::istream& in) {
  const auto kv = read_pairs(in, nullptr);
  BarrierReport r;
  r.epochs_run = static_cast<int>(to_int(get(kv, "epochs_run")));
  r.final_loss = to_double(get(kv, "final_loss"));
  r.heldout_accuracy = to_double(get(kv, "heldout_accuracy"));
  r.n_train = to_u64(get(kv, "n_train"));
  r.n_heldout = to_u64(get(kv, "n_heldout"));
  return r;
}

void write_policy(std::ostream& out, const Policy& p) { write_checkpoint(out, p.mean_net, p.log_std); }

Policy read_policy(std::istream& in) {
  Checkpoint cp = read_checkpoint(in);
  if (static_cast<int>(cp.extra.size()) != cp.net.output_size()) {
    parse_error("policy checkpoint needs one log_std line per action dimension");
  }
  return Policy{std::move(cp.net), std::move(cp.extra)};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, "cannot write '" + path + "'");
    out << contents;
    if (!out.flush()) throw Error(ErrorKind::kIo, "cannot write '" + path + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot write '" + path + "': " + ec.message());
}

}  // namespace cbfirl
