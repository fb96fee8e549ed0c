#include "cbfirl/config.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "cbfirl/error.hpp"

namespace cbfirl {

const char* to_string(Mode mode) { return mode == Mode::kAirl ? "airl" : "cbfirl"; }

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw Error(ErrorKind::kInvalidConfig, "bad value '" + value + "' for key '" + key + "'");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (value.empty() || *end != '\0' || errno == ERANGE) bad_value(key, value);
  return v;
}

long long parse_int(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(value.c_str(), &end, 10);
  if (value.empty() || *end != '\0' || errno == ERANGE) bad_value(key, value);
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  if (value.empty() || value[0] == '-') bad_value(key, value);
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (*end != '\0' || errno == ERANGE) bad_value(key, value);
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) items.push_back(trim(item));
  return items;
}

Vec parse_vec(const std::string& key, const std::string& value) {
  Vec out;
  for (const std::string& item : split_list(value)) out.push_back(parse_double(key, item));
  if (out.empty()) bad_value(key, value);
  return out;
}

std::vector<int> parse_widths(const std::string& key, const std::string& value) {
  std::vector<int> out;
  for (const std::string& item : split_list(value)) {
    const long long w = parse_int(key, item);
    if (w < 1) bad_value(key, value);
    out.push_back(static_cast<int>(w));
  }
  if (out.empty()) bad_value(key, value);
  return out;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    if constexpr (std::is_floating_point_v<T>) s += fmt(v[i]);
    else s += std::to_string(v[i]);
  }
  return s;
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define CBFIRL_DOUBLE(name, member)                                                        \
  Field{name, [](const RunConfig& c) { return fmt(c.member); },                            \
        [](RunConfig& c, const std::string& v) { c.member = parse_double(name, v); }}
#define CBFIRL_INT(name, member)                                                           \
  Field{name, [](const RunConfig& c) { return std::to_string(c.member); },                 \
        [](RunConfig& c, const std::string& v) { c.member = static_cast<int>(parse_int(name, v)); }}
#define CBFIRL_U64(name, member)                                                           \
  Field{name, [](const RunConfig& c) { return std::to_string(c.member); },                 \
        [](RunConfig& c, const std::string& v) { c.member = parse_u64(name, v); }}
#define CBFIRL_BOOL(name, member)                                                          \
  Field{name, [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }, \
        [](RunConfig& c, const std::string& v) { c.member = parse_bool(name, v); }}
#define CBFIRL_WIDTHS(name, member)                                                        \
  Field{name, [](const RunConfig& c) { return join(c.member); },                           \
        [](RunConfig& c, const std::string& v) { c.member = parse_widths(name, v); }}
#define CBFIRL_VEC(name, member)                                                           \
  Field{name, [](const RunConfig& c) { return join(c.member); },                           \
        [](RunConfig& c, const std::string& v) { c.member = parse_vec(name, v); }}

void apply_preset(RunConfig& c, const std::string& name) {
  if (name == "racecar8") c.env = EnvConfig::racecar(8);
  else if (name == "racecar16") c.env = EnvConfig::racecar(16);
  else if (name == "drone32") c.env = EnvConfig::drone(32);
  else bad_value("env", name);
  c.env_name = name;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"env", [](const RunConfig& c) { return c.env_name; },
            [](RunConfig& c, const std::string& v) { apply_preset(c, v); }},
      CBFIRL_INT("dim", env.dim),
      CBFIRL_INT("n_obstacles", env.n_obstacles),
      CBFIRL_INT("k_nearest", env.k_nearest),
      CBFIRL_DOUBLE("dt", env.dt),
      CBFIRL_INT("horizon", env.horizon),
      CBFIRL_DOUBLE("arena_half_width", env.arena_half_width),
      CBFIRL_VEC("start", env.start),
      CBFIRL_VEC("goal", env.goal),
      CBFIRL_DOUBLE("goal_radius", env.goal_radius),
      CBFIRL_DOUBLE("collision_radius", env.collision_radius),
      CBFIRL_DOUBLE("obstacle_speed_max", env.obstacle_speed_max),
      CBFIRL_DOUBLE("a_max", env.a_max),
      CBFIRL_DOUBLE("v_max", env.v_max),
      CBFIRL_U64("env_seed", env.seed),

      CBFIRL_DOUBLE("expert_k_att", expert.k_att),
      CBFIRL_DOUBLE("expert_k_rep", expert.k_rep),
      CBFIRL_DOUBLE("expert_k_damp", expert.k_damp),
      CBFIRL_DOUBLE("expert_influence_factor", expert.influence_factor),

      Field{"mode", [](const RunConfig& c) { return std::string(to_string(c.mode)); },
            [](RunConfig& c, const std::string& v) {
              if (v == "airl") c.mode = Mode::kAirl;
              else if (v == "cbfirl") c.mode = Mode::kCbfirl;
              else bad_value("mode", v);
            }},
      CBFIRL_U64("seed", seed),
      CBFIRL_INT("n_demos", demo.n_demos),
      CBFIRL_U64("demo_seed", demo.demo_seed),
      CBFIRL_INT("pd_count", demo.pd_count),
      CBFIRL_DOUBLE("d_pd", demo.d_pd),
      CBFIRL_U64("pd_seed", demo.pd_seed),
      CBFIRL_INT("clear_count", demo.clear_count),
      CBFIRL_DOUBLE("clearance", demo.clearance),
      CBFIRL_U64("clear_seed", demo.clear_seed),

      CBFIRL_WIDTHS("policy_hidden", airl.policy_hidden),
      CBFIRL_WIDTHS("disc_hidden", airl.disc_hidden),
      CBFIRL_WIDTHS("value_hidden", airl.value_hidden),
      CBFIRL_DOUBLE("policy_log_std_init", airl.log_std_init),
      CBFIRL_DOUBLE("gamma", airl.gamma),
      CBFIRL_DOUBLE("gae_lambda", airl.gae_lambda),
      CBFIRL_DOUBLE("clip", airl.clip),
      CBFIRL_DOUBLE("entropy_coef", airl.entropy_coef),
      CBFIRL_INT("rollout_steps", airl.rollout_steps),
      CBFIRL_INT("minibatch", airl.minibatch),
      CBFIRL_INT("ppo_epochs", airl.ppo_epochs),
      CBFIRL_INT("disc_epochs", airl.disc_epochs),
      CBFIRL_DOUBLE("policy_lr", airl.policy_lr),
      CBFIRL_DOUBLE("disc_lr", airl.disc_lr),
      CBFIRL_DOUBLE("value_lr", airl.value_lr),
      CBFIRL_DOUBLE("adam_beta1", airl.adam_beta1),
      CBFIRL_DOUBLE("adam_beta2", airl.adam_beta2),
      CBFIRL_DOUBLE("adam_eps", airl.adam_eps),
      CBFIRL_BOOL("normalize_advantages", airl.normalize_advantages),
      CBFIRL_INT("airl_iters", airl_iters),
      CBFIRL_INT("train_eval_every", airl.eval_every),
      CBFIRL_INT("train_eval_episodes", airl.eval_episodes),
      CBFIRL_U64("train_eval_seed", airl.eval_seed),

      CBFIRL_DOUBLE("lambda", cbf.lambda),
      CBFIRL_DOUBLE("w", cbf.w),
      CBFIRL_DOUBLE("margin_safe", cbf.margin_safe),
      CBFIRL_DOUBLE("margin_pd", cbf.margin_pd),
      CBFIRL_WIDTHS("barrier_hidden", cbf.barrier_hidden),
      CBFIRL_DOUBLE("barrier_output_bias", cbf.barrier_output_bias),
      CBFIRL_DOUBLE("barrier_lr", cbf.barrier_lr),
      CBFIRL_INT("barrier_epochs", cbf.barrier_epochs),
      CBFIRL_INT("barrier_minibatch", cbf.barrier_minibatch),
      CBFIRL_DOUBLE("barrier_stop_loss", cbf.barrier_stop_loss),
      CBFIRL_DOUBLE("heldout_fraction", cbf.heldout_fraction),
      CBFIRL_DOUBLE("min_heldout_accuracy", cbf.min_heldout_accuracy),
      CBFIRL_INT("joint_iters", cbf.joint_iters),
      CBFIRL_BOOL("freeze_barrier_in_step2", cbf.freeze_barrier_in_step2),
      CBFIRL_INT("explored_cap", cbf.explored_cap),

      CBFIRL_INT("eval_episodes", eval_episodes),
      CBFIRL_U64("eval_seed", eval_seed),
      CBFIRL_INT("heatmap_resolution", heatmap_resolution),
      CBFIRL_U64("heatmap_seed", heatmap_seed),
      Field{"out_dir", [](const RunConfig& c) { return c.out_dir; },
            [](RunConfig& c, const std::string& v) { c.out_dir = v; }},
  };
  return table;
}

#undef CBFIRL_DOUBLE
#undef CBFIRL_INT
#undef CBFIRL_U64
#undef CBFIRL_BOOL
#undef CBFIRL_WIDTHS
#undef CBFIRL_VEC

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const Field& f : fields()) {
    if (f.key == key) {
      f.set(*this, value);
      cbf.dt = env.dt;
      return;
    }
  }
  throw Error(ErrorKind::kInvalidConfig, "unknown key '" + key + "'");
}

void RunConfig::validate() const {
  env.validate();
  airl.validate();
  cbf.validate();
  const auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorKind::kInvalidConfig, what);
  };
  require(cbf.dt == env.dt, "barrier dt must equal the environment dt");
  require(demo.n_demos >= 1 && demo.pd_count >= 1, "n_demos and pd_count must be positive");
  require(demo.clear_count >= 0, "clear_count must be non-negative");
  require(demo.d_pd > env.collision_radius, "d_pd must exceed collision_radius");
  require(airl_iters >= 0, "airl_iters must be non-negative");
  require(eval_episodes >= 1, "eval_episodes must be positive");
  require(heatmap_resolution >= 2, "heatmap_resolution must be at least 2");
  require(airl.rollout_steps >= env.horizon, "rollout_steps must cover one horizon");
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const Field& f : fields()) out += f.key + " = " + f.get(*this) + "\n";
  return out;
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> k;
  for (const Field& f : fields()) k.push_back(f.key);
  return k;
}

RunConfig parse_config(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::kInvalidConfig, "line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  RunConfig cfg;
  for (const auto& [k, v] : entries) {
    if (k == "env") cfg.set(k, v);
  }
  for (const auto& [k, v] : entries) {
    if (k != "env") cfg.set(k, v);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace cbfirl
