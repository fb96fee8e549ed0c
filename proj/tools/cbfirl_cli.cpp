// Command-line front end: gen-demos, train, eval, heatmap, verify.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cbfirl/cbf.hpp"
#include "cbfirl/config.hpp"
#include "cbfirl/error.hpp"
#include "cbfirl/harness.hpp"
#include "cbfirl/io.hpp"

namespace {

using namespace cbfirl;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

// Raised for problems with the invocation itself rather than the run.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
};

struct Resolved {
  RunConfig cfg;
  std::string echo;  // config file text and overrides as given
};

Resolved resolve(const Common& common) {
  Resolved r;
  try {
    if (!common.config_path.empty()) r.echo = read_file(common.config_path);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  std::string text = r.echo;
  if (!text.empty() && text.back() != '\n') text += '\n';
  for (const std::string& kv : common.overrides) {
    if (kv.find('=') == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    text += kv + '\n';
  }
  if (!common.overrides.empty()) {
    r.echo = text;
  }
  try {
    r.cfg = parse_config(text);
    if (!common.out_dir.empty()) r.cfg.set("out_dir", common.out_dir);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return r;
}

std::string path_in(const RunConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.out_dir) / name).string();
}

template <class F>
std::string render(F&& write) {
  std::ostringstream ss;
  write(ss);
  return ss.str();
}

void write_common(const Resolved& r, const std::string& command, int argc, char** argv) {
  write_file(path_in(r.cfg, "config_echo.txt"), r.echo);
  write_file(path_in(r.cfg, "config_resolved.txt"), r.cfg.to_text());
  // Wall-clock data lives only here so every other file is reproducible.
  std::ostringstream info;
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[64];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  info << "command = " << command << '\n' << "finished_utc = " << stamp << '\n' << "argv =";
  for (int i = 0; i < argc; ++i) info << ' ' << argv[i];
  info << '\n';
  write_file(path_in(r.cfg, "run_info.txt"), info.str());
}

Policy load_policy(const std::string& path) {
  std::istringstream in(read_file(path));
  return read_policy(in);
}

Barrier load_barrier(const std::string& path) {
  std::istringstream in(read_file(path));
  return Barrier{read_checkpoint(in).net};
}

void check_policy_shape(const Policy& p, const EnvConfig& env, const std::string& path) {
  if (p.mean_net.input_size() != env.observation_size() || p.mean_net.output_size() != env.dim) {
    throw Error(ErrorKind::kDimensionMismatch, "policy '" + path + "' does not fit the configured environment");
  }
}

void check_barrier_shape(const Barrier& b, const EnvConfig& env, const std::string& path) {
  if (b.h_net.input_size() != env.observation_size() || b.h_net.output_size() != 1) {
    throw Error(ErrorKind::kDimensionMismatch, "barrier '" + path + "' does not fit the configured environment");
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int gen_demos(const Resolved& r) {
  const RunConfig& c = r.cfg;
  const DemoSet demos = build_demo_set(c.env, c.demo, c.expert);
  write_file(path_in(c, "demos.csv"), render([&](std::ostream& o) { write_trajectories(o, demos.demos); }));
  write_file(path_in(c, "pd_states.csv"), render([&](std::ostream& o) { write_states(o, demos.pd_states); }));
  write_file(path_in(c, "clear_states.csv"),
             render([&](std::ostream& o) { write_states(o, demos.clear_states); }));
  std::printf("demos %zu (acceptance %.3f), safe states %zu, pd states %zu, clear states %zu\n",
              demos.demos.size(), demos.acceptance_ratio, demos.safe_states.size(), demos.pd_states.size(),
              demos.clear_states.size());
  return kExitOk;
}

int train(const Resolved& r) {
  const RunConfig& c = r.cfg;
  const DemoSet demos = build_demo_set(c.env, c.demo, c.expert);
  if (c.mode == Mode::kAirl) {
    const AirlResult res = train_airl(c.env, c.airl, demos, c.airl_iters, c.seed);
    write_file(path_in(c, "policy.ckpt"), render([&](std::ostream& o) { write_policy(o, res.policy); }));
    write_file(path_in(c, "discriminator.ckpt"),
               render([&](std::ostream& o) { write_checkpoint(o, res.discriminator.f_net); }));
    write_file(path_in(c, "critic.ckpt"), render([&](std::ostream& o) { write_checkpoint(o, res.critic); }));
    write_file(path_in(c, "metrics_log.csv"),
               render([&](std::ostream& o) { write_metrics_log(o, res.report.iterations); }));
    std::printf("trained airl for %d iterations\n", c.airl_iters);
    return kExitOk;
  }
  const CbfirlResult res = train_cbfirl(c.env, c.airl, c.cbf, demos, c.airl_iters, c.seed);
  write_file(path_in(c, "policy.ckpt"), render([&](std::ostream& o) { write_policy(o, res.policy); }));
  write_file(path_in(c, "discriminator.ckpt"),
             render([&](std::ostream& o) { write_checkpoint(o, res.discriminator.f_net); }));
  write_file(path_in(c, "critic.ckpt"), render([&](std::ostream& o) { write_checkpoint(o, res.critic); }));
  write_file(path_in(c, "barrier.ckpt"), render([&](std::ostream& o) { write_checkpoint(o, res.barrier.h_net); }));
  write_file(path_in(c, "barrier_report.txt"),
             render([&](std::ostream& o) { write_barrier_report(o, res.report.barrier); }));
  write_file(path_in(c, "metrics_log.csv"),
             render([&](std::ostream& o) { write_metrics_log(o, res.report.iterations); }));
  std::printf("trained cbfirl: %d pre-training + %d joint iterations, barrier held-out accuracy %.4f\n",
              c.airl_iters, c.cbf.joint_iters, res.report.barrier.heldout_accuracy);
  return kExitOk;
}

int eval(const Resolved& r, std::string policy_path) {
  const RunConfig& c = r.cfg;
  if (policy_path.empty()) policy_path = path_in(c, "policy.ckpt");
  const Policy p = load_policy(policy_path);
  check_policy_shape(p, c.env, policy_path);
  const Metrics m = evaluate(p, c.env, c.eval_episodes, c.eval_seed);
  write_file(path_in(c, "metrics.txt"), render([&](std::ostream& o) { write_metrics(o, m); }));
  std::printf("success_rate %.4f collision_rate %.4f over %d episodes\n", m.success_rate, m.collision_rate,
              m.n_episodes);
  return kExitOk;
}

int heatmap_cmd(const Resolved& r, std::string barrier_path) {
  const RunConfig& c = r.cfg;
  if (barrier_path.empty()) barrier_path = path_in(c, "barrier.ckpt");
  const Barrier b = load_barrier(barrier_path);
  check_barrier_shape(b, c.env, barrier_path);
  const WorldState frozen = reset(c.env, c.heatmap_seed);
  const Heatmap map = heatmap(b, frozen, c.env, c.heatmap_resolution);
  write_file(path_in(c, "heatmap.txt"), render([&](std::ostream& o) { write_heatmap(o, map); }));
  const HeatmapContrast hc = heatmap_contrast(map, frozen, c.demo.d_pd, 4 * c.env.collision_radius);
  std::printf("heatmap %dx%d: near-obstacle mean %.4f (%d cells), clear mean %.4f (%d cells)\n", map.resolution,
              map.resolution, hc.near_mean, hc.near_cells, hc.far_mean, hc.far_cells);
  return kExitOk;
}

int verify(const Resolved& r, std::string policy_path, std::string barrier_path) {
  const RunConfig& c = r.cfg;
  if (policy_path.empty()) policy_path = path_in(c, "policy.ckpt");
  if (barrier_path.empty()) barrier_path = path_in(c, "barrier.ckpt");
  const Policy p = load_policy(policy_path);
  const Barrier b = load_barrier(barrier_path);
  check_policy_shape(p, c.env, policy_path);
  check_barrier_shape(b, c.env, barrier_path);
  const DemoSet demos = build_demo_set(c.env, c.demo, c.expert);
  // Fresh exploration from a stream no training run draws from.
  const RolloutBatch batch = collect_rollouts(p, c.env, c.airl.rollout_steps, derive_seed(c.seed, 0x7e51f1));
  std::size_t r1 = 0, r2 = 0;
  for (const Observation& s : demos.safe_states) r1 += b.value(s) >= 0.0;
  for (const Observation& s : demos.pd_states) r2 += b.value(s) < 0.0;
  const R3Check r3 = check_r3(b, p, batch.obs, c.cbf, c.env);
  const double y = estimate_y(b, p, demos.safe_states, demos.pd_states, batch.obs, c.cbf, c.env);
  std::ostringstream out;
  out << "estimate_y = " << fmt(y) << '\n';
  out << "r1_fraction = " << fmt(static_cast<double>(r1) / demos.safe_states.size()) << '\n';
  out << "r2_fraction = " << fmt(static_cast<double>(r2) / demos.pd_states.size()) << '\n';
  out << "r3_fraction = " << fmt(r3.fraction()) << '\n';
  out << "r3_considered = " << r3.considered << '\n';
  out << "n_safe = " << demos.safe_states.size() << '\n';
  out << "n_pd = " << demos.pd_states.size() << '\n';
  out << "n_explored = " << batch.size() << '\n';
  write_file(path_in(c, "verify.txt"), out.str());
  std::printf("estimate_y %.6g, R1 %.4f, R2 %.4f, R3 %.4f over %zu explored states with h >= 0\n", y,
              static_cast<double>(r1) / demos.safe_states.size(),
              static_cast<double>(r2) / demos.pd_states.size(), r3.fraction(), r3.considered);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Imitation learning with a learned control barrier function"};
  app.require_subcommand(1);

  Common common;
  std::string mode;
  std::string policy_path;
  std::string barrier_path;
  int resolution = 0;
  int episodes = 0;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "Config file of `key = value` lines");
    sub->add_option("--set", common.overrides, "Override one config key, as key=value (repeatable)");
    sub->add_option("--out", common.out_dir, "Output directory (overrides out_dir)");
  };

  CLI::App* gen = app.add_subcommand("gen-demos", "Write expert demonstrations and sampled state sets");
  add_common(gen);
  CLI::App* tr = app.add_subcommand("train", "Train AIRL or CBFIRL and write checkpoints and a metrics log");
  add_common(tr);
  tr->add_option("--mode", mode, "airl or cbfirl (overrides the config)")->check(CLI::IsMember({"airl", "cbfirl"}));
  CLI::App* ev = app.add_subcommand("eval", "Evaluate a policy checkpoint");
  add_common(ev);
  ev->add_option("--policy", policy_path, "Policy checkpoint (default: <out>/policy.ckpt)");
  ev->add_option("--episodes", episodes, "Number of episodes (overrides eval_episodes)")->check(CLI::PositiveNumber);
  CLI::App* hm = app.add_subcommand("heatmap", "Write a barrier heatmap over the arena");
  add_common(hm);
  hm->add_option("--barrier", barrier_path, "Barrier checkpoint (default: <out>/barrier.ckpt)");
  hm->add_option("--resolution", resolution, "Grid resolution (overrides heatmap_resolution)")
      ->check(CLI::Range(2, 4096));
  CLI::App* vf = app.add_subcommand("verify", "Check the barrier requirements on fresh samples");
  add_common(vf);
  vf->add_option("--policy", policy_path, "Policy checkpoint (default: <out>/policy.ckpt)");
  vf->add_option("--barrier", barrier_path, "Barrier checkpoint (default: <out>/barrier.ckpt)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (!mode.empty()) common.overrides.push_back("mode=" + mode);
    if (resolution > 0) common.overrides.push_back("heatmap_resolution=" + std::to_string(resolution));
    if (episodes > 0) common.overrides.push_back("eval_episodes=" + std::to_string(episodes));
    const Resolved r = resolve(common);
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    int code = kExitOk;
    if (sub == gen) code = gen_demos(r);
    if (sub == tr) code = train(r);
    if (sub == ev) code = eval(r, policy_path);
    if (sub == hm) code = heatmap_cmd(r, barrier_path);
    if (sub == vf) code = verify(r, policy_path, barrier_path);
    write_common(r, name, argc, argv);
    return code;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
}
