#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cbfirl/airl.hpp"
#include "cbfirl/cbf.hpp"
#include "cbfirl/demos.hpp"
#include "cbfirl/dynamics.hpp"

namespace cbfirl {

enum class Mode { kAirl, kCbfirl };

const char* to_string(Mode mode);

// Every tunable of the pipeline. Serialized as flat `key = value` lines.
struct RunConfig {
  // Name of the environment preset the file started from.
  std::string env_name = "racecar8";
  EnvConfig env = EnvConfig::racecar(8);
  ExpertConfig expert;
  AirlConfig airl;
  CbfConfig cbf;

  Mode mode = Mode::kCbfirl;
  std::uint64_t seed = 1;
  DemoSetConfig demo;
  int airl_iters = 100;
  int eval_episodes = 100;
  std::uint64_t eval_seed = 5000000;
  int heatmap_resolution = 64;
  std::uint64_t heatmap_seed = 0;
  std::string out_dir = "out";

  // Throws Error(kInvalidConfig) naming the key on an unknown key or a bad value.
  void set(const std::string& key, const std::string& value);
  void validate() const;

  // Canonical dump of every key; parse_config(to_text()) reproduces *this.
  std::string to_text() const;

  static std::vector<std::string> keys();
};

// `key = value` lines, `#` comments. An `env` preset is applied before the
// remaining keys regardless of its position in the file.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

}  // namespace cbfirl
