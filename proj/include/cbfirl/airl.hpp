#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "cbfirl/demos.hpp"
#include "cbfirl/diffnet.hpp"
#include "cbfirl/dynamics.hpp"

namespace cbfirl {

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

// Diagonal Gaussian policy with a state-independent log standard deviation.
struct Policy {
  Mlp mean_net;
  Vec log_std;

  static Policy init(const EnvConfig& env, const std::vector<int>& hidden, double log_std_init, Rng& rng);

  Vec mean(std::span<const double> obs) const { return mean_net.forward(obs); }
  double logprob(std::span<const double> obs, std::span<const double> action) const;
  // Raw Gaussian sample; the environment clamps it to the action bound.
  Vec sample(std::span<const double> obs, Rng& rng) const;
  double entropy() const;

  bool operator==(const Policy&) const = default;
};

// Log density of a diagonal Gaussian.
double gaussian_logprob(std::span<const double> mean, std::span<const double> log_std,
                        std::span<const double> x);

struct Discriminator {
  Mlp f_net;

  static Discriminator init(const EnvConfig& env, const std::vector<int>& hidden, Rng& rng);
  double advantage(std::span<const double> obs, std::span<const double> action) const;

  bool operator==(const Discriminator&) const = default;
};

struct StateAction {
  Observation obs;
  Vec action;
};

// Concatenated (observation, action) network input.
Vec state_action_input(std::span<const double> obs, std::span<const double> action);

// Clamps every component of a sampled action to [-a_max, a_max].
Vec clamp_action(std::span<const double> action, double a_max);

double sigmoid(double x);
double softplus(double x);

// exp(f) / (exp(f) + pi(a|s)) evaluated as sigmoid(f - log pi).
double discriminator_output(double f_value, double policy_logprob);
double discriminator_output(const Discriminator& d, const Policy& p, std::span<const double> obs,
                            std::span<const double> action);

// log D - log(1 - D) = f - log pi.
double recovered_reward(const Discriminator& d, const Policy& p, std::span<const double> obs,
                        std::span<const double> action);

// Mean of -log D over expert samples plus mean of -log(1 - D) over policy
// samples. The policy is held constant; when grad is given the gradient with
// respect to the discriminator parameters is accumulated into it.
double discriminator_loss(const Discriminator& d, const Policy& p, std::span<const StateAction> expert,
                          std::span<const StateAction> policy, Vec* grad = nullptr);

struct EpisodeRecord {
  std::uint64_t seed = 0;
  bool success = false;
  bool collision = false;
  int steps = 0;

  bool operator==(const EpisodeRecord&) const = default;
};

struct RolloutBatch {
  std::vector<Observation> obs;
  std::vector<Vec> actions;  // raw policy samples
  Vec logprob;               // under the behavior policy
  Vec reward;
  Vec value;
  Vec advantage;
  Vec ret;
  std::vector<int> episode_start;
  std::vector<bool> episode_terminal;           // ended at the goal, no bootstrap
  std::vector<Observation> episode_final_obs;   // observation after the last step
  std::vector<EpisodeRecord> episodes;
  double gamma = 0.99;
  double gae_lambda = 0.95;

  std::size_t size() const { return obs.size(); }
  int episode_end(std::size_t e) const {
    return e + 1 < episode_start.size() ? episode_start[e + 1] : static_cast<int>(obs.size());
  }
};

// Full episodes are rolled until at least n_steps transitions are gathered.
// Episode e resets with derive_seed(seed, 2e) and draws action noise from
// derive_seed(seed, 2e + 1).
RolloutBatch collect_rollouts(const Policy& p, const EnvConfig& cfg, int n_steps, std::uint64_t seed);

void assign_rewards(RolloutBatch& batch, const Discriminator& d, const Policy& p, double a_max);

// Generalized advantage estimation for one episode segment.
Vec gae_advantages(std::span<const double> rewards, std::span<const double> values, double bootstrap,
                   double gamma, double lambda);
Vec discounted_returns(std::span<const double> rewards, double bootstrap, double gamma);

// Fills value, advantage and ret. A null critic means zero values.
void estimate_advantages(RolloutBatch& batch, const Mlp* critic, double gamma, double lambda);
void normalize_advantages(RolloutBatch& batch);

struct PolicyGrad {
  Vec net;
  Vec log_std;

  static PolicyGrad zeros(const Policy& p);
};

// Negated clipped surrogate minus the entropy bonus, averaged over idx.
double policy_loss(const Policy& p, const RolloutBatch& batch, std::span<const std::size_t> idx,
                   double clip, double entropy_coef, PolicyGrad* grad = nullptr);
double policy_loss(const Policy& p, const RolloutBatch& batch, double clip, double entropy_coef,
                   PolicyGrad* grad = nullptr);

// Mean of 0.5 (V(s) - ret)^2 over idx.
double value_loss(const Mlp& critic, const RolloutBatch& batch, std::span<const std::size_t> idx,
                  Vec* grad = nullptr);

struct AirlConfig {
  std::vector<int> policy_hidden{64, 64};
  std::vector<int> disc_hidden{64, 64};
  std::vector<int> value_hidden{64, 64};
  double log_std_init = -1.0;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  double entropy_coef = 0.01;
  int rollout_steps = 2048;
  int minibatch = 256;
  int ppo_epochs = 4;
  int disc_epochs = 2;
  double policy_lr = 1e-3;
  double disc_lr = 1e-3;
  double value_lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  bool normalize_advantages = true;
  int eval_every = 10;
  int eval_episodes = 20;
  std::uint64_t eval_seed = 1000000;

  void validate() const;
};

inline constexpr double kNotEvaluated = std::numeric_limits<double>::quiet_NaN();

struct IterationRecord {
  int iteration = 0;
  double loss_d = kNotEvaluated;
  double loss_policy = kNotEvaluated;
  double loss_barrier = kNotEvaluated;
  double loss_derivative = kNotEvaluated;
  double estimate_y = kNotEvaluated;
  double success_rate = kNotEvaluated;
  double collision_rate = kNotEvaluated;
};

struct BarrierReport {
  int epochs_run = 0;
  double final_loss = kNotEvaluated;
  double heldout_accuracy = kNotEvaluated;
  std::size_t n_train = 0;
  std::size_t n_heldout = 0;
};

struct TrainReport {
  std::vector<IterationRecord> iterations;
  BarrierReport barrier;
};

// Extra policy objective hooked into the policy update; the CBF derivative
// loss is the one implementation.
class JointObjective {
 public:
  virtual ~JointObjective() = default;
  // Called once per iteration with the fresh batch, before any policy update.
  virtual void begin_iteration(const RolloutBatch& batch, const Policy& policy, IterationRecord& record) = 0;
  // Adds the objective's policy-net gradient for the minibatch; returns its value.
  virtual double accumulate(const RolloutBatch& batch, std::span<const std::size_t> idx, const Policy& policy,
                            Vec& policy_net_grad) = 0;
  // Called after the policy update.
  virtual void end_iteration(const RolloutBatch& batch, const Policy& policy, IterationRecord& record) = 0;
};

// Adversarial IRL loop: rollouts, a discriminator pass, a clipped policy
// gradient update. Copyable; a copy continues with an identical schedule.
class AirlTrainer {
 public:
  AirlTrainer(const EnvConfig& env, const AirlConfig& cfg, const DemoSet& demos, std::uint64_t seed);

  IterationRecord iterate(JointObjective* joint = nullptr);

  const Policy& policy() const { return policy_; }
  const Discriminator& discriminator() const { return disc_; }
  const Mlp& critic() const { return critic_; }
  const EnvConfig& env() const { return env_; }
  const AirlConfig& config() const { return cfg_; }
  int iteration() const { return iteration_; }
  const RolloutBatch& last_batch() const { return last_batch_; }

 private:
  EnvConfig env_;
  AirlConfig cfg_;
  std::uint64_t seed_;
  std::vector<StateAction> expert_;
  Policy policy_;
  Discriminator disc_;
  Mlp critic_;
  OptimState policy_opt_;
  OptimState log_std_opt_;
  OptimState disc_opt_;
  OptimState critic_opt_;
  int iteration_ = 0;
  RolloutBatch last_batch_;
};

struct AirlResult {
  Policy policy;
  Discriminator discriminator;
  Mlp critic;
  TrainReport report;
};

AirlResult train_airl(const EnvConfig& env, const AirlConfig& cfg, const DemoSet& demos, int iters,
                      std::uint64_t seed);

}  // namespace cbfirl
