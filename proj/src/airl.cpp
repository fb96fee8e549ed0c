#include "cbfirl/airl.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "cbfirl/error.hpp"
#include "cbfirl/harness.hpp"

namespace cbfirl {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2 pi)

std::vector<int> layers(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.index(i)]);
  return idx;
}

}  // namespace

double gaussian_logprob(std::span<const double> mean, std::span<const double> log_std,
                        std::span<const double> x) {
  double lp = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double z = (x[i] - mean[i]) * std::exp(-log_std[i]);
    lp += -0.5 * z * z - log_std[i] - kHalfLog2Pi;
  }
  return lp;
}

Policy Policy::init(const EnvConfig& env, const std::vector<int>& hidden, double log_std_init, Rng& rng) {
  Policy p;
  p.mean_net = Mlp::glorot(layers(env.observation_size(), hidden, env.dim), rng);
  p.log_std.assign(env.dim, std::clamp(log_std_init, kLogStdMin, kLogStdMax));
  return p;
}

double Policy::logprob(std::span<const double> obs, std::span<const double> action) const {
  return gaussian_logprob(mean(obs), log_std, action);
}

Vec Policy::sample(std::span<const double> obs, Rng& rng) const {
  Vec a = mean(obs);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += std::exp(log_std[i]) * rng.normal();
  return a;
}

double Policy::entropy() const {
  double h = 0.0;
  for (double ls : log_std) h += ls + 0.5 + kHalfLog2Pi;
  return h;
}

Discriminator Discriminator::init(const EnvConfig& env, const std::vector<int>& hidden, Rng& rng) {
  return Discriminator{Mlp::glorot(layers(env.observation_size() + env.dim, hidden, 1), rng)};
}

Vec state_action_input(std::span<const double> obs, std::span<const double> action) {
  Vec x(obs.begin(), obs.end());
  x.insert(x.end(), action.begin(), action.end());
  return x;
}

double Discriminator::advantage(std::span<const double> obs, std::span<const double> action) const {
  return f_net.forward(state_action_input(obs, action))[0];
}

Vec clamp_action(std::span<const double> action, double a_max) {
  Vec out(action.begin(), action.end());
  for (double& x : out) x = std::clamp(x, -a_max, a_max);
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double discriminator_output(double f_value, double policy_logprob) {
  if (!std::isfinite(f_value)) throw Error(ErrorKind::kTrainingDiverged, "non-finite discriminator output");
  return sigmoid(f_value - policy_logprob);
}

double discriminator_output(const Discriminator& d, const Policy& p, std::span<const double> obs,
                            std::span<const double> action) {
  return discriminator_output(d.advantage(obs, action), p.logprob(obs, action));
}

double recovered_reward(const Discriminator& d, const Policy& p, std::span<const double> obs,
                        std::span<const double> action) {
  return d.advantage(obs, action) - p.logprob(obs, action);
}

double discriminator_loss(const Discriminator& d, const Policy& p, std::span<const StateAction> expert,
                          std::span<const StateAction> policy, Vec* grad) {
  const auto half = [&](std::span<const StateAction> samples, bool is_expert) {
    double sum = 0.0;
    const double n = static_cast<double>(samples.size());
    for (const StateAction& sa : samples) {
      const Vec input = state_action_input(sa.obs, sa.action);
      const Mlp::Trace tr = d.f_net.trace(input);
      const double f = tr.output()[0];
      if (!std::isfinite(f)) throw Error(ErrorKind::kTrainingDiverged, "non-finite discriminator output");
      const double logit = f - p.logprob(sa.obs, sa.action);
      // -log D = softplus(-logit), -log(1 - D) = softplus(logit).
      sum += is_expert ? softplus(-logit) : softplus(logit);
      if (grad) {
        const double upstream = (is_expert ? -sigmoid(-logit) : sigmoid(logit)) / n;
        d.f_net.backward(tr, std::span<const double>(&upstream, 1), *grad);
      }
    }
    return sum / n;
  };
  return half(expert, true) + half(policy, false);
}

RolloutBatch collect_rollouts(const Policy& p, const EnvConfig& cfg, int n_steps, std::uint64_t seed) {
  if (n_steps < cfg.horizon) throw Error(ErrorKind::kInvalidConfig, "rollout steps must cover one horizon");
  RolloutBatch batch;
  for (std::uint64_t e = 0; static_cast<int>(batch.size()) < n_steps; ++e) {
    EpisodeRecord rec;
    rec.seed = derive_seed(seed, 2 * e);
    Rng noise(derive_seed(seed, 2 * e + 1));
    WorldState s = reset(cfg, rec.seed);
    batch.episode_start.push_back(static_cast<int>(batch.size()));
    while (s.t < cfg.horizon) {
      Observation obs = observe(s, cfg);
      Vec a = p.sample(obs, noise);
      batch.logprob.push_back(p.logprob(obs, a));
      s = step(s, Action{clamp_action(a, cfg.a_max)}, cfg);
      batch.obs.push_back(std::move(obs));
      batch.actions.push_back(std::move(a));
      ++rec.steps;
      rec.collision = rec.collision || is_collision(s, cfg);
      if (is_success(s, cfg)) {
        rec.success = true;
        break;
      }
    }
    batch.episode_terminal.push_back(rec.success);
    batch.episode_final_obs.push_back(observe(s, cfg));
    batch.episodes.push_back(rec);
  }
  return batch;
}

void assign_rewards(RolloutBatch& batch, const Discriminator& d, const Policy& p, double a_max) {
  batch.reward.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    batch.reward[i] = recovered_reward(d, p, batch.obs[i], clamp_action(batch.actions[i], a_max));
  }
}

Vec gae_advantages(std::span<const double> rewards, std::span<const double> values, double bootstrap,
                   double gamma, double lambda) {
  const std::size_t n = rewards.size();
  Vec adv(n);
  double running = 0.0;
  double next_value = bootstrap;
  for (std::size_t k = n; k-- > 0;) {
    const double delta = rewards[k] + gamma * next_value - values[k];
    running = delta + gamma * lambda * running;
    adv[k] = running;
    next_value = values[k];
  }
  return adv;
}

Vec discounted_returns(std::span<const double> rewards, double bootstrap, double gamma) {
  Vec ret(rewards.size());
  double running = bootstrap;
  for (std::size_t k = rewards.size(); k-- > 0;) {
    running = rewards[k] + gamma * running;
    ret[k] = running;
  }
  return ret;
}

void estimate_advantages(RolloutBatch& batch, const Mlp* critic, double gamma, double lambda) {
  const std::size_t n = batch.size();
  batch.gamma = gamma;
  batch.gae_lambda = lambda;
  batch.value.assign(n, 0.0);
  if (critic) {
    for (std::size_t i = 0; i < n; ++i) batch.value[i] = critic->forward(batch.obs[i])[0];
  }
  batch.advantage.resize(n);
  batch.ret.resize(n);
  for (std::size_t e = 0; e < batch.episode_start.size(); ++e) {
    const std::size_t lo = batch.episode_start[e];
    const std::size_t hi = batch.episode_end(e);
    double bootstrap = 0.0;
    if (!batch.episode_terminal[e] && critic) bootstrap = critic->forward(batch.episode_final_obs[e])[0];
    const std::span<const double> r(batch.reward.data() + lo, hi - lo);
    const std::span<const double> v(batch.value.data() + lo, hi - lo);
    const Vec adv = gae_advantages(r, v, bootstrap, gamma, lambda);
    const Vec ret = discounted_returns(r, bootstrap, gamma);
    std::copy(adv.begin(), adv.end(), batch.advantage.begin() + lo);
    std::copy(ret.begin(), ret.end(), batch.ret.begin() + lo);
  }
}

void normalize_advantages(RolloutBatch& batch) {
  const std::size_t n = batch.advantage.size();
  if (n < 2) return;
  double mean = 0.0;
  for (double a : batch.advantage) mean += a;
  mean /= n;
  double var = 0.0;
  for (double a : batch.advantage) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / n);
  for (double& a : batch.advantage) a = (a - mean) / (sd + 1e-8);
}

PolicyGrad PolicyGrad::zeros(const Policy& p) {
  return PolicyGrad{Vec(p.mean_net.param_count(), 0.0), Vec(p.log_std.size(), 0.0)};
}

double policy_loss(const Policy& p, const RolloutBatch& batch, std::span<const std::size_t> idx, double clip,
                   double entropy_coef, PolicyGrad* grad) {
  const double n = static_cast<double>(idx.size());
  const std::size_t dim = p.log_std.size();
  Vec inv_var(dim);
  for (std::size_t i = 0; i < dim; ++i) inv_var[i] = std::exp(-2.0 * p.log_std[i]);

  double total = 0.0;
  Vec upstream(dim);
  for (std::size_t k : idx) {
    const Vec& a = batch.actions[k];
    const Mlp::Trace tr = p.mean_net.trace(batch.obs[k]);
    const Vec& mu = tr.output();
    const double lp = gaussian_logprob(mu, p.log_std, a);
    const double ratio = std::exp(lp - batch.logprob[k]);
    const double adv = batch.advantage[k];
    const double unclipped = ratio * adv;
    const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * adv;
    total += -std::min(unclipped, clipped);
    if (!grad) continue;
    // d(-min)/d logprob: only the unclipped branch depends on the parameters.
    const double dlp = unclipped <= clipped ? -unclipped / n : 0.0;
    if (dlp == 0.0) continue;
    for (std::size_t i = 0; i < dim; ++i) {
      const double diff = a[i] - mu[i];
      upstream[i] = dlp * diff * inv_var[i];
      grad->log_std[i] += dlp * (diff * diff * inv_var[i] - 1.0);
    }
    p.mean_net.backward(tr, upstream, grad->net);
  }
  if (grad) {
    for (double& g : grad->log_std) g -= entropy_coef;
  }
  return total / n - entropy_coef * p.entropy();
}

double policy_loss(const Policy& p, const RolloutBatch& batch, double clip, double entropy_coef,
                   PolicyGrad* grad) {
  std::vector<std::size_t> idx(batch.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return policy_loss(p, batch, idx, clip, entropy_coef, grad);
}

double value_loss(const Mlp& critic, const RolloutBatch& batch, std::span<const std::size_t> idx, Vec* grad) {
  const double n = static_cast<double>(idx.size());
  double total = 0.0;
  for (std::size_t k : idx) {
    const Mlp::Trace tr = critic.trace(batch.obs[k]);
    const double err = tr.output()[0] - batch.ret[k];
    total += 0.5 * err * err;
    if (grad) {
      const double upstream = err / n;
      critic.backward(tr, std::span<const double>(&upstream, 1), *grad);
    }
  }
  return total / n;
}

void AirlConfig::validate() const {
  const auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorKind::kInvalidConfig, what);
  };
  require(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
  require(gae_lambda >= 0.0 && gae_lambda <= 1.0, "gae_lambda must lie in [0, 1]");
  require(clip > 0.0, "clip must be positive");
  require(entropy_coef >= 0.0, "entropy_coef must be non-negative");
  require(rollout_steps >= 1 && minibatch >= 1 && ppo_epochs >= 0 && disc_epochs >= 0, "bad batch settings");
  require(policy_lr > 0.0 && disc_lr > 0.0 && value_lr > 0.0, "learning rates must be positive");
  require(eval_every >= 1 && eval_episodes >= 1, "bad evaluation settings");
}

AirlTrainer::AirlTrainer(const EnvConfig& env, const AirlConfig& cfg, const DemoSet& demos, std::uint64_t seed)
    : env_(env), cfg_(cfg), seed_(seed) {
  env_.validate();
  cfg_.validate();
  if (demos.demos.empty()) throw Error(ErrorKind::kInvalidConfig, "AIRL needs at least one demonstration");
  for (const Trajectory& traj : demos.demos) {
    for (const TrajectoryStep& st : traj.steps) expert_.push_back(StateAction{st.obs, st.action});
  }
  Rng init(derive_seed(seed, 0));
  policy_ = Policy::init(env_, cfg_.policy_hidden, cfg_.log_std_init, init);
  disc_ = Discriminator::init(env_, cfg_.disc_hidden, init);
  critic_ = Mlp::glorot(layers(env_.observation_size(), cfg_.value_hidden, 1), init);
  policy_opt_ = OptimState(policy_.mean_net.param_count(), cfg_.policy_lr, cfg_.adam_beta1, cfg_.adam_beta2, cfg_.adam_eps);
  log_std_opt_ = OptimState(policy_.log_std.size(), cfg_.policy_lr, cfg_.adam_beta1, cfg_.adam_beta2, cfg_.adam_eps);
  disc_opt_ = OptimState(disc_.f_net.param_count(), cfg_.disc_lr, cfg_.adam_beta1, cfg_.adam_beta2, cfg_.adam_eps);
  critic_opt_ = OptimState(critic_.param_count(), cfg_.value_lr, cfg_.adam_beta1, cfg_.adam_beta2, cfg_.adam_eps);
}

IterationRecord AirlTrainer::iterate(JointObjective* joint) {
  IterationRecord rec;
  rec.iteration = iteration_;
  const std::uint64_t it = static_cast<std::uint64_t>(iteration_);
  Rng rng(derive_seed(seed_, 2 * it + 2));
  RolloutBatch batch = collect_rollouts(policy_, env_, cfg_.rollout_steps, derive_seed(seed_, 2 * it + 1));
  const std::size_t n = batch.size();
  const std::size_t mb = static_cast<std::size_t>(cfg_.minibatch);

  // Discriminator pass.
  std::vector<StateAction> generated(n);
  for (std::size_t i = 0; i < n; ++i) {
    generated[i] = StateAction{batch.obs[i], clamp_action(batch.actions[i], env_.a_max)};
  }
  double disc_total = 0.0;
  int disc_steps = 0;
  for (int epoch = 0; epoch < cfg_.disc_epochs; ++epoch) {
    const auto order = permutation(n, rng);
    for (std::size_t lo = 0; lo < n; lo += mb) {
      const std::size_t hi = std::min(n, lo + mb);
      std::vector<StateAction> gen_mb, exp_mb;
      gen_mb.reserve(hi - lo);
      exp_mb.reserve(hi - lo);
      for (std::size_t k = lo; k < hi; ++k) {
        gen_mb.push_back(generated[order[k]]);
        exp_mb.push_back(expert_[rng.index(expert_.size())]);
      }
      Vec grad(disc_.f_net.param_count(), 0.0);
      disc_total += discriminator_loss(disc_, policy_, exp_mb, gen_mb, &grad);
      ++disc_steps;
      opt_step(disc_opt_, disc_.f_net, grad);
    }
  }
  if (disc_steps > 0) rec.loss_d = disc_total / disc_steps;

  assign_rewards(batch, disc_, policy_, env_.a_max);
  estimate_advantages(batch, &critic_, cfg_.gamma, cfg_.gae_lambda);
  if (cfg_.normalize_advantages) normalize_advantages(batch);

  if (joint) joint->begin_iteration(batch, policy_, rec);

  double policy_total = 0.0;
  int policy_steps = 0;
  for (int epoch = 0; epoch < cfg_.ppo_epochs; ++epoch) {
    const auto order = permutation(n, rng);
    for (std::size_t lo = 0; lo < n; lo += mb) {
      const std::span<const std::size_t> idx(order.data() + lo, std::min(n, lo + mb) - lo);
      PolicyGrad pg = PolicyGrad::zeros(policy_);
      policy_total += policy_loss(policy_, batch, idx, cfg_.clip, cfg_.entropy_coef, &pg);
      ++policy_steps;
      if (joint) joint->accumulate(batch, idx, policy_, pg.net);
      opt_step(policy_opt_, policy_.mean_net, pg.net);
      log_std_opt_.apply(policy_.log_std, pg.log_std);
      for (double& ls : policy_.log_std) ls = std::clamp(ls, kLogStdMin, kLogStdMax);

      Vec vg(critic_.param_count(), 0.0);
      value_loss(critic_, batch, idx, &vg);
      opt_step(critic_opt_, critic_, vg);
    }
  }
  if (policy_steps > 0) rec.loss_policy = policy_total / policy_steps;

  if (joint) joint->end_iteration(batch, policy_, rec);

  ++iteration_;
  if (iteration_ % cfg_.eval_every == 0) {
    const Metrics m = evaluate(policy_, env_, cfg_.eval_episodes, cfg_.eval_seed);
    rec.success_rate = m.success_rate;
    rec.collision_rate = m.collision_rate;
  }
  last_batch_ = std::move(batch);
  return rec;
}

AirlResult train_airl(const EnvConfig& env, const AirlConfig& cfg, const DemoSet& demos, int iters,
                      std::uint64_t seed) {
  AirlTrainer trainer(env, cfg, demos, seed);
  TrainReport report;
  for (int i = 0; i < iters; ++i) report.iterations.push_back(trainer.iterate());
  return AirlResult{trainer.policy(), trainer.discriminator(), trainer.critic(), std::move(report)};
}

}  // namespace cbfirl
