#include "cbfirl/cbf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cbfirl/error.hpp"

namespace cbfirl {

namespace {

std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.index(i)]);
  return idx;
}

}  // namespace

Barrier Barrier::init(const EnvConfig& env, const std::vector<int>& hidden, double output_bias, Rng& rng) {
  std::vector<int> sizes{env.observation_size()};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  Barrier b{Mlp::glorot(sizes, rng)};
  b.h_net.params()[b.h_net.bias_offset(b.h_net.num_layers() - 1)] = output_bias;
  return b;
}

void CbfConfig::validate() const {
  const auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorKind::kInvalidConfig, what);
  };
  require(lambda > 0.0, "lambda must be positive");
  require(w >= 0.0, "w must be non-negative");
  require(margin_safe >= 0.0 && margin_pd >= 0.0, "margins must be non-negative");
  require(dt > 0.0, "dt must be positive");
  require(lambda * dt <= 1.0, "lambda * dt must not exceed 1");
  require(barrier_epochs >= 0 && joint_iters >= 0, "budgets must be non-negative");
  require(barrier_minibatch >= 1 && explored_cap >= 1, "batch sizes must be positive");
  require(heldout_fraction > 0.0 && heldout_fraction < 1.0, "heldout_fraction must lie in (0, 1)");
}

double barrier_loss(const Barrier& b, std::span<const Observation> safe, std::span<const Observation> pd,
                    double margin_safe, double margin_pd, Vec* grad) {
  double total = 0.0;
  for (const Observation& s : safe) {
    const Mlp::Trace tr = b.h_net.trace(s);
    const double hinge = margin_safe - tr.output()[0];
    if (hinge <= 0.0) continue;
    total += hinge;
    if (grad) {
      const double up = -1.0;
      b.h_net.backward(tr, std::span<const double>(&up, 1), *grad);
    }
  }
  for (const Observation& s : pd) {
    const Mlp::Trace tr = b.h_net.trace(s);
    const double hinge = margin_pd + tr.output()[0];
    if (hinge <= 0.0) continue;
    total += hinge;
    if (grad) {
      const double up = 1.0;
      b.h_net.backward(tr, std::span<const double>(&up, 1), *grad);
    }
  }
  return total;
}

double r3_slack(double h_now, double h_next, double dt, double lambda) {
  return (h_next - h_now) / dt + lambda * h_now;
}

double r3_violation(double h_now, double h_next, double dt, double lambda) {
  return std::max(-(h_next - h_now) / dt - lambda * h_now, 0.0);
}

double derivative_loss(const Barrier& b, const Policy& p, std::span<const Observation> states,
                       const CbfConfig& cfg, const EnvConfig& env, Vec* policy_grad, Vec* barrier_grad) {
  double total = 0.0;
  Vec next_cot(env.observation_size());
  Vec scratch;
  for (const Observation& s : states) {
    const Mlp::Trace tr_now = b.h_net.trace(s);
    const double h_now = tr_now.output()[0];
    if (h_now < 0.0) continue;
    const Mlp::Trace tr_act = p.mean_net.trace(s);
    const Vec& action = tr_act.output();
    const Observation next = advance_observation(s, action, env);
    const Mlp::Trace tr_next = b.h_net.trace(next);
    const double term = r3_violation(h_now, tr_next.output()[0], cfg.dt, cfg.lambda);
    if (term <= 0.0) continue;
    total += term;
    const double up_next = -1.0 / cfg.dt;
    if (barrier_grad) {
      const double up_now = 1.0 / cfg.dt - cfg.lambda;
      b.h_net.backward(tr_now, std::span<const double>(&up_now, 1), *barrier_grad);
    }
    if (policy_grad) {
      if (!barrier_grad) scratch.assign(b.h_net.param_count(), 0.0);
      std::span<double> target = barrier_grad ? std::span<double>(*barrier_grad) : std::span<double>(scratch);
      b.h_net.backward(tr_next, std::span<const double>(&up_next, 1), target, next_cot);
      const Vec action_cot = advance_observation_vjp(s, action, env, next_cot);
      p.mean_net.backward(tr_act, action_cot, *policy_grad);
    } else if (barrier_grad) {
      b.h_net.backward(tr_next, std::span<const double>(&up_next, 1), *barrier_grad);
    }
  }
  return total;
}

double combined_loss(double policy_term, double derivative_term, double w) {
  if (w == 0.0) return policy_term;
  return policy_term + w * derivative_term;
}

double sign_accuracy(const Barrier& b, std::span<const Observation> safe, std::span<const Observation> pd) {
  std::size_t correct = 0;
  for (const Observation& s : safe) correct += b.value(s) >= 0.0;
  for (const Observation& s : pd) correct += b.value(s) < 0.0;
  const std::size_t total = safe.size() + pd.size();
  return total ? static_cast<double>(correct) / total : 1.0;
}

std::pair<Barrier, BarrierReport> train_barrier(Barrier b, const DemoSet& demos, const CbfConfig& cfg,
                                                std::uint64_t seed) {
  cfg.validate();
  if (demos.safe_states.empty() || demos.pd_states.empty()) {
    throw Error(ErrorKind::kInvalidConfig, "barrier training needs safe and pd states");
  }
  Rng rng(seed);
  const auto split = [&](const std::vector<Observation>& all, std::vector<Observation>& train,
                         std::vector<Observation>& held) {
    const auto order = shuffled(all.size(), rng);
    const std::size_t n_held = static_cast<std::size_t>(cfg.heldout_fraction * all.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
      (k + n_held >= order.size() ? held : train).push_back(all[order[k]]);
    }
  };
  std::vector<Observation> safe_train, safe_held, pd_train, pd_held;
  split(demos.safe_states, safe_train, safe_held);
  split(demos.pd_states, pd_train, pd_held);
  safe_train.insert(safe_train.end(), demos.clear_states.begin(), demos.clear_states.end());

  BarrierReport report;
  report.n_train = safe_train.size() + pd_train.size();
  report.n_heldout = safe_held.size() + pd_held.size();

  OptimState opt(b.h_net.param_count(), cfg.barrier_lr);
  const std::size_t n_safe = safe_train.size();
  const std::size_t n = report.n_train;
  const std::size_t mb = static_cast<std::size_t>(cfg.barrier_minibatch);
  std::vector<Observation> mb_safe, mb_pd;
  for (int epoch = 0; epoch < cfg.barrier_epochs; ++epoch) {
    const auto order = shuffled(n, rng);
    for (std::size_t lo = 0; lo < n; lo += mb) {
      mb_safe.clear();
      mb_pd.clear();
      for (std::size_t k = lo; k < std::min(n, lo + mb); ++k) {
        const std::size_t i = order[k];
        if (i < n_safe) mb_safe.push_back(safe_train[i]);
        else mb_pd.push_back(pd_train[i - n_safe]);
      }
      Vec grad(b.h_net.param_count(), 0.0);
      barrier_loss(b, mb_safe, mb_pd, cfg.margin_safe, cfg.margin_pd, &grad);
      opt_step(opt, b.h_net, grad);
    }
    ++report.epochs_run;
    report.final_loss = barrier_loss(b, safe_train, pd_train, cfg.margin_safe, cfg.margin_pd);
    if (report.final_loss < cfg.barrier_stop_loss) break;
  }
  if (report.epochs_run == 0) {
    report.final_loss = barrier_loss(b, safe_train, pd_train, cfg.margin_safe, cfg.margin_pd);
  }
  report.heldout_accuracy = sign_accuracy(b, safe_held, pd_held);
  if (report.epochs_run > 0 && report.heldout_accuracy < cfg.min_heldout_accuracy) {
    throw Error(ErrorKind::kBarrierUnlearnable,
                "held-out sign accuracy " + std::to_string(report.heldout_accuracy));
  }
  return {std::move(b), report};
}

double estimate_y(const Barrier& b, const Policy& p, std::span<const Observation> safe,
                  std::span<const Observation> pd, std::span<const Observation> explored, const CbfConfig& cfg,
                  const EnvConfig& env) {
  double safe_min = std::numeric_limits<double>::infinity();
  for (const Observation& s : safe) safe_min = std::min(safe_min, b.value(s));
  double pd_min = std::numeric_limits<double>::infinity();
  for (const Observation& s : pd) pd_min = std::min(pd_min, -b.value(s));
  double r3_min = std::numeric_limits<double>::infinity();
  for (const Observation& s : explored) {
    const double h_now = b.value(s);
    if (h_now < 0.0) continue;
    const double h_next = b.value(advance_observation(s, p.mean(s), env));
    r3_min = std::min(r3_min, r3_slack(h_now, h_next, cfg.dt, cfg.lambda));
  }
  return std::min({safe_min, pd_min, r3_min});
}

R3Check check_r3(const Barrier& b, const Policy& p, std::span<const Observation> explored, const CbfConfig& cfg,
                 const EnvConfig& env) {
  R3Check check;
  for (const Observation& s : explored) {
    const double h_now = b.value(s);
    if (h_now < 0.0) continue;
    ++check.considered;
    const double h_next = b.value(advance_observation(s, p.mean(s), env));
    check.satisfied += r3_violation(h_now, h_next, cfg.dt, cfg.lambda) == 0.0;
  }
  return check;
}

CbfJointObjective::CbfJointObjective(Barrier barrier, const DemoSet& demos, const CbfConfig& cfg,
                                     const EnvConfig& env, std::uint64_t seed)
    : barrier_(std::move(barrier)),
      demos_(&demos),
      cfg_(cfg),
      env_(env),
      seed_(seed),
      barrier_opt_(barrier_.h_net.param_count(), cfg.barrier_lr) {
  cfg_.validate();
}

void CbfJointObjective::begin_iteration(const RolloutBatch& batch, const Policy& policy, IterationRecord& record) {
  in_pool_.assign(batch.size(), 0);
  pool_.clear();
  for (std::size_t i = 0; i < batch.size() && pool_.size() < static_cast<std::size_t>(cfg_.explored_cap); ++i) {
    if (barrier_.value(batch.obs[i]) >= 0.0) {
      in_pool_[i] = 1;
      pool_.push_back(batch.obs[i]);
    }
  }
  record.loss_derivative = derivative_loss(barrier_, policy, pool_, cfg_, env_);
  record.loss_barrier =
      barrier_loss(barrier_, demos_->safe_states, demos_->pd_states, cfg_.margin_safe, cfg_.margin_pd);
  record.estimate_y = estimate_y(barrier_, policy, demos_->safe_states, demos_->pd_states, pool_, cfg_, env_);
}

double CbfJointObjective::accumulate(const RolloutBatch& batch, std::span<const std::size_t> idx,
                                     const Policy& policy, Vec& policy_net_grad) {
  if (cfg_.w == 0.0) return 0.0;
  std::vector<Observation> states;
  for (std::size_t k : idx) {
    if (in_pool_[k]) states.push_back(batch.obs[k]);
  }
  if (states.empty()) return 0.0;
  Vec grad(policy_net_grad.size(), 0.0);
  const double value = derivative_loss(barrier_, policy, states, cfg_, env_, &grad);
  for (std::size_t i = 0; i < grad.size(); ++i) policy_net_grad[i] += cfg_.w * grad[i];
  return value;
}

void CbfJointObjective::end_iteration(const RolloutBatch& /*batch*/, const Policy& policy,
                                      IterationRecord& /*record*/) {
  const int it = iteration_++;
  if (cfg_.freeze_barrier_in_step2 || pool_.empty()) return;
  // Explored states clear of the pd shell count as safe; the pd set stays fixed.
  std::vector<Observation> explored_safe;
  for (const Observation& s : pool_) {
    if (nearest_obstacle_distance(s, env_) >= demos_->d_pd) explored_safe.push_back(s);
  }
  Rng rng(derive_seed(seed_, static_cast<std::uint64_t>(it)));
  const std::size_t mb = static_cast<std::size_t>(cfg_.barrier_minibatch);
  const auto order = shuffled(pool_.size(), rng);
  for (std::size_t lo = 0; lo < order.size(); lo += mb) {
    std::vector<Observation> mb_explored, mb_safe, mb_pd;
    for (std::size_t k = lo; k < std::min(order.size(), lo + mb); ++k) mb_explored.push_back(pool_[order[k]]);
    for (std::size_t k = 0; k < mb && !explored_safe.empty(); ++k) {
      mb_safe.push_back(explored_safe[rng.index(explored_safe.size())]);
    }
    for (std::size_t k = 0; k < mb; ++k) mb_pd.push_back(demos_->pd_states[rng.index(demos_->pd_states.size())]);
    Vec grad(barrier_.h_net.param_count(), 0.0);
    barrier_loss(barrier_, mb_safe, mb_pd, cfg_.margin_safe, cfg_.margin_pd, &grad);
    Vec dgrad(barrier_.h_net.param_count(), 0.0);
    derivative_loss(barrier_, policy, mb_explored, cfg_, env_, nullptr, &dgrad);
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += cfg_.w * dgrad[i];
    opt_step(barrier_opt_, barrier_.h_net, grad);
  }
}

std::pair<Barrier, BarrierReport> fit_barrier(const EnvConfig& env, const DemoSet& demos, const CbfConfig& cfg,
                                              std::uint64_t seed) {
  Rng init(derive_seed(seed, 101));
  Barrier b = Barrier::init(env, cfg.barrier_hidden, cfg.barrier_output_bias, init);
  return train_barrier(std::move(b), demos, cfg, derive_seed(seed, 102));
}

Barrier run_joint_phase(AirlTrainer& trainer, Barrier barrier, const DemoSet& demos, const CbfConfig& cfg,
                        std::uint64_t seed, TrainReport& report) {
  CbfJointObjective joint(std::move(barrier), demos, cfg, trainer.env(), derive_seed(seed, 103));
  for (int i = 0; i < cfg.joint_iters; ++i) report.iterations.push_back(trainer.iterate(&joint));
  return joint.barrier();
}

CbfirlResult train_cbfirl(const EnvConfig& env, const AirlConfig& airl_cfg, const CbfConfig& cbf_cfg,
                          const DemoSet& demos, int pretrain_iters, std::uint64_t seed) {
  cbf_cfg.validate();
  AirlTrainer trainer(env, airl_cfg, demos, seed);
  TrainReport report;
  for (int i = 0; i < pretrain_iters; ++i) report.iterations.push_back(trainer.iterate());
  auto [barrier, barrier_report] = fit_barrier(env, demos, cbf_cfg, seed);
  report.barrier = barrier_report;
  Barrier refined = run_joint_phase(trainer, std::move(barrier), demos, cbf_cfg, seed, report);
  return CbfirlResult{trainer.policy(), trainer.discriminator(), trainer.critic(), std::move(refined),
                      std::move(report)};
}

}  // namespace cbfirl
