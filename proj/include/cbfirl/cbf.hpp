#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cbfirl/airl.hpp"
#include "cbfirl/demos.hpp"
#include "cbfirl/diffnet.hpp"
#include "cbfirl/dynamics.hpp"

namespace cbfirl {

// Neural barrier h(s); the superlevel set {h >= 0} is the certified region.
struct Barrier {
  Mlp h_net;

  static Barrier init(const EnvConfig& env, const std::vector<int>& hidden, double output_bias, Rng& rng);
  double value(std::span<const double> obs) const { return h_net.forward(obs)[0]; }

  bool operator==(const Barrier&) const = default;
};

struct CbfConfig {
  // Class-K slope: alpha(h) = lambda * h.
  double lambda = 3.0;
  // Weight of the derivative loss in the combined policy objective.
  double w = 0.01;
  double margin_safe = 0.05;
  double margin_pd = 0.05;
  double dt = 0.1;
  std::vector<int> barrier_hidden{128, 128};
  double barrier_output_bias = 0.1;
  double barrier_lr = 3e-3;
  int barrier_epochs = 60;
  int barrier_minibatch = 64;
  double barrier_stop_loss = 1e-3;
  double heldout_fraction = 0.2;
  double min_heldout_accuracy = 0.8;
  int joint_iters = 50;
  bool freeze_barrier_in_step2 = true;
  int explored_cap = 2048;

  void validate() const;
};

// Hinge sum over safe states of max(m_s - h, 0) plus over pd states of
// max(m_pd + h, 0). Accumulates the barrier-parameter gradient when given.
double barrier_loss(const Barrier& b, std::span<const Observation> safe, std::span<const Observation> pd,
                    double margin_safe, double margin_pd, Vec* grad = nullptr);

// max(-(h_next - h_now) / dt - lambda * h_now, 0).
double r3_violation(double h_now, double h_next, double dt, double lambda);
// (h_next - h_now) / dt + lambda * h_now.
double r3_slack(double h_now, double h_next, double dt, double lambda);

// Sum of r3_violation over the given states with h >= 0, the next state
// taken from the policy mean action. Gradients flow to the policy mean net
// through the action and to the barrier through both evaluations.
double derivative_loss(const Barrier& b, const Policy& p, std::span<const Observation> states,
                       const CbfConfig& cfg, const EnvConfig& env, Vec* policy_grad = nullptr,
                       Vec* barrier_grad = nullptr);

double combined_loss(double policy_term, double derivative_term, double w);

// Step 1: fits h to separate safe from potentially dangerous states.
// Throws Error(kBarrierUnlearnable) when held-out sign accuracy stays below
// cfg.min_heldout_accuracy after training.
std::pair<Barrier, BarrierReport> train_barrier(Barrier b, const DemoSet& demos, const CbfConfig& cfg,
                                                std::uint64_t seed);

// Sign accuracy: h >= 0 on safe states, h < 0 on pd states.
double sign_accuracy(const Barrier& b, std::span<const Observation> safe, std::span<const Observation> pd);

// Sampled minimum slack of the three barrier requirements; +inf when no
// explored state has h >= 0 and the third term is therefore vacuous.
double estimate_y(const Barrier& b, const Policy& p, std::span<const Observation> safe,
                  std::span<const Observation> pd, std::span<const Observation> explored, const CbfConfig& cfg,
                  const EnvConfig& env);

struct R3Check {
  std::size_t considered = 0;  // explored states with h >= 0
  std::size_t satisfied = 0;   // of those, zero violation
  double fraction() const { return considered ? static_cast<double>(satisfied) / considered : 1.0; }
};
R3Check check_r3(const Barrier& b, const Policy& p, std::span<const Observation> explored, const CbfConfig& cfg,
                 const EnvConfig& env);

// Step 2 objective: weighted derivative loss on explored states with h >= 0,
// optional barrier refinement against the pd states.
class CbfJointObjective final : public JointObjective {
 public:
  CbfJointObjective(Barrier barrier, const DemoSet& demos, const CbfConfig& cfg, const EnvConfig& env,
                    std::uint64_t seed);

  void begin_iteration(const RolloutBatch& batch, const Policy& policy, IterationRecord& record) override;
  double accumulate(const RolloutBatch& batch, std::span<const std::size_t> idx, const Policy& policy,
                    Vec& policy_net_grad) override;
  void end_iteration(const RolloutBatch& batch, const Policy& policy, IterationRecord& record) override;

  const Barrier& barrier() const { return barrier_; }

 private:
  Barrier barrier_;
  const DemoSet* demos_;
  CbfConfig cfg_;
  EnvConfig env_;
  std::uint64_t seed_;
  OptimState barrier_opt_;
  std::vector<char> in_pool_;
  std::vector<Observation> pool_;
  int iteration_ = 0;
};

struct CbfirlResult {
  Policy policy;
  Discriminator discriminator;
  Mlp critic;
  Barrier barrier;
  TrainReport report;
};

// Initializes and runs Step 1 on the demo set.
std::pair<Barrier, BarrierReport> fit_barrier(const EnvConfig& env, const DemoSet& demos, const CbfConfig& cfg,
                                              std::uint64_t seed);

// Runs cfg.joint_iters Step-2 iterations on top of an already trained AIRL
// state, appending records to report.
Barrier run_joint_phase(AirlTrainer& trainer, Barrier barrier, const DemoSet& demos, const CbfConfig& cfg,
                        std::uint64_t seed, TrainReport& report);

// AIRL pre-training for pretrain_iters, Step 1, then Step 2.
CbfirlResult train_cbfirl(const EnvConfig& env, const AirlConfig& airl_cfg, const CbfConfig& cbf_cfg,
                          const DemoSet& demos, int pretrain_iters, std::uint64_t seed);

}  // namespace cbfirl
