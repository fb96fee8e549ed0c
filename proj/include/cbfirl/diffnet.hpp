#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "cbfirl/dynamics.hpp"
#include "cbfirl/rng.hpp"

namespace cbfirl {

// Fully connected network with tanh hidden layers and a linear output layer.
// Parameters are stored flat: for each layer, the weight matrix (out x in,
// row-major) followed by the bias vector.
class Mlp {
 public:
  Mlp() = default;
  // All parameters zero.
  explicit Mlp(std::vector<int> layer_sizes);

  // Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
  static Mlp glorot(std::vector<int> layer_sizes, Rng& rng);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  std::size_t param_count() const { return params_.size(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  void set_params(std::vector<double> params);

  // Offset of layer l's bias block inside params().
  std::size_t bias_offset(int layer) const;

  Vec forward(std::span<const double> x) const;

  // Post-activation values of every layer, input first; used by backward.
  struct Trace {
    std::vector<Vec> values;
    const Vec& output() const { return values.back(); }
  };
  Trace trace(std::span<const double> x) const;

  // Reverse-mode product: adds upstream^T dy/dparams into param_grad and, when
  // input_grad is non-empty, writes upstream^T dy/dx into it.
  void backward(const Trace& tr, std::span<const double> upstream, std::span<double> param_grad,
                std::span<double> input_grad = {}) const;

  bool operator==(const Mlp&) const = default;

 private:
  std::vector<int> sizes_;
  std::vector<double> params_;
  std::vector<std::size_t> offsets_;  // weight block start per layer
};

struct Gradient {
  Vec params;
  Vec input;
};

// Convenience form of Mlp::trace + Mlp::backward.
Gradient backward(const Mlp& net, std::span<const double> x, std::span<const double> upstream);

// Adaptive moment estimation with bias correction.
struct OptimState {
  Vec first_moment;
  Vec second_moment;
  long step = 0;
  double step_size = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  OptimState() = default;
  OptimState(std::size_t n, double step_size, double beta1 = 0.9, double beta2 = 0.999,
             double epsilon = 1e-8);

  // Throws Error(kTrainingDiverged) on a non-finite gradient; params are left
  // untouched in that case.
  void apply(std::span<double> params, std::span<const double> grad);

  bool operator==(const OptimState&) const = default;
};

void opt_step(OptimState& opt, Mlp& net, std::span<const double> grad);

// Text checkpoint: first line layer sizes, then one parameter per line with
// 17 significant digits, then any extra values (also one per line).
void write_checkpoint(std::ostream& out, const Mlp& net, std::span<const double> extra = {});

struct Checkpoint {
  Mlp net;
  Vec extra;
};
Checkpoint read_checkpoint(std::istream& in);

}  // namespace cbfirl
