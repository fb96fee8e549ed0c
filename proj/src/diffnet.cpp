#include "cbfirl/diffnet.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "cbfirl/error.hpp"

namespace cbfirl {

namespace {

void check_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw Error(ErrorKind::kDimensionMismatch, std::string(what) + ": expected " +
                                                   std::to_string(want) + ", got " +
                                                   std::to_string(got));
  }
}

}  // namespace

Mlp::Mlp(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw Error(ErrorKind::kInvalidConfig, "an Mlp needs at least two layer sizes");
  std::size_t total = 0;
  for (int l = 0; l + 1 < static_cast<int>(sizes_.size()); ++l) {
    if (sizes_[l] < 1 || sizes_[l + 1] < 1) throw Error(ErrorKind::kInvalidConfig, "layer widths must be positive");
    offsets_.push_back(total);
    total += static_cast<std::size_t>(sizes_[l]) * sizes_[l + 1] + sizes_[l + 1];
  }
  params_.assign(total, 0.0);
}

Mlp Mlp::glorot(std::vector<int> layer_sizes, Rng& rng) {
  Mlp net(std::move(layer_sizes));
  for (int l = 0; l < net.num_layers(); ++l) {
    const int in = net.sizes_[l];
    const int out = net.sizes_[l + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    double* w = net.params_.data() + net.offsets_[l];
    for (int k = 0; k < in * out; ++k) w[k] = rng.uniform(-limit, limit);
  }
  return net;
}

void Mlp::set_params(std::vector<double> params) {
  check_size(params.size(), params_.size(), "parameter vector");
  params_ = std::move(params);
}

std::size_t Mlp::bias_offset(int layer) const {
  return offsets_[layer] + static_cast<std::size_t>(sizes_[layer]) * sizes_[layer + 1];
}

Mlp::Trace Mlp::trace(std::span<const double> x) const {
  check_size(x.size(), static_cast<std::size_t>(input_size()), "network input");
  Trace tr;
  tr.values.reserve(sizes_.size());
  tr.values.emplace_back(x.begin(), x.end());
  for (int l = 0; l < num_layers(); ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const double* w = params_.data() + offsets_[l];
    const double* b = w + static_cast<std::size_t>(in) * out;
    const Vec& h = tr.values.back();
    Vec z(out);
    for (int o = 0; o < out; ++o) {
      const double* row = w + static_cast<std::size_t>(o) * in;
      double acc = b[o];
      for (int i = 0; i < in; ++i) acc += row[i] * h[i];
      z[o] = acc;
    }
    if (l + 1 < num_layers()) {
      for (double& v : z) v = std::tanh(v);
    }
    tr.values.push_back(std::move(z));
  }
  return tr;
}

Vec Mlp::forward(std::span<const double> x) const {
  return std::move(trace(x).values.back());
}

void Mlp::backward(const Trace& tr, std::span<const double> upstream, std::span<double> param_grad,
                   std::span<double> input_grad) const {
  check_size(upstream.size(), static_cast<std::size_t>(output_size()), "upstream cotangent");
  check_size(param_grad.size(), params_.size(), "parameter gradient");
  if (!input_grad.empty()) check_size(input_grad.size(), static_cast<std::size_t>(input_size()), "input gradient");

  Vec delta(upstream.begin(), upstream.end());
  for (int l = num_layers() - 1; l >= 0; --l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const double* w = params_.data() + offsets_[l];
    double* gw = param_grad.data() + offsets_[l];
    double* gb = gw + static_cast<std::size_t>(in) * out;
    const Vec& h = tr.values[l];
    const bool need_prev = l > 0 || !input_grad.empty();
    Vec prev(need_prev ? in : 0, 0.0);
    for (int o = 0; o < out; ++o) {
      const double d = delta[o];
      gb[o] += d;
      if (d == 0.0) continue;
      const double* row = w + static_cast<std::size_t>(o) * in;
      double* grow = gw + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) grow[i] += d * h[i];
      if (need_prev) {
        for (int i = 0; i < in; ++i) prev[i] += row[i] * d;
      }
    }
    if (l > 0) {
      for (int i = 0; i < in; ++i) prev[i] *= 1.0 - h[i] * h[i];
      delta = std::move(prev);
    } else if (!input_grad.empty()) {
      std::copy(prev.begin(), prev.end(), input_grad.begin());
    }
  }
}

Gradient backward(const Mlp& net, std::span<const double> x, std::span<const double> upstream) {
  Gradient g;
  g.params.assign(net.param_count(), 0.0);
  g.input.assign(net.input_size(), 0.0);
  net.backward(net.trace(x), upstream, g.params, g.input);
  return g;
}

OptimState::OptimState(std::size_t n, double step_size_, double beta1_, double beta2_, double epsilon_)
    : first_moment(n, 0.0),
      second_moment(n, 0.0),
      step_size(step_size_),
      beta1(beta1_),
      beta2(beta2_),
      epsilon(epsilon_) {}

void OptimState::apply(std::span<double> params, std::span<const double> grad) {
  check_size(params.size(), first_moment.size(), "optimizer parameters");
  check_size(grad.size(), first_moment.size(), "optimizer gradient");
  for (double g : grad) {
    if (!std::isfinite(g)) throw Error(ErrorKind::kTrainingDiverged, "non-finite gradient entry");
  }
  ++step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    first_moment[i] = beta1 * first_moment[i] + (1.0 - beta1) * grad[i];
    second_moment[i] = beta2 * second_moment[i] + (1.0 - beta2) * grad[i] * grad[i];
    const double m_hat = first_moment[i] / c1;
    const double v_hat = second_moment[i] / c2;
    params[i] -= step_size * m_hat / (std::sqrt(v_hat) + epsilon);
  }
}

void opt_step(OptimState& opt, Mlp& net, std::span<const double> grad) {
  opt.apply(net.params(), grad);
}

namespace {

void write_value(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf << '\n';
}

}  // namespace

void write_checkpoint(std::ostream& out, const Mlp& net, std::span<const double> extra) {
  const auto& sizes = net.layer_sizes();
  for (std::size_t i = 0; i < sizes.size(); ++i) out << (i ? " " : "") << sizes[i];
  out << '\n';
  for (double v : net.params()) write_value(out, v);
  for (double v : extra) write_value(out, v);
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::kParse, "empty checkpoint");
  std::istringstream header(line);
  std::vector<int> sizes;
  int width = 0;
  while (header >> width) sizes.push_back(width);
  if (!header.eof() || sizes.size() < 2) throw Error(ErrorKind::kParse, "bad checkpoint header '" + line + "'");

  Checkpoint ck{Mlp(sizes), {}};
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    char* end = nullptr;
    const double v = std::strtod(line.c_str(), &end);
    if (end == line.c_str() || *end != '\0') throw Error(ErrorKind::kParse, "bad checkpoint value '" + line + "'");
    values.push_back(v);
  }
  const std::size_t n = ck.net.param_count();
  if (values.size() < n) throw Error(ErrorKind::kParse, "checkpoint truncated");
  ck.extra.assign(values.begin() + static_cast<std::ptrdiff_t>(n), values.end());
  values.resize(n);
  ck.net.set_params(std::move(values));
  return ck;
}

}  // namespace cbfirl
