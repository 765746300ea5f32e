#include "snn/neuron.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "snn/rng.hpp"

namespace snn {

double spike_value(double u, double theta, const SpikeShape& shape) {
  if (shape.function == SpikeFunction::soft_sigmoid) {
    return 1.0 / (1.0 + std::exp(-shape.slope * (u - theta)));
  }
  return u >= theta ? 1.0 : 0.0;
}

void adlif_update(std::span<double> u, std::span<double> w, std::span<double> s,
                  const NeuronParams& params, std::span<const double> current,
                  Threshold threshold, const SpikeShape& shape) {
  const std::size_t n = u.size();
  if (w.size() != n || s.size() != n || current.size() != n || params.alpha.size() != n ||
      params.beta.size() != n || params.a.size() != n || params.b.size() != n) {
    throw std::invalid_argument("adlif_update: length mismatch (" + std::to_string(n) +
                                " neurons)");
  }
  const double theta = threshold.theta;
  for (std::size_t i = 0; i < n; ++i) {
    const double in = current[i];
    if (!std::isfinite(in)) {
      throw std::domain_error("adlif_update: non-finite input current at neuron " +
                              std::to_string(i));
    }
    const double alpha = params.alpha[i];
    const double beta = params.beta[i];
    const double u_prev = u[i];
    const double w_prev = w[i];
    const double s_prev = s[i];
    const double u_new = alpha * u_prev + (1.0 - alpha) * (in - w_prev) - theta * s_prev;
    const double w_new = beta * w_prev + (1.0 - beta) * params.a[i] * u_prev + params.b[i] * s_prev;
    u[i] = u_new;
    w[i] = w_new;
    s[i] = spike_value(u_new, theta, shape);
  }
}

LayerState adlif_step(const LayerState& state, const NeuronParams& params,
                      std::span<const double> current, Threshold threshold,
                      const SpikeShape& shape) {
  LayerState next = state;
  adlif_update(next.u, next.w, next.s, params, current, threshold, shape);
  return next;
}

NeuronParams init_params(std::size_t num_neurons, std::uint64_t seed,
                         const NeuronBounds& bounds) {
  if (num_neurons == 0) throw std::invalid_argument("init_params: num_neurons must be > 0");
  Rng rng(seed);
  NeuronParams p;
  auto fill = [&](std::vector<double>& v, double lo, double hi) {
    v.resize(num_neurons);
    for (auto& x : v) x = uniform(rng, lo, hi);
  };
  fill(p.alpha, bounds.alpha_lo, bounds.alpha_hi);
  fill(p.beta, bounds.beta_lo, bounds.beta_hi);
  fill(p.a, bounds.a_lo, bounds.a_hi);
  fill(p.b, bounds.b_lo, bounds.b_hi);
  return p;
}

void clip_in_place(NeuronParams& params, const NeuronBounds& bounds) {
  auto clamp = [](std::vector<double>& v, double lo, double hi) {
    for (auto& x : v) x = std::clamp(x, lo, hi);
  };
  clamp(params.alpha, bounds.alpha_lo, bounds.alpha_hi);
  clamp(params.beta, bounds.beta_lo, bounds.beta_hi);
  clamp(params.a, bounds.a_lo, bounds.a_hi);
  clamp(params.b, bounds.b_lo, bounds.b_hi);
}

NeuronParams clip_params(NeuronParams params, const NeuronBounds& bounds) {
  clip_in_place(params, bounds);
  return params;
}

LayerState init_state(std::size_t num_neurons, std::uint64_t seed, StateInit mode) {
  if (num_neurons == 0) throw std::invalid_argument("init_state: num_neurons must be > 0");
  LayerState st{std::vector<double>(num_neurons, 0.0), std::vector<double>(num_neurons, 0.0),
                std::vector<double>(num_neurons, 0.0)};
  if (mode == StateInit::random_uniform) {
    Rng rng(seed);
    for (auto& x : st.u) x = uniform(rng, 0.0, 1.0);
    for (auto& x : st.w) x = uniform(rng, 0.0, 1.0);
  }
  return st;
}

}  // namespace snn
