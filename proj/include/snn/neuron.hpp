#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace snn {

// Clipping box for the four adaptation parameters. The defaults are the
// AdLIF+ ranges; initialisation draws uniformly from the same box.
struct NeuronBounds {
  double alpha_lo = 0.36, alpha_hi = 0.96;
  double beta_lo = 0.96, beta_hi = 0.99;
  double a_lo = 0.0, a_hi = 1.0;
  double b_lo = 0.0, b_hi = 2.0;
};

inline constexpr NeuronBounds kAdlifPlusBounds{};

// Plain LIF: adaptation switched off by pinning a = b = 0.
inline constexpr NeuronBounds kLifBounds{0.36, 0.96, 0.96, 0.99, 0.0, 0.0, 0.0, 0.0};

struct NeuronParams {
  std::vector<double> alpha;  // membrane leak
  std::vector<double> beta;   // adaptation leak
  std::vector<double> a;      // subthreshold coupling u -> w
  std::vector<double> b;      // spike-triggered adaptation increment

  std::size_t size() const { return alpha.size(); }
  bool operator==(const NeuronParams&) const = default;
};

struct LayerState {
  std::vector<double> u;  // membrane potential
  std::vector<double> w;  // adaptation current
  std::vector<double> s;  // spike emitted at the previous step

  std::size_t size() const { return u.size(); }
  bool operator==(const LayerState&) const = default;
};

struct Threshold {
  double theta = 1.0;
};

// How s[t] is produced from u[t]. `heaviside` is the real model; the smooth
// sigmoid variant makes the forward pass differentiable so finite
// differences can check the backward pass.
enum class SpikeFunction { heaviside, soft_sigmoid };

struct SpikeShape {
  SpikeFunction function = SpikeFunction::heaviside;
  double slope = 5.0;  // sigmoid steepness, soft mode only
};

double spike_value(double u, double theta, const SpikeShape& shape = {});

// One step of the AdLIF recurrence, in place:
//   u[t] = alpha u[t-1] + (1 - alpha)(I[t] - w[t-1]) - theta s[t-1]
//   w[t] = beta w[t-1] + (1 - beta) a u[t-1] + b s[t-1]
//   s[t] = u[t] >= theta
// Both updates read only t-1 quantities. Throws std::invalid_argument on
// length mismatch and std::domain_error on non-finite input current.
void adlif_update(std::span<double> u, std::span<double> w, std::span<double> s,
                  const NeuronParams& params, std::span<const double> current,
                  Threshold threshold, const SpikeShape& shape = {});

// Value-semantics form: returns the state at t; its `s` field holds the spikes.
LayerState adlif_step(const LayerState& state, const NeuronParams& params,
                      std::span<const double> current, Threshold threshold = {},
                      const SpikeShape& shape = {});

NeuronParams init_params(std::size_t num_neurons, std::uint64_t seed,
                         const NeuronBounds& bounds = kAdlifPlusBounds);

void clip_in_place(NeuronParams& params, const NeuronBounds& bounds = kAdlifPlusBounds);
NeuronParams clip_params(NeuronParams params, const NeuronBounds& bounds = kAdlifPlusBounds);

enum class StateInit { random_uniform, zeros };

// random_uniform: u, w ~ U[0, 1); zeros: everything 0. s always starts at 0.
LayerState init_state(std::size_t num_neurons, std::uint64_t seed,
                      StateInit mode = StateInit::random_uniform);

}  // namespace snn
