#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "snn/data.hpp"
#include "snn/network.hpp"

namespace snn {

struct SynapseGrads {
  Matrix weights;
  std::vector<double> bias;
  std::vector<double> delays;
};

struct NeuronGrads {
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<double> a;
  std::vector<double> b;
};

// Mirrors the trainable tensors of a Model.
struct Gradients {
  std::array<SynapseGrads, 3> synapses;
  std::array<NeuronGrads, 2> neurons;

  static Gradients zeros_like(const Model& model);
  void accumulate(const Gradients& other);
  bool all_finite() const;
};

// Mean over the batch of -log softmax(scores_n)[label_n]. Throws
// std::out_of_range for a label outside [0, classes).
double loss(const Matrix& scores, std::span<const int> labels);

// Fraction of rows whose arg-max (first on ties) equals the label.
double accuracy(const Matrix& scores, std::span<const int> labels);

// ds/du stand-in. Boxcar: 0.5 when |u - theta| <= 0.5, else 0. Soft mode:
// exact derivative of the sigmoid spike used in the forward pass.
double surrogate_grad(double u, double theta, const SpikeShape& shape = {});

struct BackwardOptions {
  // Stop gradients through the -theta s[t-1] reset and b s[t-1] terms.
  bool detach_reset = false;
  unsigned threads = 0;
};

// Reverse-time sweep over a recorded forward pass. Gradients are of the
// batch-mean loss. Throws std::runtime_error naming layer and step when an
// adjoint becomes non-finite.
Gradients backward(const ForwardRecord& record, const SpikeTensor& inputs,
                   std::span<const int> labels, const Model& model,
                   const BackwardOptions& options = {});

// ---------------------------------------------------------------------------
// Optimisation

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update; `step` is 1-based.
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, long step, double lr, const AdamHyper& hyper = {});

enum class ParamGroup { weights, delays };

struct ParamSlot {
  std::string name;
  std::span<double> value;
  std::span<double> grad;
  ParamGroup group;
};

// Trainable tensors in a fixed order. Frozen tensors (delays when
// train_delays is off; beta, a, b for LIF) are left out.
std::vector<ParamSlot> trainable_slots(Model& model, Gradients& grads);

// Reduce-on-plateau for a metric that should increase.
struct PlateauScheduler {
  double factor = 0.7;
  int patience = 5;
  double best = -std::numeric_limits<double>::infinity();
  int bad_epochs = 0;

  // Returns true when the learning rates should be scaled by `factor`.
  bool step(double metric);
};

struct OptimizerState {
  AdamHyper hyper{};
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long step = 0;
  double lr_weights = 0.01;
  double lr_delays = 0.1;
  PlateauScheduler scheduler{};
};

OptimizerState make_optimizer(const Model& model, double lr_weights, double delay_lr_factor = 10.0);

// Adam on every trainable slot (lr_weights or lr_delays by group), then
// parameter clipping and delay clamping. `max_grad_norm` > 0 rescales the
// gradient to that global L2 norm first.
void optimizer_step(OptimizerState& state, Model& model, Gradients& grads,
                    double max_grad_norm = 0.0);

// Feeds the epoch metric to the plateau scheduler; on a trigger both rates
// are multiplied by the factor. Returns whether it triggered.
bool scheduler_step(OptimizerState& state, double metric);

// ---------------------------------------------------------------------------
// Loops

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  double lr_weights = 0.01;
  double delay_lr_factor = 10.0;
  std::uint64_t seed = 0;
  bool detach_reset = false;
  double max_grad_norm = 0.0;
  unsigned threads = 0;
};

struct EpochMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
  double spikes_per_neuron = 0.0;  // hidden spikes / (hidden neurons * samples)
  std::size_t samples = 0;
  bool interrupted = false;
};

EpochMetrics train_epoch(Model& model, const Dataset& data, OptimizerState& optimizer,
                         const TrainConfig& config, std::size_t epoch,
                         const std::atomic<bool>* stop = nullptr);

struct EvalMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
  SpikeCounts spikes{};
  std::size_t samples = 0;
  double spikes_per_neuron = 0.0;
};

// Eval-mode pass (no dropout) with deterministic initial states.
EvalMetrics evaluate(const Model& model, const Dataset& data, std::size_t batch_size,
                     std::uint64_t seed, unsigned threads = 0);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double valid_acc = std::numeric_limits<double>::quiet_NaN();
  double lr_weights = 0.0;
  double lr_delays = 0.0;
  double spikes_per_neuron = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&, const Model&)>;

// Full training run: epochs of train_epoch, validation, scheduler. The
// scheduler follows validation accuracy, or the epoch training accuracy when
// `valid` is null or empty.
std::vector<EpochRecord> fit(Model& model, const Dataset& train, const Dataset* valid,
                             const TrainConfig& config, const EpochCallback& on_epoch = {},
                             const std::atomic<bool>* stop = nullptr);

}  // namespace snn
