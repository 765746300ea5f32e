#include "snn/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "snn/parallel.hpp"
#include "snn/rng.hpp"

namespace snn {

Gradients Gradients::zeros_like(const Model& model) {
  Gradients g;
  for (std::size_t l = 0; l < 3; ++l) {
    const auto& syn = model.synapses[l];
    g.synapses[l].weights = Matrix(syn.weights.rows, syn.weights.cols);
    g.synapses[l].bias.assign(syn.bias.size(), 0.0);
    g.synapses[l].delays.assign(syn.delays.d.size(), 0.0);
  }
  for (std::size_t l = 0; l < 2; ++l) {
    const auto n = model.neurons[l].size();
    g.neurons[l] = {std::vector<double>(n), std::vector<double>(n), std::vector<double>(n),
                    std::vector<double>(n)};
  }
  return g;
}

namespace {

void add_into(std::vector<double>& dst, const std::vector<double>& src) {
  for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
}

bool finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

void Gradients::accumulate(const Gradients& other) {
  for (std::size_t l = 0; l < 3; ++l) {
    add_into(synapses[l].weights.data, other.synapses[l].weights.data);
    add_into(synapses[l].bias, other.synapses[l].bias);
    add_into(synapses[l].delays, other.synapses[l].delays);
  }
  for (std::size_t l = 0; l < 2; ++l) {
    add_into(neurons[l].alpha, other.neurons[l].alpha);
    add_into(neurons[l].beta, other.neurons[l].beta);
    add_into(neurons[l].a, other.neurons[l].a);
    add_into(neurons[l].b, other.neurons[l].b);
  }
}

bool Gradients::all_finite() const {
  for (const auto& s : synapses) {
    if (!finite(s.weights.data) || !finite(s.bias) || !finite(s.delays)) return false;
  }
  for (const auto& n : neurons) {
    if (!finite(n.alpha) || !finite(n.beta) || !finite(n.a) || !finite(n.b)) return false;
  }
  return true;
}

namespace {

// log-softmax probabilities of one score row.
std::vector<double> softmax(std::span<const double> x) {
  const double peak = *std::max_element(x.begin(), x.end());
  std::vector<double> p(x.size());
  double z = 0.0;
  for (std::size_t c = 0; c < x.size(); ++c) {
    p[c] = std::exp(x[c] - peak);
    z += p[c];
  }
  for (auto& v : p) v /= z;
  return p;
}

void check_label(int label, std::size_t classes) {
  if (label < 0 || static_cast<std::size_t>(label) >= classes) {
    throw std::out_of_range("label " + std::to_string(label) + " outside [0, " +
                            std::to_string(classes) + ")");
  }
}

}  // namespace

double loss(const Matrix& scores, std::span<const int> labels) {
  if (labels.size() != scores.rows) throw std::invalid_argument("loss: batch size mismatch");
  if (scores.rows == 0) return 0.0;
  double total = 0.0;
  for (std::size_t n = 0; n < scores.rows; ++n) {
    check_label(labels[n], scores.cols);
    const auto row = scores.row(n);
    const double peak = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - peak);
    total += -(row[static_cast<std::size_t>(labels[n])] - peak - std::log(z));
  }
  return total / static_cast<double>(scores.rows);
}

double accuracy(const Matrix& scores, std::span<const int> labels) {
  if (labels.size() != scores.rows) throw std::invalid_argument("accuracy: batch size mismatch");
  if (scores.rows == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t n = 0; n < scores.rows; ++n) {
    const auto row = scores.row(n);
    const auto best = std::max_element(row.begin(), row.end()) - row.begin();
    if (best == labels[n]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(scores.rows);
}

double surrogate_grad(double u, double theta, const SpikeShape& shape) {
  if (shape.function == SpikeFunction::soft_sigmoid) {
    const double s = 1.0 / (1.0 + std::exp(-shape.slope * (u - theta)));
    return shape.slope * s * (1.0 - s);
  }
  return std::abs(u - theta) <= 0.5 ? 0.5 : 0.0;
}

namespace {

// Backward through one synapse set over the whole horizon. `pre` is the
// (steps x pre) presynaptic signal, `d_current` the adjoint of the
// postsynaptic current. When `d_pre` is null the presynaptic adjoint is not
// needed and silent stretches of `pre` are skipped.
void synapse_backward(const SynapseSet& syn, const Matrix& pre, const Matrix& d_current,
                      bool delay_grad, SynapseGrads& g, Matrix* d_pre) {
  const std::size_t steps = d_current.rows;
  const std::size_t n_pre = syn.weights.rows;
  const std::size_t n_post = syn.weights.cols;
  const int d_max = syn.delays.d_max;
  const auto taps = make_taps(syn.delays);
  delay_grad = delay_grad && d_max > 0;
  std::vector<long> last_active(n_pre, -(1L << 40));
  auto sig = [&](long t, std::size_t j) { return t >= 0 ? pre(static_cast<std::size_t>(t), j) : 0.0; };

  for (std::size_t t = 0; t < steps; ++t) {
    const auto dI = d_current.row(t);
    for (std::size_t i = 0; i < n_post; ++i) g.bias[i] += dI[i];
    for (std::size_t j = 0; j < n_pre; ++j) {
      if (pre(t, j) != 0.0) last_active[j] = static_cast<long>(t);
      if (d_pre == nullptr && static_cast<long>(t) - last_active[j] > d_max) continue;
      const double* f = syn.weights.data.data() + j * n_post;
      double* gw = g.weights.data.data() + j * n_post;
      const DelayTap* tap = taps.data() + j * n_post;
      for (std::size_t i = 0; i < n_post; ++i) {
        const long t0 = static_cast<long>(t) - tap[i].whole;
        const long t1 = t0 - 1;
        const double frac = tap[i].frac;
        const double s0 = sig(t0, j);
        const double s1 = (frac != 0.0 || delay_grad) ? sig(t1, j) : 0.0;
        double a = (1.0 - frac) * s0;
        if (frac != 0.0) a += frac * s1;
        gw[i] += dI[i] * a;
        const double da = f[i] * dI[i];
        if (delay_grad) g.delays[j * n_post + i] += da * (s1 - s0);
        if (d_pre != nullptr) {
          if (t0 >= 0) (*d_pre)(static_cast<std::size_t>(t0), j) += (1.0 - frac) * da;
          if (frac != 0.0 && t1 >= 0) (*d_pre)(static_cast<std::size_t>(t1), j) += frac * da;
        }
      }
    }
  }
}

// Reverse-time sweep through one hidden layer. `d_output` is the adjoint of
// the layer's (dropout-masked) output; returns the adjoint of its input
// current and accumulates the neuron-parameter gradients.
Matrix hidden_backward(const LayerTrace& tr, const NeuronParams& p, const Matrix& d_output,
                       const NetworkConfig& cfg, bool detach_reset, std::size_t layer,
                       NeuronGrads& g) {
  const std::size_t steps = tr.u.rows;
  const std::size_t n = tr.u.cols;
  const double theta = cfg.threshold.theta;
  const double reset_gate = detach_reset ? 0.0 : 1.0;
  Matrix d_current(steps, n);
  std::vector<double> gu_next(n, 0.0);
  std::vector<double> gw_next(n, 0.0);

  for (std::size_t step = steps; step-- > 0;) {
    for (std::size_t i = 0; i < n; ++i) {
      const double alpha = p.alpha[i];
      const double beta = p.beta[i];
      const double ext = tr.mask.empty() ? d_output(step, i) : d_output(step, i) * tr.mask(step, i);
      // s[t] feeds u[t+1] through the reset and w[t+1] through b.
      const double gs = ext + reset_gate * (-theta * gu_next[i] + p.b[i] * gw_next[i]);
      const double gu = surrogate_grad(tr.u(step, i), theta, cfg.spike) * gs + alpha * gu_next[i] +
                        (1.0 - beta) * p.a[i] * gw_next[i];
      const double gw = -(1.0 - alpha) * gu_next[i] + beta * gw_next[i];
      if (!std::isfinite(gu) || !std::isfinite(gw)) {
        throw std::runtime_error("non-finite adjoint in hidden layer " + std::to_string(layer + 1) +
                                 " at step " + std::to_string(step) + ", neuron " +
                                 std::to_string(i));
      }
      const double u_prev = step > 0 ? tr.u(step - 1, i) : tr.u0[i];
      const double w_prev = step > 0 ? tr.w(step - 1, i) : tr.w0[i];
      const double s_prev = step > 0 ? tr.s(step - 1, i) : 0.0;
      g.alpha[i] += gu * (u_prev - (tr.current(step, i) - w_prev));
      g.beta[i] += gw * (w_prev - p.a[i] * u_prev);
      g.a[i] += gw * (1.0 - beta) * u_prev;
      g.b[i] += gw * s_prev;
      d_current(step, i) = (1.0 - alpha) * gu;
      gu_next[i] = gu;
      gw_next[i] = gw;
    }
  }
  return d_current;
}

Gradients sample_backward(const SampleRecord& rec, std::span<const double> input,
                          std::size_t input_steps, int label, double scale, const Model& model,
                          const BackwardOptions& options) {
  const auto& cfg = model.config;
  const std::size_t steps = rec.readout_potential.rows;
  const std::size_t classes = cfg.classes;
  Gradients g = Gradients::zeros_like(model);

  // Cross-entropy over the class scores.
  const auto q = softmax(rec.scores);
  std::vector<double> d_scores(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    d_scores[c] = scale * (q[c] - (static_cast<int>(c) == label ? 1.0 : 0.0));
  }

  Matrix d_readout(steps, classes);
  for (std::size_t t = 0; t < steps; ++t) {
    auto d = d_readout.row(t);
    if (cfg.readout == ReadoutMode::sum_potentials) {
      std::copy(d_scores.begin(), d_scores.end(), d.begin());
      continue;
    }
    const auto p = softmax(rec.readout_potential.row(t));
    double dot = 0.0;
    for (std::size_t c = 0; c < classes; ++c) dot += p[c] * d_scores[c];
    for (std::size_t c = 0; c < classes; ++c) d[c] = p[c] * (d_scores[c] - dot);
  }

  const bool delay_grad = cfg.train_delays;
  Matrix d_pre(steps, cfg.hidden2);
  synapse_backward(model.synapses[2], rec.hidden[1].output, d_readout, delay_grad, g.synapses[2],
                   &d_pre);
  Matrix d_cur = hidden_backward(rec.hidden[1], model.neurons[1], d_pre, cfg, options.detach_reset,
                                 1, g.neurons[1]);

  d_pre = Matrix(steps, cfg.hidden1);
  synapse_backward(model.synapses[1], rec.hidden[0].output, d_cur, delay_grad, g.synapses[1],
                   &d_pre);
  d_cur = hidden_backward(rec.hidden[0], model.neurons[0], d_pre, cfg, options.detach_reset, 0,
                          g.neurons[0]);

  Matrix padded(steps, cfg.inputs);
  std::copy(input.begin(), input.begin() + static_cast<long>(input_steps * cfg.inputs),
            padded.data.begin());
  synapse_backward(model.synapses[0], padded, d_cur, delay_grad, g.synapses[0], nullptr);
  return g;
}

}  // namespace

Gradients backward(const ForwardRecord& record, const SpikeTensor& inputs,
                   std::span<const int> labels, const Model& model,
                   const BackwardOptions& options) {
  const std::size_t n = record.samples.size();
  if (labels.size() != n || inputs.batch != n) {
    throw std::invalid_argument("backward: record, inputs and labels disagree on batch size");
  }
  for (int label : labels) check_label(label, model.config.classes);
  Gradients total = Gradients::zeros_like(model);
  if (n == 0) return total;
  const double scale = 1.0 / static_cast<double>(n);
  // Per-sample gradients are summed in sample order whatever the thread
  // count, so results are reproducible bit for bit.
  const std::size_t chunk = resolve_threads(options.threads);
  std::vector<Gradients> slots(std::min(chunk, n));
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t count = std::min(chunk, n - start);
    parallel_for(count, options.threads, [&](std::size_t k) {
      const std::size_t b = start + k;
      slots[k] = sample_backward(record.samples[b], inputs.sample(b), record.input_steps, labels[b],
                                 scale, model, options);
    });
    for (std::size_t k = 0; k < count; ++k) total.accumulate(slots[k]);
  }
  return total;
}

// ---------------------------------------------------------------------------

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, long step, double lr, const AdamHyper& hyper) {
  if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size()) {
    throw std::invalid_argument("adam_update: shape mismatch");
  }
  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(step));
  for (std::size_t k = 0; k < param.size(); ++k) {
    m[k] = hyper.beta1 * m[k] + (1.0 - hyper.beta1) * grad[k];
    v[k] = hyper.beta2 * v[k] + (1.0 - hyper.beta2) * grad[k] * grad[k];
    const double m_hat = m[k] / c1;
    const double v_hat = v[k] / c2;
    param[k] -= lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
  }
}

std::vector<ParamSlot> trainable_slots(Model& model, Gradients& grads) {
  std::vector<ParamSlot> slots;
  const bool lif = model.config.neuron_model == NeuronModel::lif;
  for (std::size_t l = 0; l < 3; ++l) {
    auto& syn = model.synapses[l];
    auto& g = grads.synapses[l];
    const std::string prefix = "synapses" + std::to_string(l) + ".";
    slots.push_back({prefix + "weights", syn.weights.data, g.weights.data, ParamGroup::weights});
    slots.push_back({prefix + "bias", syn.bias, g.bias, ParamGroup::weights});
    if (model.config.train_delays) {
      slots.push_back({prefix + "delays", syn.delays.d, g.delays, ParamGroup::delays});
    }
  }
  for (std::size_t l = 0; l < 2; ++l) {
    auto& p = model.neurons[l];
    auto& g = grads.neurons[l];
    const std::string prefix = "hidden" + std::to_string(l + 1) + ".";
    slots.push_back({prefix + "alpha", p.alpha, g.alpha, ParamGroup::weights});
    if (!lif) {
      slots.push_back({prefix + "beta", p.beta, g.beta, ParamGroup::weights});
      slots.push_back({prefix + "a", p.a, g.a, ParamGroup::weights});
      slots.push_back({prefix + "b", p.b, g.b, ParamGroup::weights});
    }
  }
  return slots;
}

bool PlateauScheduler::step(double metric) {
  if (metric > best) {
    best = metric;
    bad_epochs = 0;
    return false;
  }
  if (++bad_epochs >= patience) {
    bad_epochs = 0;
    return true;
  }
  return false;
}

OptimizerState make_optimizer(const Model& model, double lr_weights, double delay_lr_factor) {
  OptimizerState st;
  st.lr_weights = lr_weights;
  st.lr_delays = delay_lr_factor * lr_weights;
  Model shape = model;
  Gradients g = Gradients::zeros_like(model);
  for (const auto& slot : trainable_slots(shape, g)) {
    st.m.emplace_back(slot.value.size(), 0.0);
    st.v.emplace_back(slot.value.size(), 0.0);
  }
  return st;
}

void optimizer_step(OptimizerState& state, Model& model, Gradients& grads, double max_grad_norm) {
  auto slots = trainable_slots(model, grads);
  if (slots.size() != state.m.size()) {
    throw std::logic_error("optimizer state does not match the model's trainable tensors");
  }
  if (max_grad_norm > 0.0) {
    double sq = 0.0;
    for (const auto& s : slots) {
      for (double x : s.grad) sq += x * x;
    }
    const double norm = std::sqrt(sq);
    if (norm > max_grad_norm) {
      const double k = max_grad_norm / norm;
      for (auto& s : slots) {
        for (double& x : s.grad) x *= k;
      }
    }
  }
  ++state.step;
  for (std::size_t k = 0; k < slots.size(); ++k) {
    const double lr = slots[k].group == ParamGroup::delays ? state.lr_delays : state.lr_weights;
    adam_update(slots[k].value, slots[k].grad, state.m[k], state.v[k], state.step, lr, state.hyper);
  }
  const auto bounds = model.config.bounds();
  for (auto& p : model.neurons) clip_in_place(p, bounds);
  for (auto& syn : model.synapses) clamp_in_place(syn.delays);
}

bool scheduler_step(OptimizerState& state, double metric) {
  if (!state.scheduler.step(metric)) return false;
  state.lr_weights *= state.scheduler.factor;
  state.lr_delays *= state.scheduler.factor;
  return true;
}

// ---------------------------------------------------------------------------

namespace {

double hidden_neurons(const Model& model) {
  return static_cast<double>(model.config.hidden1 + model.config.hidden2);
}

}  // namespace

EpochMetrics train_epoch(Model& model, const Dataset& data, OptimizerState& optimizer,
                         const TrainConfig& config, std::size_t epoch,
                         const std::atomic<bool>* stop) {
  if (data.empty()) throw std::invalid_argument("train_epoch: empty dataset");
  const auto batches =
      make_batches(data, config.batch_size, derive_seed(config.seed, SeedStream::shuffle, epoch));
  EpochMetrics metrics;
  double loss_sum = 0.0;
  double hits = 0.0;
  std::uint64_t spikes = 0;
  for (std::size_t k = 0; k < batches.size(); ++k) {
    if (stop != nullptr && stop->load()) {
      metrics.interrupted = true;
      break;
    }
    const auto& batch = batches[k];
    ForwardOptions fwd;
    fwd.mode = Mode::train;
    fwd.seed = derive_seed(derive_seed(config.seed, SeedStream::dropout, epoch), k);
    fwd.threads = config.threads;
    auto result = network_forward(batch.inputs, model, fwd);
    const double n = static_cast<double>(batch.labels.size());
    loss_sum += loss(result.scores, batch.labels) * n;
    hits += accuracy(result.scores, batch.labels) * n;
    spikes += result.spikes.per_layer[0] + result.spikes.per_layer[1];
    metrics.samples += batch.labels.size();

    auto grads = backward(result.record, batch.inputs, batch.labels, model,
                          {config.detach_reset, config.threads});
    optimizer_step(optimizer, model, grads, config.max_grad_norm);
  }
  if (metrics.samples > 0) {
    const double n = static_cast<double>(metrics.samples);
    metrics.loss = loss_sum / n;
    metrics.accuracy = hits / n;
    metrics.spikes_per_neuron = static_cast<double>(spikes) / (hidden_neurons(model) * n);
  }
  return metrics;
}

EvalMetrics evaluate(const Model& model, const Dataset& data, std::size_t batch_size,
                     std::uint64_t seed, unsigned threads) {
  EvalMetrics out;
  double loss_sum = 0.0;
  double hits = 0.0;
  const auto batches = make_batches(data, batch_size, std::nullopt);
  for (std::size_t k = 0; k < batches.size(); ++k) {
    const auto& batch = batches[k];
    ForwardOptions fwd;
    fwd.mode = Mode::eval;
    fwd.seed = derive_seed(seed, SeedStream::state, k);
    fwd.threads = threads;
    const auto result = network_forward(batch.inputs, model, fwd);
    const double n = static_cast<double>(batch.labels.size());
    loss_sum += loss(result.scores, batch.labels) * n;
    hits += accuracy(result.scores, batch.labels) * n;
    for (std::size_t l = 0; l < 2; ++l) out.spikes.per_layer[l] += result.spikes.per_layer[l];
    out.samples += batch.labels.size();
  }
  if (out.samples > 0) {
    const double n = static_cast<double>(out.samples);
    out.loss = loss_sum / n;
    out.accuracy = hits / n;
    out.spikes_per_neuron = static_cast<double>(out.spikes.per_layer[0] + out.spikes.per_layer[1]) /
                            (hidden_neurons(model) * n);
  }
  return out;
}

std::vector<EpochRecord> fit(Model& model, const Dataset& train, const Dataset* valid,
                             const TrainConfig& config, const EpochCallback& on_epoch,
                             const std::atomic<bool>* stop) {
  auto optimizer = make_optimizer(model, config.lr_weights, config.delay_lr_factor);
  std::vector<EpochRecord> history;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    EpochRecord row;
    row.epoch = epoch + 1;
    row.lr_weights = optimizer.lr_weights;
    row.lr_delays = optimizer.lr_delays;
    const auto m = train_epoch(model, train, optimizer, config, epoch, stop);
    row.train_loss = m.loss;
    row.train_acc = m.accuracy;
    row.spikes_per_neuron = m.spikes_per_neuron;
    if (m.interrupted && m.samples == 0) break;
    double metric = m.accuracy;
    if (valid != nullptr && !valid->empty()) {
      row.valid_acc =
          evaluate(model, *valid, config.batch_size, derive_seed(config.seed, SeedStream::state),
                   config.threads)
              .accuracy;
      metric = row.valid_acc;
    }
    scheduler_step(optimizer, metric);
    history.push_back(row);
    if (on_epoch) on_epoch(row, model);
    if (m.interrupted) break;
  }
  return history;
}

}  // namespace snn
