#include "snn/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "snn/parallel.hpp"
#include "snn/rng.hpp"

namespace snn {

void NetworkConfig::validate() const {
  if (inputs == 0 || hidden1 == 0 || hidden2 == 0 || classes == 0) {
    throw std::invalid_argument("network layer sizes must be > 0");
  }
  for (double p : dropout) {
    if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout must lie in [0, 1)");
  }
  if (d_max < 0) throw std::invalid_argument("d_max must be >= 0");
  if (!(spike.slope > 0.0)) throw std::invalid_argument("spike slope must be > 0");
}

NeuronBounds NetworkConfig::bounds() const {
  return neuron_model == NeuronModel::lif ? kLifBounds : kAdlifPlusBounds;
}

std::size_t NetworkConfig::layer_size(std::size_t layer) const {
  switch (layer) {
    case 0: return inputs;
    case 1: return hidden1;
    case 2: return hidden2;
    case 3: return classes;
    default: throw std::out_of_range("layer index");
  }
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& syn : synapses) {
    n += syn.weights.size() + syn.bias.size();
    if (config.train_delays) n += syn.delays.d.size();
  }
  for (const auto& p : neurons) {
    n += config.neuron_model == NeuronModel::lif ? p.size() : 4 * p.size();
  }
  return n;
}

Model init_model(const NetworkConfig& config, std::uint64_t seed) {
  config.validate();
  Model model;
  model.config = config;
  for (std::size_t l = 0; l < 3; ++l) {
    const std::size_t pre = config.layer_size(l);
    const std::size_t post = config.layer_size(l + 1);
    auto& syn = model.synapses[l];
    syn.weights = Matrix(pre, post);
    Rng rng(derive_seed(seed, SeedStream::init, l));
    const double limit = std::sqrt(6.0 / static_cast<double>(pre + post));
    for (auto& x : syn.weights.data) x = uniform(rng, -limit, limit);
    syn.bias.assign(post, 0.0);
    syn.delays = DelayMatrix(pre, post, config.d_max, 0.0);
  }
  for (std::size_t l = 0; l < 2; ++l) {
    model.neurons[l] = init_params(config.layer_size(l + 1),
                                   derive_seed(seed, SeedStream::init, 10 + l), config.bounds());
  }
  return model;
}

std::size_t simulated_steps(const NetworkConfig& config, std::size_t input_steps) {
  return config.horizon == Horizon::extended
             ? input_steps + static_cast<std::size_t>(config.d_max)
             : input_steps;
}

void layer_forward(const DelayLine& line, const SynapseSet& synapses,
                   std::span<const DelayTap> taps, std::span<double> current) {
  const std::size_t pre = synapses.weights.rows;
  const std::size_t post = synapses.weights.cols;
  if (line.channels() != pre || current.size() != post || synapses.bias.size() != post ||
      taps.size() != pre * post) {
    throw std::invalid_argument("layer_forward: shape mismatch");
  }
  std::fill(current.begin(), current.end(), 0.0);
  for (std::size_t j = 0; j < pre; ++j) {
    if (line.quiet(j)) continue;
    const double* f = synapses.weights.data.data() + j * post;
    const DelayTap* tap = taps.data() + j * post;
    for (std::size_t i = 0; i < post; ++i) {
      double a = (1.0 - tap[i].frac) * line.at(j, tap[i].whole);
      if (tap[i].frac != 0.0) a += tap[i].frac * line.at(j, tap[i].whole + 1);
      current[i] += f[i] * a;
    }
  }
  for (std::size_t i = 0; i < post; ++i) current[i] += synapses.bias[i];
}

void layer_forward(const DelayLine& line, const SynapseSet& synapses, std::span<double> current) {
  const auto taps = make_taps(synapses.delays);
  layer_forward(line, synapses, taps, current);
}

std::vector<double> readout(const Matrix& potentials, ReadoutMode mode) {
  std::vector<double> scores(potentials.cols, 0.0);
  if (mode == ReadoutMode::sum_potentials) {
    for (std::size_t t = 0; t < potentials.rows; ++t) {
      const auto row = potentials.row(t);
      for (std::size_t c = 0; c < row.size(); ++c) scores[c] += row[c];
    }
    return scores;
  }
  std::vector<double> prob(potentials.cols);
  for (std::size_t t = 0; t < potentials.rows; ++t) {
    const auto row = potentials.row(t);
    const double peak = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) {
      prob[c] = std::exp(row[c] - peak);
      z += prob[c];
    }
    for (std::size_t c = 0; c < row.size(); ++c) scores[c] += prob[c] / z;
  }
  return scores;
}

namespace {

void require_finite(std::span<const double> values, const char* what, std::size_t step) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw std::runtime_error(std::string("non-finite ") + what + " at step " +
                               std::to_string(step) + ", neuron " + std::to_string(i));
    }
  }
}

}  // namespace

SampleRecord forward_sample(std::span<const double> input, std::size_t input_steps,
                            const Model& model, const ForwardOptions& options,
                            std::uint64_t sample_index) {
  const auto& cfg = model.config;
  if (input.size() != input_steps * cfg.inputs) {
    throw std::invalid_argument("forward_sample: input has " + std::to_string(input.size()) +
                                " values, expected " + std::to_string(input_steps * cfg.inputs));
  }
  const std::size_t steps = simulated_steps(cfg, input_steps);
  const std::size_t sizes[3] = {cfg.hidden1, cfg.hidden2, cfg.classes};

  SampleRecord rec;
  std::array<LayerState, 2> state;
  Rng dropout_rng(derive_seed(options.seed, SeedStream::dropout, sample_index));
  for (std::size_t l = 0; l < 2; ++l) {
    const std::size_t n = sizes[l];
    state[l] = init_state(n, derive_seed(options.seed, SeedStream::state, 2 * sample_index + l),
                          options.state_init);
    if (cfg.neuron_model == NeuronModel::lif) std::fill(state[l].w.begin(), state[l].w.end(), 0.0);
    auto& tr = rec.hidden[l];
    tr.u0 = state[l].u;
    tr.w0 = state[l].w;
    tr.current = Matrix(steps, n);
    tr.u = Matrix(steps, n);
    tr.w = Matrix(steps, n);
    tr.s = Matrix(steps, n);
    tr.output = Matrix(steps, n);
    const double p = cfg.dropout[l];
    if (options.mode == Mode::train && p > 0.0) {
      tr.mask = Matrix(steps, n);
      const double keep_scale = 1.0 / (1.0 - p);
      for (auto& m : tr.mask.data) m = uniform(dropout_rng, 0.0, 1.0) < p ? 0.0 : keep_scale;
    }
  }
  rec.readout_potential = Matrix(steps, cfg.classes);

  std::array<DelayLine, 3> lines{DelayLine(cfg.inputs, cfg.d_max), DelayLine(cfg.hidden1, cfg.d_max),
                                 DelayLine(cfg.hidden2, cfg.d_max)};
  std::array<std::vector<DelayTap>, 3> taps;
  for (std::size_t l = 0; l < 3; ++l) taps[l] = make_taps(model.synapses[l].delays);

  const std::vector<double> silence(cfg.inputs, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    lines[0].push(t < input_steps ? input.subspan(t * cfg.inputs, cfg.inputs)
                                  : std::span<const double>(silence));
    for (std::size_t l = 0; l < 2; ++l) {
      auto& tr = rec.hidden[l];
      auto cur = tr.current.row(t);
      layer_forward(lines[l], model.synapses[l], taps[l], cur);
      try {
        adlif_update(state[l].u, state[l].w, state[l].s, model.neurons[l], cur, cfg.threshold,
                     cfg.spike);
      } catch (const std::domain_error& e) {
        throw std::runtime_error("hidden layer " + std::to_string(l + 1) + ", step " +
                                 std::to_string(t) + ": " + e.what());
      }
      require_finite(state[l].u, l == 0 ? "membrane potential (layer 1)"
                                        : "membrane potential (layer 2)", t);
      require_finite(state[l].w, l == 0 ? "adaptation current (layer 1)"
                                        : "adaptation current (layer 2)", t);
      std::copy(state[l].u.begin(), state[l].u.end(), tr.u.row(t).begin());
      std::copy(state[l].w.begin(), state[l].w.end(), tr.w.row(t).begin());
      std::copy(state[l].s.begin(), state[l].s.end(), tr.s.row(t).begin());
      auto out = tr.output.row(t);
      for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = tr.mask.empty() ? state[l].s[i] : state[l].s[i] * tr.mask(t, i);
        if (state[l].s[i] >= 0.5) ++rec.spike_counts[l];
      }
      lines[l + 1].push(out);
    }
    auto pot = rec.readout_potential.row(t);
    layer_forward(lines[2], model.synapses[2], taps[2], pot);
    require_finite(pot, "readout potential", t);
  }
  rec.scores = readout(rec.readout_potential, cfg.readout);
  return rec;
}

ForwardResult network_forward(const SpikeTensor& batch, const Model& model,
                              const ForwardOptions& options) {
  if (batch.channels != model.config.inputs) {
    throw std::invalid_argument("network_forward: batch has " + std::to_string(batch.channels) +
                                " channels, model expects " + std::to_string(model.config.inputs));
  }
  ForwardResult result;
  result.record.input_steps = batch.steps;
  result.record.steps = simulated_steps(model.config, batch.steps);
  result.record.samples.resize(batch.batch);
  parallel_for(batch.batch, options.threads, [&](std::size_t b) {
    result.record.samples[b] = forward_sample(batch.sample(b), batch.steps, model, options, b);
  });
  result.scores = Matrix(batch.batch, model.config.classes);
  for (std::size_t b = 0; b < batch.batch; ++b) {
    const auto& rec = result.record.samples[b];
    std::copy(rec.scores.begin(), rec.scores.end(), result.scores.row(b).begin());
    for (std::size_t l = 0; l < 2; ++l) result.spikes.per_layer[l] += rec.spike_counts[l];
  }
  return result;
}

std::string to_string(ReadoutMode mode) {
  return mode == ReadoutMode::softmax_sum ? "softmax_sum" : "sum_potentials";
}
std::string to_string(Horizon horizon) {
  return horizon == Horizon::input ? "input" : "extended";
}
std::string to_string(NeuronModel model) {
  return model == NeuronModel::adlif_plus ? "adlif_plus" : "lif";
}

ReadoutMode parse_readout_mode(const std::string& text) {
  if (text == "softmax_sum") return ReadoutMode::softmax_sum;
  if (text == "sum_potentials") return ReadoutMode::sum_potentials;
  throw std::invalid_argument("unknown readout mode '" + text + "'");
}
Horizon parse_horizon(const std::string& text) {
  if (text == "input") return Horizon::input;
  if (text == "extended") return Horizon::extended;
  throw std::invalid_argument("unknown horizon '" + text + "'");
}
NeuronModel parse_neuron_model(const std::string& text) {
  if (text == "adlif_plus") return NeuronModel::adlif_plus;
  if (text == "lif") return NeuronModel::lif;
  throw std::invalid_argument("unknown neuron model '" + text + "'");
}

}  // namespace snn
