#include "snn/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "snn/neuron.hpp"
#include "snn/parallel.hpp"
#include "snn/rng.hpp"
#include "snn/textutil.hpp"

namespace snn {

double GridRange::at(std::size_t k) const {
  if (k + 1 == steps) return max;
  return min + (max - min) * static_cast<double>(k) / static_cast<double>(steps - 1);
}

void RegimeMapSpec::validate() const {
  if (a.steps < 2 || b.steps < 2) throw ConfigError("regime map: grid needs >= 2 steps per axis");
  if (!(a.max > a.min) || !(b.max > b.min)) throw ConfigError("regime map: empty parameter range");
  if (steps == 0) throw ConfigError("regime map: steps must be > 0");
  for (auto t : spike_times) {
    if (t >= steps) {
      throw ConfigError("regime map: spike time " + std::to_string(t) + " beyond " +
                        std::to_string(steps) + " steps");
    }
  }
}

RegimeMapSpec canonical_regime_spec() {
  RegimeMapSpec spec;
  for (std::size_t k = 0; k < 12; ++k) spec.spike_times.push_back(4 + 8 * k);
  return spec;
}

RegimeMapSpec load_regime_spec(const std::filesystem::path& path) {
  auto spec = canonical_regime_spec();
  for (const auto& [key, value] : read_key_values(path)) {
    if (key == "a_min") spec.a.min = parse_real(value, key);
    else if (key == "a_max") spec.a.max = parse_real(value, key);
    else if (key == "a_steps") spec.a.steps = parse_size(value, key);
    else if (key == "b_min") spec.b.min = parse_real(value, key);
    else if (key == "b_max") spec.b.max = parse_real(value, key);
    else if (key == "b_steps") spec.b.steps = parse_size(value, key);
    else if (key == "steps") spec.steps = parse_size(value, key);
    else if (key == "alpha") spec.alpha = parse_real(value, key);
    else if (key == "beta") spec.beta = parse_real(value, key);
    else if (key == "weight") spec.weight = parse_real(value, key);
    else if (key == "theta") spec.theta = parse_real(value, key);
    else if (key == "spike_times") {
      spec.spike_times.clear();
      for (double t : parse_real_list(value, key)) {
        if (t < 0.0 || t != std::floor(t)) throw ConfigError("spike_times must be integer steps");
        spec.spike_times.push_back(static_cast<std::size_t>(t));
      }
    } else {
      throw ConfigError(path.string() + ": unknown regime map key '" + key + "'");
    }
  }
  spec.validate();
  return spec;
}

int count_output_spikes(double a, double b, const RegimeMapSpec& spec) {
  const NeuronParams params{{spec.alpha}, {spec.beta}, {a}, {b}};
  std::vector<double> drive(spec.steps, 0.0);
  for (auto t : spec.spike_times) drive[t] += spec.weight;
  LayerState state{{0.0}, {0.0}, {0.0}};
  int count = 0;
  for (std::size_t t = 0; t < spec.steps; ++t) {
    const double in = drive[t];
    state = adlif_step(state, params, std::span<const double>(&in, 1), {spec.theta});
    if (state.s[0] != 0.0) ++count;
  }
  return count;
}

RegimeMap regime_map(const RegimeMapSpec& spec, unsigned threads) {
  spec.validate();
  RegimeMap map;
  map.a_steps = spec.a.steps;
  map.b_steps = spec.b.steps;
  map.cells.resize(map.a_steps * map.b_steps);
  parallel_for(map.a_steps, threads, [&](std::size_t ia) {
    const double a = spec.a.at(ia);
    for (std::size_t ib = 0; ib < map.b_steps; ++ib) {
      const double b = spec.b.at(ib);
      map.cells[ia * map.b_steps + ib] = {a, b, count_output_spikes(a, b, spec)};
    }
  });
  return map;
}

void write_regime_csv(std::ostream& out, const RegimeMap& map) {
  out << "a,b,count\n";
  char buf[96];
  for (const auto& c : map.cells) {
    std::snprintf(buf, sizeof buf, "%.6g,%.6g,%d\n", c.a, c.b, c.count);
    out << buf;
  }
}

std::vector<MonotonicityFinding> b_monotonicity_findings(const RegimeMap& map) {
  std::vector<MonotonicityFinding> out;
  for (std::size_t ia = 0; ia < map.a_steps; ++ia) {
    if (map.at(ia, 0).a < 0.0) continue;
    for (std::size_t ib = 0; ib + 1 < map.b_steps; ++ib) {
      const auto& lo = map.at(ia, ib);
      const auto& hi = map.at(ia, ib + 1);
      if (hi.count > lo.count) out.push_back({lo.a, lo.b, hi.b, lo.count, hi.count});
    }
  }
  return out;
}

double LayerSpikeStats::per_neuron() const {
  if (neurons == 0 || samples == 0) return 0.0;
  return static_cast<double>(total_spikes) /
         (static_cast<double>(neurons) * static_cast<double>(samples));
}

double SpikeStats::per_neuron() const {
  const double denom = static_cast<double>(layers[0].neurons * layers[0].samples +
                                           layers[1].neurons * layers[1].samples);
  if (denom == 0.0) return 0.0;
  return static_cast<double>(layers[0].total_spikes + layers[1].total_spikes) / denom;
}

SpikeStats spike_stats(const Model& model, const Dataset& data, std::size_t batch_size,
                       std::uint64_t seed, unsigned threads) {
  SpikeStats stats;
  const std::size_t sizes[2] = {model.config.hidden1, model.config.hidden2};
  for (std::size_t l = 0; l < 2; ++l) {
    stats.layers[l].neurons = sizes[l];
    stats.layers[l].timesteps = simulated_steps(model.config, data.steps);
    stats.layers[l].samples = data.size();
  }
  const auto batches = make_batches(data, batch_size, std::nullopt);
  for (std::size_t k = 0; k < batches.size(); ++k) {
    ForwardOptions fwd;
    fwd.mode = Mode::eval;
    fwd.seed = derive_seed(seed, SeedStream::state, k);
    fwd.threads = threads;
    const auto res = network_forward(batches[k].inputs, model, fwd);
    for (std::size_t l = 0; l < 2; ++l) stats.layers[l].total_spikes += res.spikes.per_layer[l];
  }
  return stats;
}

std::vector<std::filesystem::path> export_distributions(const Model& model,
                                                        const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  char buf[64];
  auto write_values = [&](const std::string& name, const std::vector<double>& values) {
    const auto path = dir / name;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "neuron,value\n";
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", values[i]);
      out << i << ',' << buf << '\n';
    }
    written.push_back(path);
  };
  for (std::size_t l = 0; l < 2; ++l) {
    const auto& p = model.neurons[l];
    const auto prefix = "hidden" + std::to_string(l + 1) + "_";
    write_values(prefix + "alpha.csv", p.alpha);
    write_values(prefix + "beta.csv", p.beta);
    write_values(prefix + "a.csv", p.a);
    write_values(prefix + "b.csv", p.b);
  }
  for (std::size_t l = 0; l < 3; ++l) {
    const auto& d = model.synapses[l].delays;
    const auto path = dir / ("delays_synapses" + std::to_string(l) + ".csv");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "pre,post,delay\n";
    for (std::size_t j = 0; j < d.pre; ++j) {
      for (std::size_t i = 0; i < d.post; ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", d(j, i));
        out << j << ',' << i << ',' << buf << '\n';
      }
    }
    written.push_back(path);
  }
  return written;
}

}  // namespace snn
