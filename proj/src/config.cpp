#include "snn/config.hpp"

#include <cstdio>
#include <sstream>

namespace snn {

RunConfig preset_config(const std::string& name) {
  RunConfig c;
  c.preset = name;
  c.network.inputs = 140;
  c.network.d_max = 25;
  if (name == "shd") {
    c.network.hidden1 = c.network.hidden2 = 128;
    c.network.classes = 20;
    c.network.dropout = {0.5, 0.5};
    c.train.epochs = 100;
    c.train.batch_size = 128;
    c.train.lr_weights = 0.01;
  } else if (name == "ssc" || name == "gsc") {
    c.network.hidden1 = c.network.hidden2 = 512;
    c.network.classes = 35;
    c.network.dropout = {0.25, 0.25};
    c.train.epochs = 200;
    c.train.batch_size = 32;
    c.train.lr_weights = 0.001;
    if (name == "gsc") c.network.inputs = 40;
  } else {
    throw ConfigError("unknown preset '" + name + "' (expected shd, ssc or gsc)");
  }
  c.train.delay_lr_factor = 10.0;
  return c;
}

namespace {

SpikeFunction parse_surrogate(const std::string& value) {
  if (value == "boxcar") return SpikeFunction::heaviside;
  if (value == "soft_sigmoid") return SpikeFunction::soft_sigmoid;
  throw ConfigError("'surrogate': expected boxcar or soft_sigmoid, got '" + value + "'");
}

template <typename F>
auto wrap(const std::string& key, F&& parse) {
  try {
    return parse();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("'" + key + "': " + e.what());
  }
}

}  // namespace

std::vector<std::string> known_config_keys() {
  return {"preset",        "inputs",       "hidden",        "hidden1",     "hidden2",
          "classes",       "dropout",      "dropout1",      "dropout2",    "d_max",
          "theta",         "readout",      "horizon",       "neuron_model", "train_delays",
          "surrogate",     "surrogate_slope", "epochs",     "batch_size",  "lr_weights",
          "delay_lr_factor", "lr_delays",  "seed",          "detach_reset", "max_grad_norm",
          "threads",       "manifest",     "out_dir",       "round_delays_for_eval"};
}

void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  auto& n = c.network;
  auto& t = c.train;
  if (key == "preset") {
    if (value != c.preset) throw ConfigError("'preset' must be the first setting applied");
  } else if (key == "inputs") n.inputs = parse_size(value, key);
  else if (key == "hidden") n.hidden1 = n.hidden2 = parse_size(value, key);
  else if (key == "hidden1") n.hidden1 = parse_size(value, key);
  else if (key == "hidden2") n.hidden2 = parse_size(value, key);
  else if (key == "classes") n.classes = parse_size(value, key);
  else if (key == "dropout") n.dropout[0] = n.dropout[1] = parse_real(value, key);
  else if (key == "dropout1") n.dropout[0] = parse_real(value, key);
  else if (key == "dropout2") n.dropout[1] = parse_real(value, key);
  else if (key == "d_max") n.d_max = static_cast<int>(parse_int(value, key));
  else if (key == "theta") n.threshold.theta = parse_real(value, key);
  else if (key == "readout") n.readout = wrap(key, [&] { return parse_readout_mode(value); });
  else if (key == "horizon") n.horizon = wrap(key, [&] { return parse_horizon(value); });
  else if (key == "neuron_model") n.neuron_model = wrap(key, [&] { return parse_neuron_model(value); });
  else if (key == "train_delays") n.train_delays = parse_bool(value, key);
  else if (key == "surrogate") n.spike.function = parse_surrogate(value);
  else if (key == "surrogate_slope") n.spike.slope = parse_real(value, key);
  else if (key == "epochs") t.epochs = parse_size(value, key);
  else if (key == "batch_size") t.batch_size = parse_size(value, key);
  else if (key == "lr_weights") t.lr_weights = parse_real(value, key);
  else if (key == "delay_lr_factor") t.delay_lr_factor = parse_real(value, key);
  else if (key == "lr_delays") {
    const double lr = parse_real(value, key);
    if (!(t.lr_weights > 0.0)) throw ConfigError("'lr_delays' needs lr_weights > 0 set first");
    t.delay_lr_factor = lr / t.lr_weights;
  } else if (key == "seed") t.seed = static_cast<std::uint64_t>(parse_size(value, key));
  else if (key == "detach_reset") t.detach_reset = parse_bool(value, key);
  else if (key == "max_grad_norm") t.max_grad_norm = parse_real(value, key);
  else if (key == "threads") t.threads = static_cast<unsigned>(parse_size(value, key));
  else if (key == "manifest") c.manifest = value;
  else if (key == "out_dir") c.out_dir = value;
  else if (key == "round_delays_for_eval") c.round_delays_for_eval = parse_bool(value, key);
  else throw ConfigError("unknown config key '" + key + "'");
}

RunConfig resolve_run_config(const std::optional<std::filesystem::path>& file,
                             const std::optional<std::string>& preset_name,
                             const std::vector<std::string>& overrides) {
  std::vector<std::pair<std::string, std::string>> settings;
  std::filesystem::path base;
  if (file) {
    settings = read_key_values(*file);
    base = file->parent_path();
  }
  std::string preset = "shd";
  for (const auto& [k, v] : settings) {
    if (k == "preset") preset = v;
  }
  if (preset_name) preset = *preset_name;
  RunConfig c = preset_config(preset);
  for (const auto& [k, v] : settings) {
    if (k == "preset") continue;
    apply_setting(c, k, v);
    if (k == "manifest" && !c.manifest.empty() && c.manifest.is_relative() && !base.empty()) {
      c.manifest = base / c.manifest;
    }
  }
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + item + "' is not key=value");
    const auto key = std::string(trim(std::string_view(item).substr(0, eq)));
    const auto value = std::string(trim(std::string_view(item).substr(eq + 1)));
    if (key == "preset") throw ConfigError("use --preset to select a preset");
    apply_setting(c, key, value);
  }
  try {
    c.network.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (c.train.batch_size == 0) throw ConfigError("batch_size must be > 0");
  if (!(c.train.lr_weights >= 0.0)) throw ConfigError("lr_weights must be >= 0");
  return c;
}

std::string describe(const RunConfig& c) {
  const auto& n = c.network;
  const auto& t = c.train;
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  std::ostringstream out;
  out << "preset = " << c.preset << '\n'
      << "inputs = " << n.inputs << '\n'
      << "hidden1 = " << n.hidden1 << '\n'
      << "hidden2 = " << n.hidden2 << '\n'
      << "classes = " << n.classes << '\n'
      << "dropout1 = " << num(n.dropout[0]) << '\n'
      << "dropout2 = " << num(n.dropout[1]) << '\n'
      << "d_max = " << n.d_max << '\n'
      << "theta = " << num(n.threshold.theta) << '\n'
      << "readout = " << to_string(n.readout) << '\n'
      << "horizon = " << to_string(n.horizon) << '\n'
      << "neuron_model = " << to_string(n.neuron_model) << '\n'
      << "train_delays = " << (n.train_delays ? "true" : "false") << '\n'
      << "surrogate = " << (n.spike.function == SpikeFunction::heaviside ? "boxcar" : "soft_sigmoid")
      << '\n'
      << "surrogate_slope = " << num(n.spike.slope) << '\n'
      << "epochs = " << t.epochs << '\n'
      << "batch_size = " << t.batch_size << '\n'
      << "lr_weights = " << num(t.lr_weights) << '\n'
      << "delay_lr_factor = " << num(t.delay_lr_factor) << '\n'
      << "seed = " << t.seed << '\n'
      << "detach_reset = " << (t.detach_reset ? "true" : "false") << '\n'
      << "max_grad_norm = " << num(t.max_grad_norm) << '\n'
      << "threads = " << t.threads << '\n'
      << "manifest = \"" << c.manifest.string() << "\"\n"
      << "out_dir = \"" << c.out_dir.string() << "\"\n"
      << "round_delays_for_eval = " << (c.round_delays_for_eval ? "true" : "false") << '\n';
  return out.str();
}

}  // namespace snn
