// Command-line front end: train, eval, gradcheck, regime-map, stats, bin-data.
//
// Exit codes: 0 success, 1 runtime failure (or failed gradient check),
// 2 invalid configuration or missing input, 130 interrupted training.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "snn/analysis.hpp"
#include "snn/checkpoint.hpp"
#include "snn/config.hpp"
#include "snn/data.hpp"
#include "snn/gradcheck.hpp"
#include "snn/rng.hpp"
#include "snn/training.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInterrupted = 130;

std::atomic<bool> g_stop{false};

extern "C" void on_interrupt(int) { g_stop.store(true); }

// Relative output paths land under $SNN_OUTPUT_ROOT when it is set.
fs::path output_path(const fs::path& p) {
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("SNN_OUTPUT_ROOT"); root != nullptr && *root != '\0') {
    return fs::path(root) / p;
  }
  return p;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

struct LoadedData {
  snn::DatasetManifest manifest;
  snn::Dataset train;
  snn::Dataset valid;
  std::optional<snn::Dataset> test;
};

void require_file(const fs::path& p, const std::string& what) {
  if (p.empty()) throw snn::ConfigError(what + " path is not set");
  if (!fs::exists(p)) throw snn::ConfigError(what + " not found: " + p.string());
}

LoadedData load_data(const fs::path& manifest_path, std::uint64_t seed) {
  require_file(manifest_path, "manifest");
  LoadedData d;
  d.manifest = snn::parse_manifest(manifest_path);
  require_file(d.manifest.train, "train split");
  if (!d.manifest.valid.empty()) require_file(d.manifest.valid, "valid split");
  if (!d.manifest.test.empty()) require_file(d.manifest.test, "test split");
  auto train = snn::load_split(d.manifest.train, d.manifest);
  if (!d.manifest.valid.empty()) {
    d.train = std::move(train);
    d.valid = snn::load_split(d.manifest.valid, d.manifest);
  } else {
    auto [tr, va] = snn::split_validation(train, d.manifest.valid_fraction,
                                          snn::derive_seed(seed, snn::SeedStream::split));
    d.train = std::move(tr);
    d.valid = std::move(va);
  }
  if (!d.manifest.test.empty()) d.test = snn::load_split(d.manifest.test, d.manifest);
  return d;
}

const snn::Dataset& pick_split(const LoadedData& d, const std::string& split) {
  if (split == "train") return d.train;
  if (split == "valid") return d.valid;
  if (split == "test") {
    if (!d.test) throw snn::ConfigError("manifest has no test split");
    return *d.test;
  }
  throw snn::ConfigError("unknown split '" + split + "'");
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::optional<std::string> config;
  std::optional<std::string> preset;
  std::vector<std::string> overrides;
  std::optional<std::string> out;
  std::optional<std::string> manifest;
};

int cmd_train(const TrainArgs& args) {
  auto overrides = args.overrides;
  if (args.manifest) overrides.push_back("manifest=" + *args.manifest);
  if (args.out) overrides.push_back("out_dir=" + *args.out);
  auto cfg = snn::resolve_run_config(
      args.config ? std::optional<fs::path>(*args.config) : std::nullopt, args.preset, overrides);
  if (!cfg.manifest.empty()) cfg.manifest = fs::absolute(cfg.manifest);
  auto data = load_data(cfg.manifest, cfg.train.seed);
  if (data.train.channels != cfg.network.inputs) {
    throw snn::ConfigError("dataset has " + std::to_string(data.train.channels) +
                           " channels but inputs = " + std::to_string(cfg.network.inputs));
  }
  if (data.manifest.classes != cfg.network.classes) {
    throw snn::ConfigError("manifest has " + std::to_string(data.manifest.classes) +
                           " classes but classes = " + std::to_string(cfg.network.classes));
  }

  const auto out_dir = output_path(cfg.out_dir);
  fs::create_directories(out_dir);
  {
    std::ofstream c(out_dir / "config.txt");
    c << snn::describe(cfg);
  }
  std::ofstream metrics(out_dir / "metrics.csv", std::ios::trunc);
  metrics << "# created " << timestamp() << '\n'
          << "epoch,train_loss,train_acc,valid_acc,lr_weights,lr_delays,spikes_per_neuron\n";

  auto model = snn::init_model(cfg.network, snn::derive_seed(cfg.train.seed, snn::SeedStream::init));
  double best = -1.0;
  std::signal(SIGINT, on_interrupt);
  std::signal(SIGTERM, on_interrupt);
  const auto history = snn::fit(
      model, data.train, &data.valid, cfg.train,
      [&](const snn::EpochRecord& r, const snn::Model& m) {
        metrics << r.epoch << ',' << fmt(r.train_loss) << ',' << fmt(r.train_acc) << ','
                << fmt(r.valid_acc) << ',' << fmt(r.lr_weights) << ',' << fmt(r.lr_delays) << ','
                << fmt(r.spikes_per_neuron) << '\n';
        metrics.flush();
        std::cout << "epoch " << r.epoch << " loss=" << fmt(r.train_loss)
                  << " train_acc=" << fmt(r.train_acc) << " valid_acc=" << fmt(r.valid_acc)
                  << " lr=" << fmt(r.lr_weights) << '\n';
        if (r.valid_acc > best) {
          best = r.valid_acc;
          snn::save_checkpoint(out_dir / "best.ckpt", m);
        }
        snn::save_checkpoint(out_dir / "last.ckpt", m);
      },
      &g_stop);
  if (g_stop.load()) {
    snn::save_checkpoint(out_dir / "last.ckpt", model);
    std::cerr << "interrupted after " << history.size() << " epoch(s); wrote last.ckpt\n";
    return kExitInterrupted;
  }
  if (history.empty()) snn::save_checkpoint(out_dir / "last.ckpt", model);
  std::cout << "best valid_acc=" << fmt(best) << " outputs in " << out_dir.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint = "best";
  std::string run_dir;
  std::optional<std::string> config;
  std::optional<std::string> manifest;
  std::string split = "valid";
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  bool round_delays = false;
};

fs::path resolve_checkpoint(const std::string& name, const std::string& run_dir) {
  fs::path p = name;
  if (name == "best" || name == "last") p = output_path(run_dir.empty() ? "run" : run_dir) / (name + ".ckpt");
  require_file(p, "checkpoint");
  return p;
}

struct DataSource {
  fs::path manifest;
  std::uint64_t split_seed = 0;
};

// Without --manifest or --config, falls back to the run directory's
// config.txt. A config also supplies the seed of the held-out split.
std::optional<DataSource> find_data(const std::optional<std::string>& manifest,
                                    const std::optional<std::string>& config,
                                    const std::string& run_dir, std::uint64_t seed) {
  std::optional<fs::path> cfg_path;
  if (config) cfg_path = *config;
  else if (!run_dir.empty() && fs::exists(output_path(run_dir) / "config.txt"))
    cfg_path = output_path(run_dir) / "config.txt";
  if (!manifest && !cfg_path) return std::nullopt;
  DataSource src{manifest ? fs::path(*manifest) : fs::path(), seed};
  if (cfg_path) {
    const auto cfg = snn::resolve_run_config(*cfg_path, std::nullopt, {});
    if (!manifest) src.manifest = cfg.manifest;
    src.split_seed = cfg.train.seed;
  }
  return src;
}

int cmd_eval(const EvalArgs& args) {
  const auto ckpt = resolve_checkpoint(args.checkpoint, args.run_dir);
  auto model = snn::load_checkpoint(ckpt);
  if (args.round_delays) {
    for (auto& syn : model.synapses) snn::round_in_place(syn.delays);
  }
  const auto src = find_data(args.manifest, args.config, args.run_dir, args.seed);
  if (!src) throw snn::ConfigError("pass --manifest or --config to locate the dataset");
  const auto data = load_data(src->manifest, src->split_seed);
  const auto& split = pick_split(data, args.split);
  const auto m = snn::evaluate(model, split, args.batch_size, args.seed);
  std::cout << "split=" << args.split << " samples=" << m.samples << " accuracy=" << fmt(m.accuracy)
            << " loss=" << fmt(m.loss) << " spikes_per_neuron=" << fmt(m.spikes_per_neuron) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct GradcheckArgs {
  std::uint64_t seed = 1;
  std::size_t seeds = 1;
  std::vector<std::size_t> sizes{6, 8, 8, 4};
  std::size_t steps = 16;
  int d_max = 5;
  double tolerance = 1e-5;
  double epsilon = 1e-4;
  bool plain_fd = false;
  bool integer_delays = false;
  bool corrupt = false;
  std::string readout = "softmax_sum";
};

int cmd_gradcheck(const GradcheckArgs& args) {
  if (args.sizes.size() != 4) throw snn::ConfigError("--sizes takes four values");
  bool ok = true;
  for (std::size_t k = 0; k < args.seeds; ++k) {
    snn::GradcheckOptions opt;
    opt.seed = args.seed + k;
    opt.sizes = {args.sizes[0], args.sizes[1], args.sizes[2], args.sizes[3]};
    opt.steps = args.steps;
    opt.d_max = args.d_max;
    opt.tolerance = args.tolerance;
    opt.epsilon = args.epsilon;
    opt.richardson = !args.plain_fd;
    opt.integer_delays = args.integer_delays;
    opt.readout = snn::parse_readout_mode(args.readout);
    if (args.corrupt) {
      // Harness self-test: perturb one gradient class by 1%.
      opt.tamper = [](snn::Gradients& g) {
        for (auto& x : g.neurons[0].alpha) x *= 1.01;
      };
    }
    const auto report = snn::run_gradcheck(opt);
    std::cout << "seed " << opt.seed << ":\n";
    for (const auto& c : report.classes) {
      std::printf("  %-8s max_rel_err=%.3e checked=%zu%s\n", c.name.c_str(), c.max_rel_error,
                  c.checked, c.max_rel_error < report.tolerance ? "" : "  FAIL");
      if (!(c.max_rel_error < report.tolerance)) std::cout << "    worst: " << c.worst << '\n';
    }
    if (report.integer_delays.checked > 0) {
      const auto& c = report.integer_delays;
      std::printf("  %-8s max_rel_err=%.3e checked=%zu (one-sided, tol %.0e)%s\n", c.name.c_str(),
                  c.max_rel_error, c.checked, report.one_sided_tolerance,
                  c.max_rel_error < report.one_sided_tolerance ? "" : "  FAIL");
    }
    ok = ok && report.passed();
  }
  std::cout << (ok ? "gradcheck passed\n" : "gradcheck FAILED\n");
  return ok ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------------------

struct RegimeArgs {
  std::optional<std::string> spec;
  std::string out = "regime_map.csv";
};

int cmd_regime_map(const RegimeArgs& args) {
  const auto spec = args.spec ? snn::load_regime_spec(*args.spec) : snn::canonical_regime_spec();
  const auto map = snn::regime_map(spec);
  const auto path = output_path(args.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  snn::write_regime_csv(out, map);
  int max_count = 0;
  for (const auto& c : map.cells) max_count = std::max(max_count, c.count);
  const auto findings = snn::b_monotonicity_findings(map);
  std::cout << "grid " << map.a_steps << "x" << map.b_steps << ", input spikes "
            << spec.spike_times.size() << ", max output spikes " << max_count
            << ", b-monotonicity findings " << findings.size() << "\nwrote " << path.string()
            << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct StatsArgs {
  std::string checkpoint = "best";
  std::string run_dir;
  std::optional<std::string> config;
  std::optional<std::string> manifest;
  std::string split = "valid";
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  std::optional<std::string> export_dir;
  std::string out = "spike_stats.csv";
};

int cmd_stats(const StatsArgs& args) {
  const auto model = snn::load_checkpoint(resolve_checkpoint(args.checkpoint, args.run_dir));
  if (args.export_dir) {
    const auto files = snn::export_distributions(model, output_path(*args.export_dir));
    std::cout << "wrote " << files.size() << " distribution files to "
              << output_path(*args.export_dir).string() << '\n';
  }
  const auto src = find_data(args.manifest, args.config, args.run_dir, args.seed);
  if (!src) return kExitOk;
  const auto data = load_data(src->manifest, src->split_seed);
  const auto& split = pick_split(data, args.split);
  const auto stats = snn::spike_stats(model, split, args.batch_size, args.seed);
  const auto path = output_path(args.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << "layer,total_spikes,neurons,timesteps,samples,spikes_per_neuron\n";
  for (std::size_t l = 0; l < 2; ++l) {
    const auto& s = stats.layers[l];
    out << "hidden" << l + 1 << ',' << s.total_spikes << ',' << s.neurons << ',' << s.timesteps
        << ',' << s.samples << ',' << fmt(s.per_neuron()) << '\n';
    std::cout << "hidden" << l + 1 << ": " << fmt(s.per_neuron()) << " spikes/neuron/sample\n";
  }
  std::cout << "overall: " << fmt(stats.per_neuron()) << " spikes/neuron/sample\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct BinArgs {
  std::string events;
  std::string out;
  std::optional<std::string> manifest;
  snn::BinningSpec binning{};
};

int cmd_bin_data(BinArgs args) {
  require_file(args.events, "event file");
  std::size_t classes = 0;
  if (args.manifest) {
    const auto m = snn::parse_manifest(*args.manifest);
    args.binning = m.binning;
    classes = m.classes;
  }
  const auto file = snn::parse_events(fs::path(args.events));
  if (classes != 0 && classes != file.classes) {
    throw snn::ConfigError("event file classes disagree with manifest");
  }
  try {
    args.binning.validate();
  } catch (const snn::DataError& e) {
    throw snn::ConfigError(e.what());
  }
  const auto data = snn::bin_events(file, args.binning);
  double total = 0.0;
  for (const auto& s : data.samples) {
    for (double v : s.values.data) total += v;
  }
  const auto path = output_path(args.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  snn::write_binned(path, data);
  std::cout << "samples=" << data.size() << " events=" << file.events.size()
            << " binned_sum=" << static_cast<long long>(total) << " steps=" << data.steps
            << " channels=" << data.channels << "\nwrote " << path.string() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spiking network trainer with adaptive neurons and learnable synaptic delays"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train a network from a config file");
  train_cmd->add_option("--config", train.config, "key = value run config");
  train_cmd->add_option("--preset", train.preset, "shd, ssc or gsc");
  train_cmd->add_option("--set", train.overrides, "override a config key (key=value)");
  train_cmd->add_option("--manifest", train.manifest, "dataset manifest");
  train_cmd->add_option("--out", train.out, "output directory");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "accuracy of a checkpoint on a split");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "path, or best/last inside --run");
  eval_cmd->add_option("--run", eval.run_dir, "run directory holding best.ckpt/last.ckpt");
  eval_cmd->add_option("--config", eval.config, "run config (for its manifest)");
  eval_cmd->add_option("--manifest", eval.manifest, "dataset manifest");
  eval_cmd->add_option("--split", eval.split, "train, valid or test");
  eval_cmd->add_option("--batch-size", eval.batch_size);
  eval_cmd->add_option("--seed", eval.seed);
  eval_cmd->add_flag("--round-delays", eval.round_delays, "snap delays to integer steps");

  GradcheckArgs grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "analytic vs finite-difference gradients");
  grad_cmd->add_option("--seed", grad.seed);
  grad_cmd->add_option("--seeds", grad.seeds, "number of consecutive seeds");
  grad_cmd->add_option("--sizes", grad.sizes, "inputs,hidden1,hidden2,classes")->delimiter(',');
  grad_cmd->add_option("--steps", grad.steps);
  grad_cmd->add_option("--d-max", grad.d_max);
  grad_cmd->add_option("--tolerance", grad.tolerance);
  grad_cmd->add_option("--epsilon", grad.epsilon, "finite-difference step");
  grad_cmd->add_flag("--plain-fd", grad.plain_fd, "two-point central differences only");
  grad_cmd->add_option("--readout", grad.readout, "softmax_sum or sum_potentials");
  grad_cmd->add_flag("--integer-delays", grad.integer_delays, "include integer-valued delays");
  grad_cmd->add_flag("--corrupt", grad.corrupt, "perturb the analytic gradient (self-test)");

  RegimeArgs regime;
  auto* regime_cmd = app.add_subcommand("regime-map", "output spike counts over (a, b)");
  regime_cmd->add_option("--spec", regime.spec, "key = value stimulus/grid file");
  regime_cmd->add_option("--out", regime.out, "CSV output path");

  StatsArgs stats;
  auto* stats_cmd = app.add_subcommand("stats", "spike statistics and parameter distributions");
  stats_cmd->add_option("--checkpoint", stats.checkpoint);
  stats_cmd->add_option("--run", stats.run_dir);
  stats_cmd->add_option("--config", stats.config);
  stats_cmd->add_option("--manifest", stats.manifest);
  stats_cmd->add_option("--split", stats.split);
  stats_cmd->add_option("--batch-size", stats.batch_size);
  stats_cmd->add_option("--seed", stats.seed);
  stats_cmd->add_option("--export-distributions", stats.export_dir, "directory for CSV exports");
  stats_cmd->add_option("--out", stats.out, "spike statistics CSV");

  BinArgs bin;
  auto* bin_cmd = app.add_subcommand("bin-data", "bin a text event file into a tensor file");
  bin_cmd->add_option("--events", bin.events)->required();
  bin_cmd->add_option("--out", bin.out)->required();
  bin_cmd->add_option("--manifest", bin.manifest, "take binning parameters from a manifest");
  bin_cmd->add_option("--raw-channels", bin.binning.raw_channels);
  bin_cmd->add_option("--channel-factor", bin.binning.channel_factor);
  bin_cmd->add_option("--bin-width", bin.binning.bin_width, "seconds");
  bin_cmd->add_option("--timesteps", bin.binning.steps);
  bin_cmd->add_flag("--binarize", bin.binning.binarize);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train);
    if (*eval_cmd) return cmd_eval(eval);
    if (*grad_cmd) return cmd_gradcheck(grad);
    if (*regime_cmd) return cmd_regime_map(regime);
    if (*stats_cmd) return cmd_stats(stats);
    if (*bin_cmd) return cmd_bin_data(bin);
  } catch (const snn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
