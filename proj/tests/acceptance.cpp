// Acceptance run: one PASS/FAIL line per criterion. Criteria that need the
// real SHD dataset run only when SNN_SHD_MANIFEST points at a manifest.
//
//   acceptance            all criteria
//   acceptance 1 3        selected criteria

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "snn/analysis.hpp"
#include "snn/gradcheck.hpp"
#include "snn/rng.hpp"
#include "snn/training.hpp"

using namespace snn;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

enum class Verdict { pass, fail, not_run };

struct Outcome {
  Verdict verdict;
  std::string detail;
};

// ---------------------------------------------------------------------------
// 1. gradient check over many seeds

Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  std::vector<double> worst(7, 0.0);
  std::vector<std::string> names;
  double worst_kink = 0.0;
  bool ok = true;
  const std::size_t seeds = 20;
  for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
    GradcheckOptions o;
    o.seed = seed;
    o.sizes = {8, 8, 8, 4};
    o.steps = 20;
    o.integer_delays = seed % 2 == 0;
    const auto r = run_gradcheck(o);
    if (!r.passed()) ok = false;
    worst_kink = std::max(worst_kink, r.integer_delays.max_rel_error);
    names.clear();
    for (std::size_t k = 0; k < r.classes.size(); ++k) {
      names.push_back(r.classes[k].name);
      worst[k] = std::max(worst[k], r.classes[k].max_rel_error);
      if (!(r.classes[k].max_rel_error < 1e-5) || r.classes[k].checked == 0) ok = false;
    }
  }
  const double secs = seconds_since(t0);
  std::string detail = std::to_string(seeds) + " seeds, 8x8x8x4, T=20;";
  char buf[64];
  for (std::size_t k = 0; k < names.size(); ++k) {
    std::snprintf(buf, sizeof buf, " %s=%.1e", names[k].c_str(), worst[k]);
    detail += buf;
  }
  std::snprintf(buf, sizeof buf, "; integer delays (one-sided) %.1e; %.1fs", worst_kink, secs);
  detail += buf;
  return {ok && secs < 120.0 ? Verdict::pass : Verdict::fail, detail};
}

// ---------------------------------------------------------------------------
// 2. regime map

Outcome regime_map_quadrants() {
  const auto t0 = Clock::now();
  const auto spec = canonical_regime_spec();
  const auto map = regime_map(spec);
  const double secs = seconds_since(t0);

  int worst_positive = 0, best_negative = 0;
  for (const auto& c : map.cells) {
    if (c.a >= 0.0 && c.a <= 1.0 && c.b >= 0.0 && c.b <= 2.0) worst_positive = std::max(worst_positive, c.count);
    if (c.a < 0.0) best_negative = std::max(best_negative, c.count);
  }
  std::vector<double> drive(spec.steps, 0.0);
  for (auto t : spec.spike_times) drive[t] += spec.weight;
  const auto lif = oracle::scalar_lif(spec.alpha, spec.theta, drive);
  const int lif_count = std::accumulate(lif.begin(), lif.end(), 0);
  const int model_count = count_output_spikes(0.0, 0.0, spec);

  const bool ok = spec.spike_times.size() == 12 && map.cells.size() == 81 * 81 && worst_positive <= 12 &&
                  best_negative > 12 && model_count == lif_count && secs < 60.0;
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "81x81 grid; max count in a,b>=0 box = %d (<=12); max count at a<0 = %d (>12); "
                "a=b=0: %d vs LIF oracle %d; %.2fs",
                worst_positive, best_negative, model_count, lif_count, secs);
  return {ok ? Verdict::pass : Verdict::fail, buf};
}

// ---------------------------------------------------------------------------
// 3. delay learning on the lag task

// Class c means channel 1 repeats channel 0 after lags[c] steps. Both
// channels are cut from one Bernoulli train that starts 15 steps before the
// window, so spike counts and onsets carry no class information. The firing
// rate is drawn per sample from [rate_lo, rate_hi].
Dataset lag_task(std::size_t n, std::size_t steps, double rate_lo, double rate_hi, std::uint64_t seed) {
  const int lags[4] = {0, 5, 10, 15};
  const std::size_t lead = 15;
  Dataset d{steps, 2, 4, {}};
  Rng rng(seed);
  for (std::size_t k = 0; k < n; ++k) {
    const int label = int(k % 4);
    Sample s{Matrix(steps, 2), label};
    std::vector<double> x(steps + lead);
    const double rate = uniform(rng, rate_lo, rate_hi);
    for (auto& v : x) v = uniform(rng, 0.0, 1.0) < rate ? 1.0 : 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
      s.values(t, 0) = x[t + lead];
      s.values(t, 1) = x[t + lead - std::size_t(lags[label])];
    }
    d.samples.push_back(std::move(s));
  }
  return d;
}

struct LagRun {
  double best_acc = 0.0;
  double final_acc = 0.0;
  double held_out_acc = 0.0;
  std::size_t epochs = 0;
  double max_delay = 0.0;
};

LagRun train_lag(const Dataset& data, const Dataset& held_out, bool train_delays, std::size_t max_epochs,
                 double stop_at) {
  NetworkConfig c;
  c.inputs = 2;
  c.hidden1 = 32;
  c.hidden2 = 32;
  c.classes = 4;
  c.dropout = {0.0, 0.0};
  c.readout = ReadoutMode::sum_potentials;
  c.train_delays = train_delays;
  Model m = init_model(c, 3);
  for (auto& w : m.synapses[0].weights.data) w *= 4.0;
  for (auto& w : m.synapses[1].weights.data) w *= 2.0;

  TrainConfig tc;
  tc.batch_size = 128;
  tc.lr_weights = 0.01;
  tc.seed = 1;
  auto opt = make_optimizer(m, tc.lr_weights, tc.delay_lr_factor);
  LagRun run;
  for (std::size_t e = 0; e < max_epochs; ++e) {
    train_epoch(m, data, opt, tc, e);
    const double acc = evaluate(m, data, 256, 0).accuracy;
    scheduler_step(opt, acc);
    run.best_acc = std::max(run.best_acc, acc);
    run.final_acc = acc;
    run.epochs = e + 1;
    if (acc >= stop_at) break;
  }
  for (const auto& syn : m.synapses)
    for (double d : syn.delays.d) run.max_delay = std::max(run.max_delay, d);
  run.held_out_acc = evaluate(m, held_out, 256, 0).accuracy;
  return run;
}

Outcome delay_learning() {
  const auto t0 = Clock::now();
  const auto data = lag_task(2048, 20, 0.2, 0.8, 11);
  const auto held_out = lag_task(512, 20, 0.2, 0.8, 999);
  const auto learned = train_lag(data, held_out, true, 300, 0.95);
  const auto frozen = train_lag(data, held_out, false, 300, 2.0);
  const double secs = seconds_since(t0);
  const bool ok = learned.best_acc >= 0.95 && frozen.best_acc < 0.60 && secs < 600.0;
  char buf[320];
  std::snprintf(buf, sizeof buf,
                "2x32x32x4, 2048 samples, T=20; trainable delays: %.1f%% after %zu epochs (max delay %.1f, "
                "held-out %.1f%%); frozen delays: best %.1f%%, final %.1f%% over %zu epochs (held-out %.1f%%); %.0fs",
                100 * learned.best_acc, learned.epochs, learned.max_delay, 100 * learned.held_out_acc,
                100 * frozen.best_acc, 100 * frozen.final_acc, frozen.epochs, 100 * frozen.held_out_acc, secs);
  return {ok ? Verdict::pass : Verdict::fail, buf};
}

// ---------------------------------------------------------------------------
// 4. overfit the SHD-format fixture

Outcome overfit_fixture() {
  const auto t0 = Clock::now();
  const auto manifest = parse_manifest(SNN_FIXTURES "/shd_mini.manifest");
  const auto data = load_split(manifest.train, manifest);
  NetworkConfig c;  // SHD preset, hidden layers scaled to 64
  c.hidden1 = 64;
  c.hidden2 = 64;
  Model m = init_model(c, derive_seed(1, SeedStream::init));
  TrainConfig tc;
  tc.batch_size = data.size();
  tc.seed = 1;
  auto opt = make_optimizer(m, tc.lr_weights, tc.delay_lr_factor);
  double acc = 0.0;
  std::size_t epochs = 0;
  while (epochs < 200 && acc < 1.0) {
    const auto em = train_epoch(m, data, opt, tc, epochs);
    acc = evaluate(m, data, data.size(), 0).accuracy;
    scheduler_step(opt, em.accuracy);
    ++epochs;
  }
  const double secs = seconds_since(t0);
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu samples, one batch, hidden 64: train accuracy %.1f%% after %zu epochs; %.0fs",
                data.size(), 100 * acc, epochs, secs);
  return {acc == 1.0 && secs < 300.0 ? Verdict::pass : Verdict::fail, buf};
}

// ---------------------------------------------------------------------------
// 5, 6. real SHD runs

const char* shd_manifest() {
  const char* p = std::getenv("SNN_SHD_MANIFEST");
  return p != nullptr && *p != '\0' ? p : nullptr;
}

struct ShdSplits {
  Dataset train, valid;
};

ShdSplits load_shd(std::uint64_t seed) {
  const auto m = parse_manifest(shd_manifest());
  auto train = load_split(m.train, m);
  if (!m.valid.empty()) return {std::move(train), load_split(m.valid, m)};
  auto [tr, va] = split_validation(train, m.valid_fraction, derive_seed(seed, SeedStream::split));
  return {std::move(tr), std::move(va)};
}

double shd_run(NetworkConfig c, std::size_t epochs, std::uint64_t seed) {
  const auto splits = load_shd(seed);
  Model m = init_model(c, derive_seed(seed, SeedStream::init));
  TrainConfig tc;
  tc.epochs = epochs;
  tc.seed = seed;
  const auto hist = fit(m, splits.train, &splits.valid, tc);
  double best = 0.0;
  for (const auto& r : hist) best = std::max(best, r.valid_acc);
  return best;
}

Outcome shd_reproduction() {
  if (shd_manifest() == nullptr) return {Verdict::not_run, "set SNN_SHD_MANIFEST to an SHD manifest to run"};
  const auto t0 = Clock::now();
  double sum = 0.0, best = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const double acc = shd_run(NetworkConfig{}, 100, seed);
    sum += acc;
    best = std::max(best, acc);
    std::printf("  seed %llu: best valid acc %.2f%%\n", static_cast<unsigned long long>(seed), 100 * acc);
    std::fflush(stdout);
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "10 seeds: mean %.2f%%, max %.2f%% (need mean >= 93%%); %.0fs", 10 * sum,
                100 * best, seconds_since(t0));
  return {sum / 10.0 >= 0.93 ? Verdict::pass : Verdict::fail, buf};
}

Outcome ablation_ordering() {
  if (shd_manifest() == nullptr) return {Verdict::not_run, "set SNN_SHD_MANIFEST to an SHD manifest to run"};
  const auto t0 = Clock::now();
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::array<double, 4> acc{};  // LIF, AdLIF+, delay-LIF, delay-AdLIF+
    for (int v = 0; v < 4; ++v) {
      NetworkConfig c;
      c.hidden1 = c.hidden2 = 64;
      c.neuron_model = (v % 2 == 0) ? NeuronModel::lif : NeuronModel::adlif_plus;
      c.train_delays = v >= 2;
      acc[v] = shd_run(c, 30, seed);
    }
    const bool ordered = acc[0] < acc[1] && acc[0] < acc[2] && acc[1] < acc[3];
    wins += ordered;
    std::printf("  seed %llu: LIF %.2f, AdLIF+ %.2f, delay-LIF %.2f, delay-AdLIF+ %.2f%s\n",
                static_cast<unsigned long long>(seed), 100 * acc[0], 100 * acc[1], 100 * acc[2], 100 * acc[3],
                ordered ? "" : "  (out of order)");
    std::fflush(stdout);
  }
  char buf[120];
  std::snprintf(buf, sizeof buf, "ordering held in %d of 5 seeds (need 4); %.0fs", wins, seconds_since(t0));
  return {wins >= 4 ? Verdict::pass : Verdict::fail, buf};
}

// ---------------------------------------------------------------------------
// 7. invariants

Outcome invariant_suite() {
  const auto t0 = Clock::now();
  std::vector<std::string> failed;
  auto expect = [&](bool cond, const char* what) {
    if (!cond) failed.push_back(what);
  };

  NetworkConfig c;
  c.inputs = 20;
  c.hidden1 = 24;
  c.hidden2 = 16;
  c.classes = 6;
  c.d_max = 8;
  Model m = init_model(c, 21);
  for (auto& syn : m.synapses)
    for (auto& w : syn.weights.data) w *= 3.0;
  SpikeTensor x(6, 50, c.inputs);
  Rng rng(4);
  for (auto& v : x.values) v = uniform(rng, 0.0, 1.0) < 0.2 ? 1.0 : 0.0;

  // Zero-delay equivalence against the delay-free oracle.
  {
    const auto res = network_forward(x, m, {Mode::eval, 5, StateInit::random_uniform, 0});
    bool same = true;
    for (std::size_t b = 0; b < x.batch; ++b) {
      const auto& rec = res.record.samples[b];
      const std::vector<double> in(x.sample(b).begin(), x.sample(b).end());
      const auto ref = oracle::delay_free_forward(m, in, x.steps, {rec.hidden[0].u0, rec.hidden[1].u0},
                                                  {rec.hidden[0].w0, rec.hidden[1].w0});
      for (std::size_t k = 0; k < c.classes; ++k) same = same && res.scores(b, k) == ref.scores[k];
      for (std::size_t t = 0; t < x.steps; ++t)
        for (std::size_t k = 0; k < c.classes; ++k) same = same && rec.readout_potential(t, k) == ref.readout[t][k];
    }
    expect(same, "zero-delay equivalence");
  }

  // Fractional delays from here on.
  for (auto& syn : m.synapses)
    for (auto& d : syn.delays.d) d = uniform(rng, 0.0, double(c.d_max));
  for (auto mode : {Mode::train, Mode::eval}) {
    const auto a = network_forward(x, m, {mode, 9, StateInit::random_uniform, 0});
    const auto b = network_forward(x, m, {mode, 9, StateInit::random_uniform, 1});
    expect(a.scores == b.scores, "deterministic forward replay");
    bool binary = true;
    std::array<std::uint64_t, 2> recount{};
    for (const auto& rec : a.record.samples)
      for (std::size_t l = 0; l < 2; ++l)
        for (double s : rec.hidden[l].s.data) {
          binary = binary && (s == 0.0 || s == 1.0);
          recount[l] += s == 1.0;
        }
    expect(binary, "spike binariness");
    expect(recount == a.spikes.per_layer, "spike-count recount");
    bool normalised = true;
    for (std::size_t r = 0; r < x.batch; ++r) {
      double total = 0.0;
      for (std::size_t k = 0; k < c.classes; ++k) total += a.scores(r, k);
      normalised = normalised && std::abs(total - double(x.steps)) < 1e-10;
    }
    expect(normalised, "readout normalisation");
  }

  // Binning conservation.
  {
    BinningSpec spec;
    std::vector<EventRecord> ev;
    std::size_t in_range = 0;
    for (int k = 0; k < 20000; ++k) {
      ev.push_back({0, 0, std::uint32_t(uniform_index(rng, 700)), uniform(rng, 0.0, 1.25)});
      in_range += ev.back().time < 1.0;
    }
    const auto g = bin_sample(ev, spec);
    expect(std::accumulate(g.data.begin(), g.data.end(), 0.0) == double(in_range), "binning conservation");
  }

  // Clip and clamp idempotence.
  {
    NeuronParams p;
    DelayMatrix d(1, 200, 25);
    for (int k = 0; k < 200; ++k) {
      p.alpha.push_back(uniform(rng, -1.0, 2.0));
      p.beta.push_back(uniform(rng, -1.0, 2.0));
      p.a.push_back(uniform(rng, -3.0, 3.0));
      p.b.push_back(uniform(rng, -3.0, 3.0));
      d.d[k] = uniform(rng, -10.0, 40.0);
    }
    const auto once = clip_params(p);
    expect(clip_params(once) == once, "clip idempotence");
    const auto clamped = clamp_delays(d);
    expect(clamp_delays(clamped) == clamped, "delay clamp idempotence");
  }

  // Deterministic training replay.
  {
    Dataset data{30, c.inputs, c.classes, {}};
    for (int k = 0; k < 12; ++k) {
      Sample s{Matrix(30, c.inputs), k % int(c.classes)};
      for (auto& v : s.values.data) v = uniform(rng, 0.0, 1.0) < 0.2 ? 1.0 : 0.0;
      data.samples.push_back(s);
    }
    auto replay = [&](unsigned threads) {
      Model mm = init_model(c, 2);
      TrainConfig tc;
      tc.epochs = 2;
      tc.batch_size = 5;
      tc.seed = 17;
      tc.threads = threads;
      const auto hist = fit(mm, data, &data, tc);
      std::vector<double> trace;
      for (const auto& r : hist) trace.insert(trace.end(), {r.train_loss, r.train_acc, r.valid_acc});
      trace.insert(trace.end(), mm.synapses[0].weights.data.begin(), mm.synapses[0].weights.data.end());
      trace.insert(trace.end(), mm.synapses[1].delays.d.begin(), mm.synapses[1].delays.d.end());
      return trace;
    };
    const auto first = replay(1);
    expect(first == replay(1) && first == replay(3), "deterministic training replay");
  }

  const double secs = seconds_since(t0);
  std::string detail;
  if (failed.empty()) {
    detail = "binariness, normalisation, recount, conservation, idempotence, zero-delay equivalence, replays";
  } else {
    detail = "failed:";
    for (const auto& f : failed) detail += " [" + f + "]";
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "; %.1fs", secs);
  return {failed.empty() && secs < 60.0 ? Verdict::pass : Verdict::fail, detail + buf};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradient_correctness},
      {"regime map", regime_map_quadrants},
      {"delay learning", delay_learning},
      {"overfit sanity", overfit_fixture},
      {"SHD reproduction", shd_reproduction},
      {"ablation ordering", ablation_ordering},
      {"invariant suite", invariant_suite},
  };
  std::set<int> selected;
  for (int k = 1; k < argc; ++k) selected.insert(std::atoi(argv[k]));

  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = int(k) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o{Verdict::fail, ""};
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {Verdict::fail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.verdict == Verdict::pass ? "PASS" : o.verdict == Verdict::fail ? "FAIL" : "NOT RUN";
    std::printf("[%s] criterion %d, %s: %s\n", tag, id, criteria[k].first, o.detail.c_str());
    std::fflush(stdout);
    failures += o.verdict == Verdict::fail;
  }
  return failures == 0 ? 0 : 1;
}
