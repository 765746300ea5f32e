#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "snn/analysis.hpp"
#include "snn/rng.hpp"
#include "snn/textutil.hpp"
#include "snn/training.hpp"

using namespace snn;
namespace fs = std::filesystem;

namespace {

std::vector<double> stimulus(const RegimeMapSpec& spec) {
  std::vector<double> drive(spec.steps, 0.0);
  for (auto t : spec.spike_times) drive[t] += spec.weight;
  return drive;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path, std::string& header) {
  std::ifstream in(path);
  std::getline(in, header);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    for (auto f : split(line, ',')) fields.emplace_back(f);
    rows.push_back(fields);
  }
  return rows;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "snn_test_analysis" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("canonical stimulus") {
  const auto spec = canonical_regime_spec();
  REQUIRE(spec.spike_times.size() == 12);
  CHECK(spec.spike_times.front() == 4);
  CHECK(spec.spike_times.back() == 92);
  CHECK(spec.steps == 100);
  CHECK(spec.a.steps == 81);
  CHECK(spec.b.steps == 81);
}

TEST_CASE("LIF point matches a scalar LIF simulation") {
  const auto spec = canonical_regime_spec();
  const auto ref = oracle::scalar_lif(spec.alpha, spec.theta, stimulus(spec));
  const int expected = std::accumulate(ref.begin(), ref.end(), 0);
  CHECK(count_output_spikes(0.0, 0.0, spec) == expected);
  CHECK(expected > 0);
  for (double a : {-0.7, 0.3}) {
    for (double b : {0.0, 1.1}) {
      const auto s = oracle::scalar_adlif(spec.alpha, spec.beta, a, b, spec.theta, stimulus(spec));
      CHECK(count_output_spikes(a, b, spec) == std::accumulate(s.begin(), s.end(), 0));
    }
  }
}

TEST_CASE("regime map quadrants") {
  const auto spec = canonical_regime_spec();
  const auto map = regime_map(spec, 1);
  REQUIRE(map.cells.size() == 81 * 81);
  int positive = 0, worst = 0;
  bool chaotic = false;
  for (const auto& cell : map.cells) {
    if (cell.a >= 0.0 && cell.a <= 1.0 && cell.b >= 0.0 && cell.b <= 2.0) {
      ++positive;
      worst = std::max(worst, cell.count);
    }
    if (cell.a < 0.0 && cell.count > 12) chaotic = true;
  }
  CHECK(positive > 1000);
  CHECK(worst <= 12);
  CHECK(chaotic);

  const auto again = regime_map(spec, 3);
  for (std::size_t k = 0; k < map.cells.size(); ++k) REQUIRE(again.cells[k].count == map.cells[k].count);

  std::ostringstream csv;
  write_regime_csv(csv, map);
  std::istringstream in(csv.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "a,b,count");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 81 * 81);

  for (const auto& f : b_monotonicity_findings(map)) {
    CHECK(f.a >= 0.0);
    CHECK(f.count_to > f.count_from);
  }
}

TEST_CASE("regime spec files") {
  const auto dir = scratch("spec");
  std::ofstream(dir / "s.cfg") << "a_steps = 5\nb_min = 0\nb_max = 1\nspike_times = 1, 3, 5\nweight = 2\n";
  const auto spec = load_regime_spec(dir / "s.cfg");
  CHECK(spec.a.steps == 5);
  CHECK(spec.b.min == 0.0);
  CHECK(spec.spike_times == std::vector<std::size_t>{1, 3, 5});
  CHECK(spec.weight == 2.0);
  CHECK(spec.alpha == 0.96);
  std::ofstream(dir / "bad.cfg") << "wieght = 2\n";
  CHECK_THROWS_AS(load_regime_spec(dir / "bad.cfg"), ConfigError);
  std::ofstream(dir / "late.cfg") << "steps = 10\nspike_times = 12\n";
  CHECK_THROWS(regime_map(load_regime_spec(dir / "late.cfg")));
}

TEST_CASE("spike statistics") {
  NetworkConfig c;
  c.inputs = 6;
  c.hidden1 = 10;
  c.hidden2 = 7;
  c.classes = 3;
  const Model quiet = init_model(c, 1);
  Dataset zeros{20, 6, 3, {}};
  for (int k = 0; k < 5; ++k) zeros.samples.push_back({Matrix(20, 6), k % 3});
  const auto none = spike_stats(quiet, zeros, 2, 0);
  CHECK(none.layers[0].total_spikes == 0);
  CHECK(none.layers[1].total_spikes == 0);
  CHECK(none.per_neuron() == 0.0);

  Model m = init_model(c, 2);
  for (auto& syn : m.synapses)
    for (auto& w : syn.weights.data) w *= 4.0;
  Dataset data{20, 6, 3, {}};
  std::mt19937_64 gen(3);
  for (int k = 0; k < 7; ++k) {
    Sample s{Matrix(20, 6), k % 3};
    for (auto& v : s.values.data) v = gen() % 3 == 0 ? 1.0 : 0.0;
    data.samples.push_back(s);
  }
  const auto stats = spike_stats(m, data, 3, 9);
  CHECK(stats.layers[0].samples == 7);
  CHECK(stats.layers[1].neurons == 7);

  std::array<std::uint64_t, 2> recount{};
  const auto batches = make_batches(data, 3, std::nullopt);
  for (std::size_t k = 0; k < batches.size(); ++k) {
    const auto res = network_forward(batches[k].inputs, m,
                                     {Mode::eval, derive_seed(9, SeedStream::state, k), StateInit::random_uniform, 1});
    for (const auto& rec : res.record.samples)
      for (std::size_t l = 0; l < 2; ++l)
        for (double s : rec.hidden[l].s.data) recount[l] += s == 1.0;
  }
  CHECK(stats.layers[0].total_spikes == recount[0]);
  CHECK(stats.layers[1].total_spikes == recount[1]);
  CHECK(recount[0] > 0);
  CHECK(stats.layers[0].per_neuron() == doctest::Approx(double(recount[0]) / (10.0 * 7.0)));
  const auto ev = evaluate(m, data, 3, 9);
  CHECK(ev.spikes.per_layer == recount);
}

TEST_CASE("exported distributions of a fresh model") {
  NetworkConfig c;
  const Model m = init_model(c, 5);
  const auto dir = scratch("export");
  const auto files = export_distributions(m, dir);
  CHECK(files.size() == 11);

  const NeuronBounds b = c.bounds();
  const std::array<std::pair<std::string, std::pair<double, double>>, 4> ranges{{
      {"alpha", {b.alpha_lo, b.alpha_hi}},
      {"beta", {b.beta_lo, b.beta_hi}},
      {"a", {b.a_lo, b.a_hi}},
      {"b", {b.b_lo, b.b_hi}},
  }};
  std::size_t rows_total = 0;
  for (int layer = 1; layer <= 2; ++layer) {
    for (const auto& [name, range] : ranges) {
      std::string header;
      const auto rows = read_csv(dir / ("hidden" + std::to_string(layer) + "_" + name + ".csv"), header);
      CHECK(header == "neuron,value");
      CHECK(rows.size() == 128);
      rows_total += rows.size();
      std::vector<double> values;
      for (const auto& r : rows) values.push_back(std::stod(r[1]));
      INFO(name << " layer " << layer);
      CHECK(oracle::ks_uniform_pvalue(values, range.first, range.second) > 0.01);
    }
  }
  for (int l = 0; l < 3; ++l) {
    std::string header;
    const auto rows = read_csv(dir / ("delays_synapses" + std::to_string(l) + ".csv"), header);
    CHECK(header == "pre,post,delay");
    CHECK(rows.size() == m.synapses[l].delays.d.size());
    rows_total += rows.size();
    for (const auto& r : rows) REQUIRE(std::stod(r[2]) == 0.0);
  }
  std::size_t expected = 0;
  for (const auto& syn : m.synapses) expected += syn.delays.d.size();
  expected += 4 * (c.hidden1 + c.hidden2);
  CHECK(rows_total == expected);
}
