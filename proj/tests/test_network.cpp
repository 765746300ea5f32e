#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "snn/network.hpp"

using namespace snn;

namespace {

NetworkConfig small_config() {
  NetworkConfig c;
  c.inputs = 10;
  c.hidden1 = 12;
  c.hidden2 = 9;
  c.classes = 5;
  c.d_max = 6;
  return c;
}

SpikeTensor random_input(std::size_t batch, std::size_t steps, std::size_t channels,
                         std::uint64_t seed, double rate = 0.3) {
  SpikeTensor x(batch, steps, channels);
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& v : x.values) v = unit(gen) < rate ? std::floor(1.0 + 3.0 * unit(gen)) : 0.0;
  return x;
}

// Scale weights so the small network actually spikes.
Model lively_model(const NetworkConfig& c, std::uint64_t seed) {
  Model m = init_model(c, seed);
  for (auto& syn : m.synapses)
    for (auto& w : syn.weights.data) w *= 3.0;
  return m;
}

}  // namespace

TEST_CASE("layer_forward examples") {
  SynapseSet syn{Matrix(2, 1, 1.0), {0.0}, DelayMatrix(2, 1, 4, 0.0)};
  DelayLine line(2, 4);
  std::vector<double> cur(1);

  line.push(std::vector<double>{1.0, 1.0});
  layer_forward(line, syn, cur);
  CHECK(cur[0] == 2.0);

  syn.delays.d = {0.0, 1.0};
  line.reset();
  line.push(std::vector<double>{1.0, 1.0});
  layer_forward(line, syn, cur);
  CHECK(cur[0] == 1.0);
  line.push(std::vector<double>{0.0, 0.0});
  layer_forward(line, syn, cur);
  CHECK(cur[0] == 1.0);

  SynapseSet bias_only{Matrix(2, 1, 0.0), {0.4}, DelayMatrix(2, 1, 4, 0.0)};
  line.reset();
  for (int t = 0; t < 5; ++t) {
    line.push(std::vector<double>{double(t % 2), 1.0});
    layer_forward(line, bias_only, cur);
    CHECK(cur[0] == 0.4);
  }

  std::vector<double> wrong(2);
  CHECK_THROWS_AS(layer_forward(line, syn, wrong), std::invalid_argument);
}

TEST_CASE("readout modes") {
  Matrix u(1, 2);
  u(0, 0) = 2.0;
  const auto s = readout(u, ReadoutMode::softmax_sum);
  CHECK(s[0] == doctest::Approx(0.8808).epsilon(1e-4));
  CHECK(s[1] == doctest::Approx(0.1192).epsilon(1e-3));

  Matrix flat(7, 4, 0.3);
  for (double v : readout(flat, ReadoutMode::softmax_sum)) CHECK(v == doctest::Approx(7.0 / 4.0));

  std::mt19937_64 gen(2);
  std::normal_distribution<double> n(0.0, 3.0);
  Matrix r(30, 6);
  for (auto& v : r.data) v = n(gen);
  const auto base = readout(r, ReadoutMode::softmax_sum);
  CHECK(std::accumulate(base.begin(), base.end(), 0.0) == doctest::Approx(30.0).epsilon(1e-12));
  Matrix shifted = r;
  for (auto& v : shifted.row(11)) v += 17.5;
  const auto moved = readout(shifted, ReadoutMode::softmax_sum);
  for (std::size_t c = 0; c < 6; ++c) CHECK(moved[c] == doctest::Approx(base[c]).epsilon(1e-12));

  const auto sums = readout(r, ReadoutMode::sum_potentials);
  for (std::size_t c = 0; c < 6; ++c) {
    double acc = 0.0;
    for (std::size_t t = 0; t < 30; ++t) acc += r(t, c);
    CHECK(sums[c] == doctest::Approx(acc).epsilon(1e-12));
  }
}

TEST_CASE("init_model") {
  const auto c = small_config();
  const Model m = init_model(c, 5);
  for (std::size_t l = 0; l < 3; ++l) {
    const auto& syn = m.synapses[l];
    const double limit = std::sqrt(6.0 / double(c.layer_size(l) + c.layer_size(l + 1)));
    CHECK(syn.weights.rows == c.layer_size(l));
    CHECK(syn.weights.cols == c.layer_size(l + 1));
    for (double w : syn.weights.data) REQUIRE(std::abs(w) <= limit);
    for (double b : syn.bias) CHECK(b == 0.0);
    for (double d : syn.delays.d) CHECK(d == 0.0);
  }
  CHECK(init_model(c, 5).synapses[1] == m.synapses[1]);
  CHECK_FALSE(init_model(c, 6).synapses[1] == m.synapses[1]);
  NetworkConfig bad = c;
  bad.dropout[0] = 1.0;
  CHECK_THROWS(init_model(bad, 1));
  bad = c;
  bad.hidden2 = 0;
  CHECK_THROWS(init_model(bad, 1));
}

TEST_CASE("zero delays: bitwise equal to a delay-free implementation") {
  for (auto mode : {ReadoutMode::softmax_sum, ReadoutMode::sum_potentials}) {
    auto c = small_config();
    c.readout = mode;
    const Model m = lively_model(c, 9);
    const auto x = random_input(3, 40, c.inputs, 4);
    ForwardOptions opt{Mode::eval, 77, StateInit::random_uniform, 1};
    const auto res = network_forward(x, m, opt);
    std::size_t spikes = 0;
    for (std::size_t b = 0; b < x.batch; ++b) {
      const auto& rec = res.record.samples[b];
      const std::vector<double> in(x.sample(b).begin(), x.sample(b).end());
      const auto ref = oracle::delay_free_forward(m, in, 40, {rec.hidden[0].u0, rec.hidden[1].u0},
                                                  {rec.hidden[0].w0, rec.hidden[1].w0});
      for (std::size_t t = 0; t < 40; ++t) {
        for (std::size_t l = 0; l < 2; ++l)
          for (std::size_t i = 0; i < ref.spikes[l][t].size(); ++i) {
            REQUIRE(rec.hidden[l].s(t, i) == ref.spikes[l][t][i]);
            spikes += ref.spikes[l][t][i] > 0.5;
          }
        for (std::size_t k = 0; k < c.classes; ++k) REQUIRE(rec.readout_potential(t, k) == ref.readout[t][k]);
      }
      for (std::size_t k = 0; k < c.classes; ++k) REQUIRE(res.scores(b, k) == ref.scores[k]);
    }
    CHECK(spikes > 50);
  }
}

TEST_CASE("scores sum to the number of steps in softmax mode") {
  auto c = small_config();
  c.horizon = Horizon::extended;
  const Model m = lively_model(c, 3);
  const auto x = random_input(4, 30, c.inputs, 8);
  const auto res = network_forward(x, m, {Mode::train, 1, StateInit::random_uniform, 1});
  CHECK(res.record.steps == 30 + 6);
  for (std::size_t b = 0; b < 4; ++b) {
    double total = 0.0;
    for (std::size_t k = 0; k < c.classes; ++k) total += res.scores(b, k);
    CHECK(std::abs(total - 36.0) < 1e-10);
  }
}

TEST_CASE("all-zero input with zero state is silent") {
  const auto c = small_config();
  const Model m = init_model(c, 1);
  const SpikeTensor x(2, 25, c.inputs);
  const auto res = network_forward(x, m, {Mode::eval, 0, StateInit::zeros, 1});
  CHECK(res.spikes.per_layer[0] == 0);
  CHECK(res.spikes.per_layer[1] == 0);
  for (const auto& rec : res.record.samples)
    for (double v : rec.readout_potential.data) CHECK(v == 0.0);
  for (double s : res.scores.data) CHECK(s == doctest::Approx(25.0 / 5.0));
}

TEST_CASE("single input spike gives one readout bump at the delayed time") {
  NetworkConfig c;
  c.inputs = 1;
  c.hidden1 = 1;
  c.hidden2 = 1;
  c.classes = 2;
  c.d_max = 5;
  c.dropout = {0.0, 0.0};
  Model m = init_model(c, 1);
  for (auto& p : m.neurons) p = {{0.5}, {0.97}, {0.0}, {0.0}};
  m.synapses[0].weights.fill(2.5);
  m.synapses[1].weights.fill(2.5);
  m.synapses[1].delays.d = {2.0};
  m.synapses[2].weights(0, 0) = 1.0;
  m.synapses[2].weights(0, 1) = 0.0;
  m.synapses[2].delays.d = {3.0, 3.0};
  SpikeTensor x(1, 20, 1);
  x.at(0, 3)[0] = 1.0;
  const auto res = network_forward(x, m, {Mode::eval, 0, StateInit::zeros, 1});
  const auto& rec = res.record.samples[0];
  for (std::size_t t = 0; t < 20; ++t) {
    CHECK(rec.hidden[0].s(t, 0) == (t == 3 ? 1.0 : 0.0));
    CHECK(rec.hidden[1].s(t, 0) == (t == 5 ? 1.0 : 0.0));
    CHECK(rec.readout_potential(t, 0) == (t == 8 ? 1.0 : 0.0));
    CHECK(rec.readout_potential(t, 1) == 0.0);
  }
}

TEST_CASE("eval mode is deterministic and spike counts match a recount") {
  auto c = small_config();
  Model m = lively_model(c, 4);
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& syn : m.synapses)
    for (auto& d : syn.delays.d) d = unit(gen) * c.d_max;
  const auto x = random_input(5, 30, c.inputs, 2);
  for (auto mode : {Mode::eval, Mode::train}) {
    const ForwardOptions opt{mode, 12, StateInit::random_uniform, 2};
    const auto a = network_forward(x, m, opt);
    const auto b = network_forward(x, m, {mode, 12, StateInit::random_uniform, 1});
    CHECK(a.scores == b.scores);
    std::array<std::uint64_t, 2> recount{};
    for (const auto& rec : a.record.samples)
      for (std::size_t l = 0; l < 2; ++l)
        for (double s : rec.hidden[l].s.data) {
          REQUIRE((s == 0.0 || s == 1.0));
          recount[l] += s == 1.0;
        }
    CHECK(recount == a.spikes.per_layer);
    CHECK(recount[0] > 0);
  }
}

TEST_CASE("inverted dropout preserves the expected activation") {
  auto c = small_config();
  c.dropout = {0.5, 0.3};
  const Model m = lively_model(c, 6);
  const auto x = random_input(1, 20, c.inputs, 3);
  const auto input = x.sample(0);
  const auto ref = forward_sample(input, 20, m, {Mode::eval, 0, StateInit::zeros, 1}, 0);
  REQUIRE(ref.hidden[0].mask.empty());

  const int draws = 1000;
  double sum_ratio = 0.0, dropped = 0.0;
  std::size_t cells = 0;
  for (int k = 0; k < draws; ++k) {
    const auto rec = forward_sample(input, 20, m, {Mode::train, 99, StateInit::zeros, 1}, k);
    // First hidden layer spikes do not depend on the mask.
    REQUIRE(rec.hidden[0].s == ref.hidden[0].s);
    for (std::size_t n = 0; n < rec.hidden[0].s.size(); ++n) {
      const double m0 = rec.hidden[0].mask.data[n];
      REQUIRE((m0 == 0.0 || m0 == 2.0));
      dropped += m0 == 0.0;
      if (ref.hidden[0].s.data[n] == 1.0) {
        sum_ratio += rec.hidden[0].output.data[n];
        ++cells;
      }
    }
  }
  REQUIRE(cells > 1000);
  const double mean = sum_ratio / cells;
  const double sigma = 1.0 / std::sqrt(double(cells));  // per-entry std of the mask is 1 at p = 0.5
  CHECK(std::abs(mean - 1.0) < 3.0 * sigma);
  const double n_total = double(draws) * ref.hidden[0].s.size();
  CHECK(std::abs(dropped / n_total - 0.5) < 3.0 * 0.5 / std::sqrt(n_total));
}

TEST_CASE("non-finite values are reported with layer and step") {
  const auto c = small_config();
  Model m = init_model(c, 1);
  auto x = random_input(1, 10, c.inputs, 1);
  x.at(0, 4)[0] = NAN;
  try {
    network_forward(x, m, {Mode::eval, 0, StateInit::zeros, 1});
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("layer 1") != std::string::npos);
    CHECK(msg.find("step 4") != std::string::npos);
  }
}

TEST_CASE("enum names round-trip") {
  for (auto r : {ReadoutMode::softmax_sum, ReadoutMode::sum_potentials})
    CHECK(parse_readout_mode(to_string(r)) == r);
  for (auto h : {Horizon::input, Horizon::extended}) CHECK(parse_horizon(to_string(h)) == h);
  for (auto n : {NeuronModel::adlif_plus, NeuronModel::lif}) CHECK(parse_neuron_model(to_string(n)) == n);
  CHECK_THROWS(parse_readout_mode("softmax"));
}
