#include "snn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "snn/rng.hpp"

namespace snn {

bool GradcheckReport::passed() const {
  for (const auto& c : classes) {
    if (!(c.max_rel_error < tolerance)) return false;
  }
  return integer_delays.checked == 0 || integer_delays.max_rel_error < one_sided_tolerance;
}

GradcheckProblem make_gradcheck_problem(const GradcheckOptions& options) {
  NetworkConfig cfg;
  cfg.inputs = options.sizes[0];
  cfg.hidden1 = options.sizes[1];
  cfg.hidden2 = options.sizes[2];
  cfg.classes = options.sizes[3];
  cfg.dropout = {0.0, 0.0};
  cfg.d_max = options.d_max;
  cfg.readout = options.readout;
  cfg.spike = {SpikeFunction::soft_sigmoid, options.slope};

  GradcheckProblem prob;
  prob.model = init_model(cfg, options.seed);
  Rng rng(derive_seed(options.seed, SeedStream::data));
  for (auto& syn : prob.model.synapses) {
    for (auto& w : syn.weights.data) w *= 2.0;
    for (auto& b : syn.bias) b = uniform(rng, -0.2, 0.2);
    std::size_t k = 0;
    for (auto& d : syn.delays.d) {
      const double whole = std::floor(uniform(rng, 0.0, static_cast<double>(cfg.d_max)));
      d = whole + 0.1 + 0.8 * uniform(rng, 0.0, 1.0);
      if (options.integer_delays && k % 4 == 0) d = whole;
      ++k;
    }
  }
  prob.inputs = SpikeTensor(options.batch, options.steps, cfg.inputs);
  for (auto& x : prob.inputs.values) x = uniform(rng, 0.0, 1.0) < 0.3 ? uniform(rng, 0.5, 1.5) : 0.0;
  for (std::size_t n = 0; n < options.batch; ++n) {
    prob.labels.push_back(static_cast<int>(uniform_index(rng, cfg.classes)));
  }
  prob.forward.mode = Mode::eval;
  prob.forward.seed = derive_seed(options.seed, SeedStream::state);
  prob.forward.threads = 1;
  return prob;
}

double problem_loss(const GradcheckProblem& problem) {
  const auto res = network_forward(problem.inputs, problem.model, problem.forward);
  return loss(res.scores, problem.labels);
}

namespace {

struct Coordinate {
  std::string cls;
  std::string where;
  double* value;
  double analytic;
  bool integer_kink;
};

}  // namespace

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
  auto prob = make_gradcheck_problem(options);
  const auto res = network_forward(prob.inputs, prob.model, prob.forward);
  auto grads = backward(res.record, prob.inputs, prob.labels, prob.model, {false, 1});
  if (options.tamper) options.tamper(grads);

  std::vector<Coordinate> coords;
  for (std::size_t l = 0; l < 3; ++l) {
    auto& syn = prob.model.synapses[l];
    const auto& g = grads.synapses[l];
    const auto post = syn.weights.cols;
    for (std::size_t k = 0; k < syn.weights.size(); ++k) {
      const auto where = "synapses" + std::to_string(l) + "[" + std::to_string(k / post) + "," +
                         std::to_string(k % post) + "]";
      coords.push_back({"F", where, &syn.weights.data[k], g.weights.data[k], false});
      const double d = syn.delays.d[k];
      coords.push_back({"delays", where, &syn.delays.d[k], g.delays[k], d == std::floor(d)});
    }
    for (std::size_t i = 0; i < syn.bias.size(); ++i) {
      coords.push_back({"bias", "synapses" + std::to_string(l) + "[" + std::to_string(i) + "]",
                        &syn.bias[i], g.bias[i], false});
    }
  }
  for (std::size_t l = 0; l < 2; ++l) {
    auto& p = prob.model.neurons[l];
    const auto& g = grads.neurons[l];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const auto where = "hidden" + std::to_string(l + 1) + "[" + std::to_string(i) + "]";
      coords.push_back({"alpha", where, &p.alpha[i], g.alpha[i], false});
      coords.push_back({"beta", where, &p.beta[i], g.beta[i], false});
      coords.push_back({"a", where, &p.a[i], g.a[i], false});
      coords.push_back({"b", where, &p.b[i], g.b[i], false});
    }
  }

  GradcheckReport report;
  report.tolerance = options.tolerance;
  report.one_sided_tolerance = options.one_sided_tolerance;
  for (const char* name : {"F", "bias", "delays", "alpha", "beta", "a", "b"}) {
    report.classes.push_back({name, 0.0, 0, {}});
  }
  auto find = [&](const std::string& name) -> ClassReport& {
    return *std::find_if(report.classes.begin(), report.classes.end(),
                         [&](const ClassReport& c) { return c.name == name; });
  };

  const double eps = options.epsilon;
  const double base = problem_loss(prob);
  for (auto& c : coords) {
    const double orig = *c.value;
    double numeric;
    if (c.integer_kink) {
      // Non-differentiable point: the analytic value is the right derivative.
      auto forward_diff = [&](double h) {
        *c.value = orig + h;
        return (problem_loss(prob) - base) / h;
      };
      numeric = forward_diff(eps);
      if (options.richardson) numeric = 2.0 * forward_diff(0.5 * eps) - numeric;
    } else {
      auto central = [&](double h) {
        *c.value = orig + h;
        const double up = problem_loss(prob);
        *c.value = orig - h;
        const double down = problem_loss(prob);
        return (up - down) / (2.0 * h);
      };
      numeric = central(eps);
      if (options.richardson) numeric = (4.0 * central(0.5 * eps) - numeric) / 3.0;
    }
    *c.value = orig;
    const double scale = std::max({std::abs(c.analytic), std::abs(numeric), options.abs_floor});
    const double err = std::abs(c.analytic - numeric) / scale;
    auto& rep = c.integer_kink ? report.integer_delays : find(c.cls);
    ++rep.checked;
    if (err > rep.max_rel_error || std::isnan(err)) {
      rep.max_rel_error = std::isnan(err) ? INFINITY : err;
      char buf[96];
      std::snprintf(buf, sizeof buf, " analytic=%.9e numeric=%.9e", c.analytic, numeric);
      rep.worst = c.where + buf;
    }
  }
  return report;
}

}  // namespace snn
