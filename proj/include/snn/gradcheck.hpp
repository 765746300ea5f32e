#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "snn/training.hpp"

namespace snn {

struct GradcheckOptions {
  std::uint64_t seed = 1;
  std::array<std::size_t, 4> sizes{6, 8, 8, 4};  // inputs, hidden1, hidden2, classes
  std::size_t steps = 16;
  std::size_t batch = 2;
  int d_max = 5;
  double epsilon = 1e-4;
  // Combine central differences at epsilon and epsilon / 2 so the ε² term
  // cancels; the plain two-point stencil is truncation-limited near 1e-5
  // for the adaptation leak.
  bool richardson = true;
  double tolerance = 1e-5;
  // Gradients smaller than this are compared in absolute terms.
  double abs_floor = 1e-5;
  double slope = 5.0;
  ReadoutMode readout = ReadoutMode::softmax_sum;
  // Snap every fourth delay to an integer. Those kink points are checked
  // with a forward one-sided difference, reported separately.
  bool integer_delays = false;
  double one_sided_tolerance = 1e-3;
  // Applied to the analytic gradients before comparison (harness tests).
  std::function<void(Gradients&)> tamper;
};

struct ClassReport {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // coordinate of the largest error
};

struct GradcheckReport {
  std::vector<ClassReport> classes;  // F, bias, delays, alpha, beta, a, b
  ClassReport integer_delays{"delays@integer", 0.0, 0, {}};
  double tolerance = 0.0;
  double one_sided_tolerance = 0.0;

  bool passed() const;
};

struct GradcheckProblem {
  Model model;
  SpikeTensor inputs;
  std::vector<int> labels;
  ForwardOptions forward;
};

// Random small soft-spike network with non-integer delays, inputs and labels.
GradcheckProblem make_gradcheck_problem(const GradcheckOptions& options);

double problem_loss(const GradcheckProblem& problem);

// Analytic gradients vs central differences of the loss for every parameter.
GradcheckReport run_gradcheck(const GradcheckOptions& options);

}  // namespace snn
