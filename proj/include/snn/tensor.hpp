#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

namespace snn {

// Dense row-major matrix of doubles. Used for weight matrices (pre x post)
// and for time traces (steps x neurons).
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double value = 0.0)
      : rows(r), cols(c), data(r * c, value) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool empty() const { return data.empty(); }
  std::size_t size() const { return data.size(); }
  void fill(double value) { std::fill(data.begin(), data.end(), value); }

  bool operator==(const Matrix&) const = default;
};

// Batched network input, shape (batch, steps, channels). Values are
// real-valued input currents (binned spike counts or features).
struct SpikeTensor {
  std::size_t batch = 0;
  std::size_t steps = 0;
  std::size_t channels = 0;
  std::vector<double> values;

  SpikeTensor() = default;
  SpikeTensor(std::size_t b, std::size_t t, std::size_t c)
      : batch(b), steps(t), channels(c), values(b * t * c, 0.0) {}

  std::span<double> at(std::size_t b, std::size_t t) {
    return {values.data() + (b * steps + t) * channels, channels};
  }
  std::span<const double> at(std::size_t b, std::size_t t) const {
    return {values.data() + (b * steps + t) * channels, channels};
  }
  // Whole (steps x channels) slab of one batch element.
  std::span<const double> sample(std::size_t b) const {
    return {values.data() + b * steps * channels, steps * channels};
  }
};

}  // namespace snn
