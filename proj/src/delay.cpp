#include "snn/delay.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace snn {

DelayTap split_delay(double d, int d_max) {
  if (!(d >= 0.0 && d <= static_cast<double>(d_max))) {
    throw std::out_of_range("delay " + std::to_string(d) + " outside [0, " +
                            std::to_string(d_max) + "]");
  }
  int whole = static_cast<int>(std::floor(d));
  if (whole >= d_max) whole = std::max(d_max - 1, 0);
  return {whole, d - static_cast<double>(whole)};
}

std::vector<DelayTap> make_taps(const DelayMatrix& delays) {
  std::vector<DelayTap> taps(delays.d.size());
  for (std::size_t k = 0; k < taps.size(); ++k) taps[k] = split_delay(delays.d[k], delays.d_max);
  return taps;
}

DelayLine::DelayLine(std::size_t channels, int d_max)
    : channels_(channels),
      d_max_(d_max),
      depth_(d_max + 1),
      buffer_(static_cast<std::size_t>(d_max + 1) * channels, 0.0),
      last_active_(channels, -(1L << 40)) {
  if (d_max < 0) throw std::invalid_argument("DelayLine: d_max must be >= 0");
}

void DelayLine::push(std::span<const double> values) {
  if (values.size() != channels_) {
    throw std::invalid_argument("DelayLine::push: expected " + std::to_string(channels_) +
                                " channels, got " + std::to_string(values.size()));
  }
  head_ = (head_ + 1) % depth_;
  auto* slot = buffer_.data() + static_cast<std::size_t>(head_) * channels_;
  for (std::size_t j = 0; j < channels_; ++j) {
    slot[j] = values[j];
    if (values[j] != 0.0) last_active_[j] = pushed_;
  }
  ++pushed_;
}

void DelayLine::reset() {
  std::fill(buffer_.begin(), buffer_.end(), 0.0);
  std::fill(last_active_.begin(), last_active_.end(), -(1L << 40));
  head_ = -1;
  pushed_ = 0;
}

namespace {

void check_shapes(const DelayLine& line, const DelayMatrix& delays) {
  if (line.channels() != delays.pre) {
    throw std::invalid_argument("delay line has " + std::to_string(line.channels()) +
                                " channels but delay matrix expects " +
                                std::to_string(delays.pre));
  }
  if (delays.d_max > line.d_max()) {
    throw std::invalid_argument("delay matrix d_max exceeds delay line depth");
  }
}

}  // namespace

std::vector<double> delayed_activation(const DelayLine& line, const DelayMatrix& delays) {
  check_shapes(line, delays);
  std::vector<double> out(delays.d.size());
  for (std::size_t j = 0; j < delays.pre; ++j) {
    for (std::size_t i = 0; i < delays.post; ++i) {
      const auto tap = split_delay(delays(j, i), delays.d_max);
      double v = (1.0 - tap.frac) * line.at(j, tap.whole);
      if (tap.frac != 0.0) v += tap.frac * line.at(j, tap.whole + 1);
      out[j * delays.post + i] = v;
    }
  }
  return out;
}

std::vector<double> delay_gradient_local(const DelayLine& line, const DelayMatrix& delays) {
  check_shapes(line, delays);
  std::vector<double> out(delays.d.size());
  for (std::size_t j = 0; j < delays.pre; ++j) {
    for (std::size_t i = 0; i < delays.post; ++i) {
      const auto tap = split_delay(delays(j, i), delays.d_max);
      if (delays.d_max == 0) {
        out[j * delays.post + i] = 0.0;
        continue;
      }
      out[j * delays.post + i] = line.at(j, tap.whole + 1) - line.at(j, tap.whole);
    }
  }
  return out;
}

void clamp_in_place(DelayMatrix& delays) {
  const double hi = static_cast<double>(delays.d_max);
  for (auto& x : delays.d) x = std::clamp(x, 0.0, hi);
}

DelayMatrix clamp_delays(DelayMatrix delays) {
  clamp_in_place(delays);
  return delays;
}

void round_in_place(DelayMatrix& delays) {
  for (auto& x : delays.d) x = std::round(x);
  clamp_in_place(delays);
}

}  // namespace snn
