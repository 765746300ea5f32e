#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace snn {

inline constexpr int kDefaultMaxDelay = 25;

// Per-synapse real-valued delays in time steps, indexed (pre j, post i).
struct DelayMatrix {
  std::size_t pre = 0;
  std::size_t post = 0;
  int d_max = kDefaultMaxDelay;
  std::vector<double> d;

  DelayMatrix() = default;
  DelayMatrix(std::size_t pre_n, std::size_t post_n, int max_delay = kDefaultMaxDelay,
              double value = 0.0)
      : pre(pre_n), post(post_n), d_max(max_delay), d(pre_n * post_n, value) {}

  double& operator()(std::size_t j, std::size_t i) { return d[j * post + i]; }
  double operator()(std::size_t j, std::size_t i) const { return d[j * post + i]; }
  bool operator==(const DelayMatrix&) const = default;
};

// Integer/fractional split of a delay: the delayed signal is
//   (1 - frac) * s[t - whole] + frac * s[t - whole - 1].
// `whole` is capped at d_max - 1 so d == d_max becomes (d_max - 1, 1.0),
// which reads the same sample and keeps both taps inside the line.
struct DelayTap {
  int whole = 0;
  double frac = 0.0;
};

DelayTap split_delay(double d, int d_max);

// Taps for a whole matrix, validated against [0, d_max].
std::vector<DelayTap> make_taps(const DelayMatrix& delays);

// Ring buffer holding the last d_max + 1 presynaptic vectors. at(j, k)
// returns s_j[t - k] for the most recently pushed t, zero before the stream
// started.
class DelayLine {
 public:
  DelayLine(std::size_t channels, int d_max);

  void push(std::span<const double> values);
  void reset();

  double at(std::size_t channel, int lag) const {
    if (lag >= pushed_) return 0.0;
    int slot = head_ - lag;
    if (slot < 0) slot += depth_;
    return buffer_[static_cast<std::size_t>(slot) * channels_ + channel];
  }

  // True when every value the line can still serve for `channel` is zero.
  bool quiet(std::size_t channel) const {
    return pushed_ - 1 - last_active_[channel] > d_max_;
  }

  std::size_t channels() const { return channels_; }
  int d_max() const { return d_max_; }
  int depth() const { return depth_; }
  // Index of the most recently pushed step, -1 before the first push.
  long time() const { return pushed_ - 1; }

 private:
  std::size_t channels_;
  int d_max_;
  int depth_;
  int head_ = -1;
  long pushed_ = 0;
  std::vector<double> buffer_;
  std::vector<long> last_active_;
};

// a_ji[t] for every synapse at the line's current time, row-major (j, i).
// Throws std::out_of_range when a delay lies outside [0, d_max] or
// std::invalid_argument when the line and matrix disagree on shape.
std::vector<double> delayed_activation(const DelayLine& line, const DelayMatrix& delays);

// d a_ji[t] / d d_ji = s_j[t - k - 1] - s_j[t - k], the exact derivative of
// the interpolated signal on the segment containing d_ji.
std::vector<double> delay_gradient_local(const DelayLine& line, const DelayMatrix& delays);

void clamp_in_place(DelayMatrix& delays);
DelayMatrix clamp_delays(DelayMatrix delays);

// Snap every delay to the nearest integer step (inference-time option).
void round_in_place(DelayMatrix& delays);

}  // namespace snn
