#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ddd/errors.hpp"

// Core time-series types, downsampling and sliding-window segmentation.

namespace ddd {

inline bool is_known_channel(std::string_view id) {
  static const std::array<std::string_view, 14> kIds = {
      "theta", "theta_dot", "v_x", "a_x", "a_y", "delta",
      "eeg_1", "eeg_2", "eeg_3", "eeg_4", "eeg_5", "eeg_6", "eeg_7", "eeg_8"};
  for (auto k : kIds) {
    if (k == id) return true;
  }
  return false;
}

struct Channel {
  double rate = 0.0;  // Hz
  std::vector<double> samples;
};

/// Synchronized multichannel recording of one driving session.
/// Vehicle dynamics channels run at 60 Hz, EEG channels at 500 Hz.
struct SignalFrame {
  std::map<std::string, Channel> channels;
  double start = 0.0;     // session-relative time of sample 0, seconds
  double duration = 0.0;  // seconds
  std::string session_id;
  std::string subject_id;

  void add_channel(const std::string& id, double rate, std::vector<double> samples) {
    if (!is_known_channel(id)) throw Error("unknown channel id: " + id);
    if (rate <= 0.0) throw Error("channel rate must be positive: " + id);
    if (samples.empty()) throw Error("channel has no samples: " + id);
    channels[id] = Channel{rate, std::move(samples)};
  }

  bool has(const std::string& id) const { return channels.count(id) != 0; }

  const Channel& channel(const std::string& id) const {
    auto it = channels.find(id);
    if (it == channels.end()) throw ChannelNotFound(id);
    return it->second;
  }

  /// Sample counts must agree with rate * duration to within one sample.
  void validate() const {
    for (const auto& [id, ch] : channels) {
      const double expect = ch.rate * duration;
      if (std::fabs(static_cast<double>(ch.samples.size()) - expect) > 1.0 + 1e-6) {
        throw Error("channel " + id + " sample count inconsistent with duration");
      }
    }
  }
};

/// Sliding-window geometry. Stride is rounded to the nearest integer sample
/// with half-sample ties rounding down.
struct WindowSpec {
  double length = 3.0;    // seconds
  double overlap = 0.5;   // fraction in [0,1)
  double rate = 60.0;     // Hz

  std::int64_t window_samples() const { return std::llround(length * rate); }

  std::int64_t stride() const {
    const double raw = static_cast<double>(window_samples()) * (1.0 - overlap);
    auto s = static_cast<std::int64_t>(std::ceil(raw - 0.5));  // ties down
    return s < 1 ? 1 : s;
  }

  void validate() const {
    if (!(length > 0.0) || !(rate > 0.0)) throw ConfigError("window length and rate must be positive");
    if (!(overlap >= 0.0) || !(overlap < 1.0)) throw ConfigError("window overlap must be in [0,1)");
    if (window_samples() < 1) throw ConfigError("window shorter than one sample");
  }
};

struct WindowSlice {
  double rate = 0.0;
  std::vector<double> samples;
};

/// One segmented slice per channel. A window may carry the same channel at
/// several rates (the multirate feature extractors rely on this).
struct Window {
  std::size_t index = 0;
  std::int64_t start_sample = 0;  // in base-rate samples
  double base_rate = 0.0;

  double start_time() const { return static_cast<double>(start_sample) / base_rate; }

  void add(const std::string& channel, double rate, std::vector<double> samples) {
    entries_.push_back({channel, WindowSlice{rate, std::move(samples)}});
  }

  bool has(const std::string& channel, double rate = 0.0) const {
    return find(channel, rate) != nullptr;
  }

  /// Slice lookup; rate 0 matches the first slice of that channel.
  const std::vector<double>& samples(const std::string& channel, double rate = 0.0) const {
    const WindowSlice* s = find(channel, rate);
    if (!s) throw ChannelNotFound(channel);
    return s->samples;
  }

  double slice_rate(const std::string& channel) const {
    const WindowSlice* s = find(channel, 0.0);
    if (!s) throw ChannelNotFound(channel);
    return s->rate;
  }

 private:
  const WindowSlice* find(const std::string& channel, double rate) const {
    for (const auto& [id, slice] : entries_) {
      if (id != channel) continue;
      if (rate == 0.0 || std::fabs(slice.rate - rate) < 1e-9 * std::max(1.0, rate)) return &slice;
    }
    return nullptr;
  }

  std::vector<std::pair<std::string, WindowSlice>> entries_;
};

/// Number of full windows in a signal of n samples: floor((n-W)/S)+1,
/// trailing partial windows are dropped.
inline std::size_t segment_count(std::size_t n, const WindowSpec& spec) {
  const auto w = static_cast<std::size_t>(spec.window_samples());
  if (n < w) return 0;
  return (n - w) / static_cast<std::size_t>(spec.stride()) + 1;
}

/// Slices the requested channels into time-aligned windows. Every channel
/// must already be at spec.rate; resample first otherwise.
inline std::vector<Window> segment(const SignalFrame& frame, const WindowSpec& spec,
                                   const std::vector<std::string>& channels) {
  spec.validate();
  std::size_t n = std::numeric_limits<std::size_t>::max();
  for (const auto& id : channels) {
    const Channel& ch = frame.channel(id);
    if (std::fabs(ch.rate - spec.rate) > 1e-9 * std::max(1.0, spec.rate)) {
      throw Error("channel " + id + " is not at the window rate; resample first");
    }
    n = std::min(n, ch.samples.size());
  }
  if (channels.empty()) n = 0;

  const auto w = static_cast<std::size_t>(spec.window_samples());
  const auto s = static_cast<std::size_t>(spec.stride());
  std::vector<Window> out;
  if (n < w) return out;
  const std::size_t count = (n - w) / s + 1;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Window win;
    win.index = i;
    win.start_sample = static_cast<std::int64_t>(i * s);
    win.base_rate = spec.rate;
    for (const auto& id : channels) {
      const auto& src = frame.channel(id).samples;
      win.add(id, spec.rate, std::vector<double>(src.begin() + static_cast<std::ptrdiff_t>(i * s),
                                                 src.begin() + static_cast<std::ptrdiff_t>(i * s + w)));
    }
    out.push_back(std::move(win));
  }
  return out;
}

namespace detail {

/// Blackman-windowed sinc lowpass, cutoff fc (Hz) at sample rate fs, taps
/// normalized to unit DC gain. Half-width m gives 2m+1 taps.
inline std::vector<double> lowpass_taps(double fc, double fs, std::int64_t m) {
  std::vector<double> h(static_cast<std::size_t>(2 * m + 1));
  const double fn = 2.0 * fc / fs;
  double sum = 0.0;
  for (std::int64_t k = -m; k <= m; ++k) {
    const double u = static_cast<double>(k + m) / static_cast<double>(2 * m);
    const double wnd = 0.42 - 0.5 * std::cos(2.0 * M_PI * u) + 0.08 * std::cos(4.0 * M_PI * u);
    double v;
    if (k == 0) {
      v = fn;
    } else {
      const double x = M_PI * static_cast<double>(k);
      v = std::sin(fn * x) / x;
    }
    h[static_cast<std::size_t>(k + m)] = v * wnd;
    sum += v * wnd;
  }
  for (auto& x : h) x /= sum;
  return h;
}

}  // namespace detail

/// Downsamples by lowpass filtering (anti-alias at the target Nyquist) and
/// linear interpolation at the target instants. Edges are replicated. The
/// first sample is subtracted up front and added back, so constant signals
/// pass through bit-exactly.
inline std::vector<double> resample(const std::vector<double>& x, double from_rate, double to_rate) {
  if (!(from_rate > 0.0) || !(to_rate > 0.0)) throw Error("resample: rates must be positive");
  if (to_rate > from_rate) throw UnsupportedResample("resample: upsampling not supported");
  if (x.empty()) return {};
  if (to_rate == from_rate) return x;

  const auto n = static_cast<std::int64_t>(x.size());
  const auto out_len = static_cast<std::int64_t>(std::llround(static_cast<double>(n) * to_rate / from_rate));
  if (out_len <= 0) return {};

  const double offset = x[0];
  const double ratio = from_rate / to_rate;
  const auto m = static_cast<std::int64_t>(std::ceil(12.0 * ratio));
  const std::vector<double> h = detail::lowpass_taps(0.5 * to_rate, from_rate, m);

  std::vector<double> z(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::int64_t k = -m; k <= m; ++k) {
      std::int64_t j = i + k;
      if (j < 0) j = 0;
      if (j >= n) j = n - 1;
      acc += h[static_cast<std::size_t>(k + m)] * (x[static_cast<std::size_t>(j)] - offset);
    }
    z[static_cast<std::size_t>(i)] = acc;
  }

  std::vector<double> out(static_cast<std::size_t>(out_len));
  for (std::int64_t j = 0; j < out_len; ++j) {
    const double pos = static_cast<double>(j) * ratio;
    auto i0 = static_cast<std::int64_t>(std::floor(pos));
    if (i0 > n - 1) i0 = n - 1;
    const std::int64_t i1 = std::min(i0 + 1, n - 1);
    const double frac = pos - static_cast<double>(i0);
    out[static_cast<std::size_t>(j)] =
        z[static_cast<std::size_t>(i0)] * (1.0 - frac) + z[static_cast<std::size_t>(i1)] * frac + offset;
  }
  return out;
}

}  // namespace ddd
