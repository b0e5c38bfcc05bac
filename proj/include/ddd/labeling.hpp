#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "ddd/errors.hpp"
#include "ddd/events.hpp"
#include "ddd/numeric.hpp"
#include "ddd/signal.hpp"

namespace ddd {

/// Frequency band [lo, hi) in Hz.
struct Band {
  double lo = 0.0;
  double hi = 0.0;
};

inline constexpr Band kThetaBand{4.0, 8.0};
inline constexpr Band kAlphaBand{8.0, 13.0};
inline constexpr Band kBetaBand{13.0, 20.0};

/// One-sided power spectral density estimate.
struct Psd {
  std::vector<double> power;  ///< density at bin k, units x^2/Hz
  double bin_hz = 0.0;        ///< spacing between bins
};

namespace detail {

inline std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n < 2) return w;
  const double pi = std::acos(-1.0);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 * (1.0 - std::cos(2.0 * pi * static_cast<double>(i) /
                                 static_cast<double>(n - 1)));
  return w;
}

}  // namespace detail

/// Averaged-periodogram PSD: one-second Hann segments, half overlap,
/// per-segment mean removal, zero padding to a power of two.
///
/// Throws InsufficientData when the input is shorter than one segment.
inline Psd welch_psd(const std::vector<double>& x, double rate) {
  if (rate <= 0.0) throw ConfigError("sample rate must be positive");
  const std::size_t nper = static_cast<std::size_t>(std::llround(rate));
  if (nper < 2 || x.size() < nper)
    throw InsufficientData("welch_psd: need at least one full segment");
  const std::size_t hop = nper - nper / 2;
  const std::size_t nfft = next_pow2(nper);
  const std::size_t nbins = nfft / 2 + 1;

  const std::vector<double> w = detail::hann_window(nper);
  double wss = 0.0;
  for (double v : w) wss += v * v;

  std::vector<double> acc(nbins, 0.0);
  std::size_t nseg = 0;
  std::vector<std::complex<double>> buf(nfft);
  for (std::size_t s = 0; s + nper <= x.size(); s += hop) {
    double mean = 0.0;
    for (std::size_t i = 0; i < nper; ++i) mean += x[s + i];
    mean /= static_cast<double>(nper);
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
    for (std::size_t i = 0; i < nper; ++i) buf[i] = (x[s + i] - mean) * w[i];
    fft_radix2(buf, false);
    for (std::size_t k = 0; k < nbins; ++k)
      acc[k] += std::norm(buf[k]);
    ++nseg;
  }

  Psd out;
  out.bin_hz = rate / static_cast<double>(nfft);
  out.power.resize(nbins);
  const double scale = 1.0 / (rate * wss * static_cast<double>(nseg));
  for (std::size_t k = 0; k < nbins; ++k) {
    double p = acc[k] * scale;
    if (k != 0 && k != nfft / 2) p *= 2.0;
    out.power[k] = p;
  }
  return out;
}

/// Integrated PSD over [band.lo, band.hi). Requires the band to sit strictly
/// below the Nyquist frequency.
inline double band_power(const std::vector<double>& x, double rate, Band band) {
  if (!(band.lo >= 0.0) || !(band.hi > band.lo) || !(2.0 * band.hi < rate))
    throw BandError("band must satisfy 0 <= lo < hi < rate/2");
  const Psd psd = welch_psd(x, rate);
  double total = 0.0;
  for (std::size_t k = 0; k < psd.power.size(); ++k) {
    const double f = static_cast<double>(k) * psd.bin_hz;
    if (f >= band.lo && f < band.hi) total += psd.power[k] * psd.bin_hz;
  }
  return total;
}

/// Mean theta, alpha, and beta power of one scalp recording window.
struct BandPowers {
  double theta = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
};

inline BandPowers band_powers(const std::vector<double>& x, double rate) {
  BandPowers bp;
  bp.theta = band_power(x, rate, kThetaBand);
  bp.alpha = band_power(x, rate, kAlphaBand);
  bp.beta = band_power(x, rate, kBetaBand);
  return bp;
}

/// (theta + alpha) / beta for one analysis window. A vanishing beta power
/// leaves the ratio undefined (NaN), never an exception.
struct DrowsinessRatio {
  std::size_t window_index = 0;
  double value = std::numeric_limits<double>::quiet_NaN();
  BandPowers powers;

  bool valid() const { return std::isfinite(value); }
};

inline std::vector<std::string> eeg_channel_ids() {
  std::vector<std::string> ids;
  for (int i = 1; i <= 8; ++i) ids.push_back("eeg_" + std::to_string(i));
  return ids;
}

/// Windowed drowsiness ratios for one session frame. Band powers are averaged
/// across every scalp channel present in the frame before the ratio is formed.
/// Window geometry (length, overlap) follows `spec`; the scalp sample rate is
/// taken from the frame itself.
inline std::vector<DrowsinessRatio> ratio_per_window(const SignalFrame& frame,
                                                     const WindowSpec& spec) {
  std::vector<std::string> present;
  for (const auto& id : eeg_channel_ids())
    if (frame.has(id)) present.push_back(id);
  if (present.empty()) throw ChannelNotFound("eeg_1");

  const Channel& first = frame.channel(present.front());
  const double rate = first.rate;
  std::size_t n = first.samples.size();
  for (const auto& id : present) {
    const Channel& c = frame.channel(id);
    if (std::abs(c.rate - rate) > 1e-9 * rate)
      throw DataError("scalp channels disagree on sample rate");
    n = std::min(n, c.samples.size());
  }

  WindowSpec eeg_spec = spec;
  eeg_spec.rate = rate;
  eeg_spec.validate();
  const std::size_t w = static_cast<std::size_t>(eeg_spec.window_samples());
  const std::size_t s = static_cast<std::size_t>(eeg_spec.stride());
  if (n < w) return {};
  const std::size_t count = (n - w) / s + 1;

  std::vector<DrowsinessRatio> out(count);
  std::vector<double> seg(w);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t t0 = i * s;
    BandPowers mean;
    for (const auto& id : present) {
      const auto& samples = frame.channel(id).samples;
      std::copy(samples.begin() + static_cast<std::ptrdiff_t>(t0),
                samples.begin() + static_cast<std::ptrdiff_t>(t0 + w),
                seg.begin());
      const BandPowers bp = band_powers(seg, rate);
      mean.theta += bp.theta;
      mean.alpha += bp.alpha;
      mean.beta += bp.beta;
    }
    const double m = static_cast<double>(present.size());
    mean.theta /= m;
    mean.alpha /= m;
    mean.beta /= m;
    out[i].window_index = i;
    out[i].powers = mean;
    if (mean.beta >= 1e-12)
      out[i].value = (mean.theta + mean.alpha) / mean.beta;
  }
  return out;
}

enum class DriverState { awake, drowsy, unlabeled };

inline std::string to_string(DriverState s) {
  switch (s) {
    case DriverState::awake: return "awake";
    case DriverState::drowsy: return "drowsy";
    case DriverState::unlabeled: return "unlabeled";
  }
  return "?";
}

enum class LabelSource { eeg, event };

struct Label {
  DriverState state = DriverState::unlabeled;
  LabelSource source = LabelSource::eeg;
};

namespace detail {

inline std::size_t ceil_count(double frac, std::size_t n) {
  double v = frac * static_cast<double>(n);
  auto c = static_cast<long long>(std::ceil(v - 1e-9));
  if (c < 0) c = 0;
  if (c > static_cast<long long>(n)) c = static_cast<long long>(n);
  return static_cast<std::size_t>(c);
}

}  // namespace detail

/// Percentile labeling over one ratio population. The lowest `awake_fraction`
/// of the finite ratios becomes awake, the highest `drowsy_fraction` becomes
/// drowsy, everything between (and every invalid ratio) stays unlabeled.
/// Thresholds are realized ratio values, so the rule is invariant under any
/// strictly increasing transform of the ratios. When both thresholds collapse
/// onto the same value no window is labeled at all.
///
/// Throws InsufficientData when fewer than 10 finite ratios are available.
inline std::vector<Label> label_by_eeg(const std::vector<DrowsinessRatio>& ratios,
                                       double awake_fraction = 0.60,
                                       double drowsy_fraction = 0.222) {
  if (!(awake_fraction > 0.0) || !(drowsy_fraction > 0.0) ||
      !(awake_fraction + drowsy_fraction < 1.0))
    throw ConfigError("label fractions must be positive and sum below one");

  std::vector<double> finite;
  finite.reserve(ratios.size());
  for (const auto& r : ratios)
    if (r.valid()) finite.push_back(r.value);
  const std::size_t n = finite.size();
  if (n < 10)
    throw InsufficientData("label_by_eeg: need at least 10 valid ratios");
  std::sort(finite.begin(), finite.end());

  const std::size_t awake_rank = std::max<std::size_t>(
      detail::ceil_count(awake_fraction, n), 1);
  std::size_t drowsy_count = detail::ceil_count(drowsy_fraction, n);
  if (drowsy_count >= n) drowsy_count = n - 1;
  const double awake_cut = finite[awake_rank - 1];
  const double drowsy_cut = finite[n - drowsy_count - 1];

  std::vector<Label> labels(ratios.size());
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    labels[i].source = LabelSource::eeg;
    labels[i].state = DriverState::unlabeled;
    if (!ratios[i].valid()) continue;
    if (awake_cut == drowsy_cut) continue;
    if (ratios[i].value <= awake_cut)
      labels[i].state = DriverState::awake;
    else if (ratios[i].value > drowsy_cut)
      labels[i].state = DriverState::drowsy;
  }
  return labels;
}

/// Event-driven labeling. A window whose sample span [first, last] touches a
/// reaction-task interval is drowsy. A window lying entirely inside the
/// `margin` seconds before such an interval starts, or entirely inside the
/// `margin` seconds after it ends, is awake. Everything else is unlabeled.
inline std::vector<Label> label_by_event(const std::vector<Window>& windows,
                                         const WindowSpec& spec,
                                         const std::vector<EventInterval>& events,
                                         double margin = 5.0) {
  spec.validate();
  if (!(margin >= 0.0)) throw ConfigError("margin must be non-negative");
  const double dt = 1.0 / spec.rate;
  const double span = static_cast<double>(spec.window_samples() - 1) * dt;

  std::vector<Label> labels(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const double t0 = windows[i].start_time();
    const double t1 = t0 + span;
    labels[i].source = LabelSource::event;
    labels[i].state = DriverState::unlabeled;

    bool drowsy = false;
    bool awake = false;
    for (const auto& e : events) {
      if (e.kind != EventKind::drt) continue;
      if (t0 <= e.end && t1 >= e.start) {
        drowsy = true;
        break;
      }
      const bool before = t0 >= e.start - margin && t1 < e.start;
      const bool after = t0 > e.end && t1 <= e.end + margin;
      if (before || after) awake = true;
    }
    if (drowsy)
      labels[i].state = DriverState::drowsy;
    else if (awake)
      labels[i].state = DriverState::awake;
  }
  return labels;
}

}  // namespace ddd
