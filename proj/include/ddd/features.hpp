#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "ddd/errors.hpp"
#include "ddd/feature_vector.hpp"
#include "ddd/multiwavelet.hpp"
#include "ddd/signal.hpp"

namespace ddd {

namespace detail {

inline double mean_of(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

/// Quantile with linear interpolation between order statistics
/// (index = (n - 1) * p on the sorted sample).
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double idx = (static_cast<double>(n) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(idx);
  const double frac = idx - static_cast<double>(lo);
  if (lo + 1 >= n) return sorted[n - 1];
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline double histogram_entropy_bits(const std::vector<double>& x,
                                     std::size_t bins) {
  const auto [mn_it, mx_it] = std::minmax_element(x.begin(), x.end());
  const double mn = *mn_it, mx = *mx_it;
  if (!(mx > mn)) return 0.0;
  std::vector<std::size_t> count(bins, 0);
  for (double v : x) {
    auto b = static_cast<std::size_t>((v - mn) / (mx - mn) *
                                      static_cast<double>(bins));
    if (b >= bins) b = bins - 1;
    ++count[b];
  }
  double h = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t c : count) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h;
}

/// One-sided periodogram of the mean-removed signal, as a density:
/// P[k] = |X[k]|^2 / (N * fs), doubled away from DC and Nyquist.
inline std::vector<double> periodogram(const std::vector<double>& x,
                                       double rate) {
  const std::size_t n = x.size();
  const double mean = mean_of(x);
  const std::size_t nbins = n / 2 + 1;
  std::vector<double> p(nbins, 0.0);
  const double pi = std::acos(-1.0);
  for (std::size_t k = 0; k < nbins; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      const double ang = -2.0 * pi * static_cast<double>(k) *
                         static_cast<double>(t) / static_cast<double>(n);
      acc += (x[t] - mean) * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    double v = std::norm(acc) / (static_cast<double>(n) * rate);
    const bool nyquist = (n % 2 == 0) && (k == n / 2);
    if (k != 0 && !nyquist) v *= 2.0;
    p[k] = v;
  }
  return p;
}

}  // namespace detail

/// The 18 per-signal summary statistics used by the windowed statistical
/// family: 14 time-domain moments/quantiles plus 4 spectral summaries of the
/// mean-removed periodogram.
inline void append_signal_stats(FeatureVector& out, const std::string& prefix,
                                const std::vector<double>& x, double rate) {
  if (x.empty()) throw InsufficientSamples("signal stats need samples");
  const std::size_t n = x.size();
  const double nn = static_cast<double>(n);

  const double mean = detail::mean_of(x);
  double m2 = 0.0, m3 = 0.0, m4 = 0.0, energy = 0.0;
  for (double v : x) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
    energy += v * v;
  }
  m2 /= nn;
  m3 /= nn;
  m4 /= nn;
  const double sd = std::sqrt(m2);
  const double skew = m2 > 0.0 ? m3 / (sd * sd * sd) : 0.0;
  const double kurt = m2 > 0.0 ? m4 / (m2 * m2) : 0.0;

  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  const double q1 = detail::quantile_sorted(sorted, 0.25);
  const double q2 = detail::quantile_sorted(sorted, 0.50);
  const double q3 = detail::quantile_sorted(sorted, 0.75);

  double zc = 0.0;
  if (n >= 2) {
    std::size_t crossings = 0;
    for (std::size_t i = 0; i + 1 < n; ++i)
      if ((x[i] - mean) * (x[i + 1] - mean) < 0.0) ++crossings;
    zc = static_cast<double>(crossings) / (nn - 1.0);
  }

  out.push(prefix + "_mean", mean);
  out.push(prefix + "_std", sd);
  out.push(prefix + "_variance", m2);
  out.push(prefix + "_range", sorted.back() - sorted.front());
  out.push(prefix + "_rms", std::sqrt(energy / nn));
  out.push(prefix + "_energy", energy);
  out.push(prefix + "_skewness", skew);
  out.push(prefix + "_kurtosis", kurt);
  out.push(prefix + "_q1", q1);
  out.push(prefix + "_median", q2);
  out.push(prefix + "_q3", q3);
  out.push(prefix + "_iqr", q3 - q1);
  out.push(prefix + "_zcr", zc);
  out.push(prefix + "_entropy", detail::histogram_entropy_bits(x, 16));

  const std::vector<double> psd = detail::periodogram(x, rate);
  double total = 0.0;
  for (double v : psd) total += v;
  double sent = 0.0, centroid = 0.0;
  if (total > 0.0) {
    for (std::size_t k = 0; k < psd.size(); ++k) {
      const double p = psd[k] / total;
      if (p > 0.0) sent -= p * std::log2(p);
      centroid += static_cast<double>(k) * rate / nn * psd[k];
    }
    centroid /= total;
  }
  const double pm = detail::mean_of(psd);
  double pv = 0.0;
  for (double v : psd) pv += (v - pm) * (v - pm);
  pv /= static_cast<double>(psd.size());

  out.push(prefix + "_spectral_entropy", sent);
  out.push(prefix + "_psd_mean", pm);
  out.push(prefix + "_psd_variance", pv);
  out.push(prefix + "_spectral_centroid", centroid);
}

enum class FeatureFamily { statistical36, wavelet8, temporal15 };

inline std::string to_string(FeatureFamily f) {
  switch (f) {
    case FeatureFamily::statistical36: return "statistical36";
    case FeatureFamily::wavelet8: return "wavelet8";
    case FeatureFamily::temporal15: return "temporal15";
  }
  return "?";
}

inline FeatureFamily feature_family_from(const std::string& s) {
  if (s == "statistical36") return FeatureFamily::statistical36;
  if (s == "wavelet8") return FeatureFamily::wavelet8;
  if (s == "temporal15") return FeatureFamily::temporal15;
  throw ConfigError("unknown feature family: " + s);
}

/// Channel/rate pair a feature family wants sliced into each window.
struct ChannelRequest {
  std::string channel;
  double rate = 0.0;
};

inline std::vector<ChannelRequest> family_requests(FeatureFamily f) {
  switch (f) {
    case FeatureFamily::statistical36:
      return {{"theta", 60.0}, {"theta_dot", 60.0}};
    case FeatureFamily::wavelet8:
      return {{"theta", 60.0}};
    case FeatureFamily::temporal15:
      return {{"theta_dot", 10.0}, {"v_x", 10.0}, {"a_x", 10.0},
              {"a_y", 10.0},       {"delta", 10.0}};
  }
  return {};
}

inline std::vector<ChannelRequest> requests_for(
    const std::vector<FeatureFamily>& families) {
  std::vector<ChannelRequest> out;
  for (FeatureFamily f : families)
    for (const auto& r : family_requests(f)) {
      bool dup = false;
      for (const auto& have : out)
        if (have.channel == r.channel && std::abs(have.rate - r.rate) < 1e-9)
          dup = true;
      if (!dup) out.push_back(r);
    }
  return out;
}

/// Windows a frame on the base grid of `spec` and attaches one slice per
/// request, resampling source channels downward when the requested rate
/// differs from the recorded one. The window count is the largest for which
/// every requested slice still fits its (possibly resampled) series.
inline std::vector<Window> segment_multirate(
    const SignalFrame& frame, const WindowSpec& spec,
    const std::vector<ChannelRequest>& requests) {
  spec.validate();
  if (requests.empty()) throw ConfigError("no channels requested");

  struct Prepared {
    ChannelRequest req;
    std::vector<double> series;
    std::int64_t window_len = 0;
  };
  std::vector<Prepared> prepared;
  for (const auto& r : requests) {
    const Channel& src = frame.channel(r.channel);
    Prepared p;
    p.req = r;
    if (std::abs(src.rate - r.rate) <= 1e-9 * src.rate)
      p.series = src.samples;
    else
      p.series = resample(src.samples, src.rate, r.rate);
    p.window_len = std::llround(spec.length * r.rate);
    if (p.window_len < 1)
      throw ConfigError("window too short for channel " + r.channel);
    prepared.push_back(std::move(p));
  }

  const std::int64_t stride = spec.stride();
  std::vector<Window> windows;
  for (std::int64_t i = 0;; ++i) {
    const std::int64_t base_start = i * stride;
    const double t0 = static_cast<double>(base_start) / spec.rate;
    bool fits = true;
    for (const auto& p : prepared) {
      const auto s0 = std::llround(t0 * p.req.rate);
      if (s0 + p.window_len > static_cast<std::int64_t>(p.series.size())) {
        fits = false;
        break;
      }
    }
    if (!fits) break;

    Window w;
    w.index = static_cast<std::size_t>(i);
    w.start_sample = base_start;
    w.base_rate = spec.rate;
    for (const auto& p : prepared) {
      const auto s0 = static_cast<std::size_t>(std::llround(t0 * p.req.rate));
      w.add(p.req.channel, p.req.rate,
            std::vector<double>(
                p.series.begin() + static_cast<std::ptrdiff_t>(s0),
                p.series.begin() + static_cast<std::ptrdiff_t>(
                                       s0 + static_cast<std::size_t>(p.window_len))));
    }
    windows.push_back(std::move(w));
  }
  return windows;
}

/// 36 summary statistics of steering angle and steering rate.
inline FeatureVector extract_statistical36(const Window& w) {
  FeatureVector out;
  out.window_index = w.index;
  for (const char* ch : {"theta", "theta_dot"}) {
    const auto& x = w.samples(ch, 60.0);
    append_signal_stats(out, std::string("statistical36_") + ch, x, 60.0);
  }
  return out;
}

/// 8 packet-leaf energies of the prefiltered steering angle. Windows are
/// truncated to a multiple of 16 source samples so the depth-3 packet tree
/// divides evenly.
inline FeatureVector extract_wavelet8(const Window& w,
                                      const MultiFilterBank& bank =
                                          MultiFilterBank::ghm()) {
  std::vector<double> x = w.samples("theta", 60.0);
  const std::size_t usable = (x.size() / 16) * 16;
  if (usable < 16)
    throw InsufficientSamples("wavelet8 needs at least 16 samples");
  x.resize(usable);
  const std::vector<Vec2> pre = prefilter(x);
  const PacketTree tree = packet_decompose(pre, bank, 3);
  FeatureVector out = band_energies(tree);
  out.window_index = w.index;
  return out;
}

/// Packet-leaf energies computed from one whole-stream decomposition rather
/// than per window: the stream is decomposed once and every window then sums
/// leaf energy over the leaf samples its span touches. Leaf sample k covers
/// source samples [16k, 16k+16), so windows share decomposition context
/// across their boundaries, unlike the per-window variant.
inline std::vector<FeatureVector> session_wavelet_features(
    const std::vector<double>& stream, const WindowSpec& spec,
    const MultiFilterBank& bank = MultiFilterBank::ghm()) {
  spec.validate();
  const std::size_t usable = (stream.size() / 16) * 16;
  if (usable < 16)
    throw InsufficientSamples("whole-stream wavelet needs at least 16 samples");
  std::vector<double> head(stream.begin(),
                           stream.begin() + static_cast<std::ptrdiff_t>(usable));
  const PacketTree tree = packet_decompose(prefilter(head), bank, 3);
  const std::size_t leaf_len = tree.leaves.front().size();

  const auto w = static_cast<std::size_t>(spec.window_samples());
  const auto s = static_cast<std::size_t>(spec.stride());
  std::vector<FeatureVector> out;
  if (stream.size() < w) return out;
  const std::size_t count = (stream.size() - w) / s + 1;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t s0 = i * s;
    const std::size_t k0 = std::min(s0 / 16, leaf_len);
    const std::size_t k1 = std::min((s0 + w + 15) / 16, leaf_len);
    FeatureVector fv;
    fv.window_index = i;
    for (std::size_t b = 0; b < tree.leaves.size(); ++b) {
      double e = 0.0;
      for (std::size_t k = k0; k < k1; ++k) {
        const Vec2& v = tree.leaves[b][k];
        e += v[0] * v[0] + v[1] * v[1];
      }
      fv.push("wavelet8_band_" + std::to_string(b), e);
    }
    out.push_back(std::move(fv));
  }
  return out;
}

/// Mean, spread, and one-step-ahead predictability of five slow dynamics
/// channels. The predictability feature is the RMS residual of an affine
/// one-lag autoregression fitted to the window itself.
inline FeatureVector extract_temporal15(const Window& w) {
  FeatureVector out;
  out.window_index = w.index;
  for (const char* ch : {"theta_dot", "v_x", "a_x", "a_y", "delta"}) {
    const auto& x = w.samples(ch, 10.0);
    const std::size_t n = x.size();
    if (n < 3)
      throw InsufficientSamples("temporal15 needs at least 3 samples");

    const double mean = detail::mean_of(x);
    double m2 = 0.0;
    for (double v : x) m2 += (v - mean) * (v - mean);
    m2 /= static_cast<double>(n);

    double sx = 0.0, sy = 0.0;
    for (std::size_t t = 0; t + 1 < n; ++t) {
      sx += x[t];
      sy += x[t + 1];
    }
    const double np = static_cast<double>(n - 1);
    const double mx = sx / np, my = sy / np;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t t = 0; t + 1 < n; ++t) {
      sxx += (x[t] - mx) * (x[t] - mx);
      sxy += (x[t] - mx) * (x[t + 1] - my);
    }
    const double a = sxx > 0.0 ? sxy / sxx : 0.0;
    const double b = my - a * mx;
    double rss = 0.0;
    for (std::size_t t = 0; t + 1 < n; ++t) {
      const double r = x[t + 1] - (a * x[t] + b);
      rss += r * r;
    }
    const std::string prefix = std::string("temporal15_") + ch;
    out.push(prefix + "_mean", mean);
    out.push(prefix + "_std", std::sqrt(m2));
    out.push(prefix + "_pred_err_rms", std::sqrt(rss / np));
  }
  return out;
}

inline FeatureVector extract_family(FeatureFamily f, const Window& w) {
  switch (f) {
    case FeatureFamily::statistical36: return extract_statistical36(w);
    case FeatureFamily::wavelet8: return extract_wavelet8(w);
    case FeatureFamily::temporal15: return extract_temporal15(w);
  }
  throw ConfigError("unknown feature family");
}

/// Concatenates the requested families in the given order. Family prefixes
/// keep names collision-free, so the result is a plain concatenation.
inline FeatureVector extract_all(const Window& w,
                                 const std::vector<FeatureFamily>& families) {
  FeatureVector out;
  out.window_index = w.index;
  for (FeatureFamily f : families) out.append(extract_family(f, w));
  return out;
}

/// CSV dump of a feature matrix: window_index column, one column per feature,
/// optional trailing label column. Values use max-precision round-trip format.
inline void write_feature_csv(std::ostream& os,
                              const std::vector<FeatureVector>& rows,
                              const std::vector<std::string>* labels = nullptr) {
  if (rows.empty()) return;
  if (labels && labels->size() != rows.size())
    throw ConfigError("label column size mismatch");
  os << "window_index";
  for (const auto& n : rows.front().names) os << ',' << n;
  if (labels) os << ",label";
  os << '\n';
  char buf[64];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.names != rows.front().names)
      throw ConfigError("inconsistent feature rows");
    os << r.window_index;
    for (double v : r.values) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << ',' << buf;
    }
    if (labels) os << ',' << (*labels)[i];
    os << '\n';
  }
}

}  // namespace ddd
