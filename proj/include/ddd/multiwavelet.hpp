#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "ddd/errors.hpp"
#include "ddd/feature_vector.hpp"

// GHM multiwavelet packet decomposition of a scalar signal. The analysis
// operator is orthogonal, so leaf energies partition the stream energy.

namespace ddd {

using Vec2 = std::array<double, 2>;
using Mat2 = std::array<std::array<double, 2>, 2>;

/// Four 2x2 lowpass and four 2x2 highpass taps of a two-channel matrix
/// filter bank, convention y[n] = sum_k T_k x[2n+k] with periodic indexing.
struct MultiFilterBank {
  std::array<Mat2, 4> lowpass;
  std::array<Mat2, 4> highpass;

  /// Geronimo-Hardin-Massopust coefficients. Exact radical expressions; the
  /// orthogonality conditions sum_k T_k T_{k+2m}^T = delta_m I hold at
  /// machine precision (unit-tested).
  static const MultiFilterBank& ghm() {
    static const MultiFilterBank bank = [] {
      const double s2 = std::sqrt(2.0);
      MultiFilterBank b;
      b.lowpass = {{
          {{{3.0 / (5.0 * s2), 4.0 / 5.0}, {-1.0 / 20.0, -3.0 / (10.0 * s2)}}},
          {{{3.0 / (5.0 * s2), 0.0}, {9.0 / 20.0, 1.0 / s2}}},
          {{{0.0, 0.0}, {9.0 / 20.0, -3.0 / (10.0 * s2)}}},
          {{{0.0, 0.0}, {-1.0 / 20.0, 0.0}}},
      }};
      b.highpass = {{
          {{{-1.0 / 20.0, -3.0 / (10.0 * s2)}, {1.0 / (10.0 * s2), 3.0 / 10.0}}},
          {{{9.0 / 20.0, -1.0 / s2}, {-9.0 / (10.0 * s2), 0.0}}},
          {{{9.0 / 20.0, -3.0 / (10.0 * s2)}, {9.0 / (10.0 * s2), -3.0 / 10.0}}},
          {{{-1.0 / 20.0, 0.0}, {-1.0 / (10.0 * s2), 0.0}}},
      }};
      return b;
    }();
    return bank;
  }
};

using VectorStream = std::vector<Vec2>;

/// Maps consecutive sample pairs (x0, x1) to 2-vectors ((x0+x1)/2, x1/sqrt2).
/// A constant signal lands exactly on the direction (1, 1/sqrt2) that the GHM
/// highpass annihilates, so smooth content stays in the approximation band.
/// Odd trailing samples are truncated. Exactly invertible.
inline VectorStream prefilter(const std::vector<double>& samples) {
  if (samples.empty()) throw EmptyInput("prefilter: empty input");
  const double s2 = std::sqrt(2.0);
  const std::size_t pairs = samples.size() / 2;
  VectorStream v(pairs);
  for (std::size_t n = 0; n < pairs; ++n) {
    const double x0 = samples[2 * n];
    const double x1 = samples[2 * n + 1];
    v[n] = {0.5 * (x0 + x1), x1 / s2};
  }
  return v;
}

/// Inverse of prefilter.
inline std::vector<double> postfilter(const VectorStream& stream) {
  const double s2 = std::sqrt(2.0);
  std::vector<double> x(stream.size() * 2);
  for (std::size_t n = 0; n < stream.size(); ++n) {
    const double x1 = s2 * stream[n][1];
    x[2 * n] = 2.0 * stream[n][0] - x1;
    x[2 * n + 1] = x1;
  }
  return x;
}

namespace detail {

inline Vec2 apply(const Mat2& m, const Vec2& x) {
  return {m[0][0] * x[0] + m[0][1] * x[1], m[1][0] * x[0] + m[1][1] * x[1]};
}

inline Vec2 apply_transposed(const Mat2& m, const Vec2& x) {
  return {m[0][0] * x[0] + m[1][0] * x[1], m[0][1] * x[0] + m[1][1] * x[1]};
}

}  // namespace detail

/// One analysis split with periodic boundary. Stream length must be even.
inline std::pair<VectorStream, VectorStream> analyze_step(const VectorStream& v,
                                                          const MultiFilterBank& bank) {
  const std::size_t m = v.size();
  if (m < 2 || m % 2 != 0) throw Error("analyze_step: stream length must be even and >= 2");
  VectorStream lo(m / 2, Vec2{0.0, 0.0});
  VectorStream hi(m / 2, Vec2{0.0, 0.0});
  for (std::size_t n = 0; n < m / 2; ++n) {
    for (std::size_t k = 0; k < 4; ++k) {
      const Vec2& x = v[(2 * n + k) % m];
      const Vec2 l = detail::apply(bank.lowpass[k], x);
      const Vec2 h = detail::apply(bank.highpass[k], x);
      lo[n][0] += l[0];
      lo[n][1] += l[1];
      hi[n][0] += h[0];
      hi[n][1] += h[1];
    }
  }
  return {std::move(lo), std::move(hi)};
}

/// Adjoint of analyze_step; exact inverse by orthogonality.
inline VectorStream synthesize_step(const VectorStream& lo, const VectorStream& hi,
                                    const MultiFilterBank& bank) {
  if (lo.size() != hi.size()) throw Error("synthesize_step: branch length mismatch");
  const std::size_t m = 2 * lo.size();
  VectorStream v(m, Vec2{0.0, 0.0});
  for (std::size_t n = 0; n < lo.size(); ++n) {
    for (std::size_t k = 0; k < 4; ++k) {
      const std::size_t j = (2 * n + k) % m;
      const Vec2 l = detail::apply_transposed(bank.lowpass[k], lo[n]);
      const Vec2 h = detail::apply_transposed(bank.highpass[k], hi[n]);
      v[j][0] += l[0] + h[0];
      v[j][1] += l[1] + h[1];
    }
  }
  return v;
}

/// Full packet tree of the given depth. Leaves are ordered by natural packet
/// index: node i splits into children 2i (lowpass) and 2i+1 (highpass).
struct PacketTree {
  int depth = 3;
  std::vector<VectorStream> leaves;

  std::size_t total_vectors() const {
    std::size_t n = 0;
    for (const auto& l : leaves) n += l.size();
    return n;
  }
};

/// Critically sampled full packet decomposition. The periodic transform
/// needs the stream length divisible by 2^depth; callers truncate first
/// (the wavelet feature extractor does).
inline PacketTree packet_decompose(const VectorStream& stream, const MultiFilterBank& bank,
                                   int depth = 3) {
  const std::size_t block = static_cast<std::size_t>(1) << depth;
  if (stream.size() < block) throw InsufficientSamples("packet_decompose: stream shorter than 2^depth vectors");
  if (stream.size() % block != 0) {
    throw Error("packet_decompose: stream length must be a multiple of 2^depth");
  }
  std::vector<VectorStream> level = {stream};
  for (int d = 0; d < depth; ++d) {
    std::vector<VectorStream> next;
    next.reserve(level.size() * 2);
    for (const auto& node : level) {
      auto [lo, hi] = analyze_step(node, bank);
      next.push_back(std::move(lo));
      next.push_back(std::move(hi));
    }
    level = std::move(next);
  }
  PacketTree tree;
  tree.depth = depth;
  tree.leaves = std::move(level);
  return tree;
}

/// Inverse packet transform.
inline VectorStream packet_reconstruct(const PacketTree& tree, const MultiFilterBank& bank) {
  std::vector<VectorStream> level = tree.leaves;
  for (int d = 0; d < tree.depth; ++d) {
    std::vector<VectorStream> next;
    next.reserve(level.size() / 2);
    for (std::size_t i = 0; i + 1 < level.size(); i += 2) {
      next.push_back(synthesize_step(level[i], level[i + 1], bank));
    }
    level = std::move(next);
  }
  return level.at(0);
}

inline double stream_energy(const VectorStream& v) {
  double e = 0.0;
  for (const auto& x : v) e += x[0] * x[0] + x[1] * x[1];
  return e;
}

/// Per-leaf energies, named wavelet8_band_0..7 for the depth-3 tree.
inline FeatureVector band_energies(const PacketTree& tree) {
  FeatureVector fv;
  for (std::size_t i = 0; i < tree.leaves.size(); ++i) {
    fv.push("wavelet8_band_" + std::to_string(i), stream_energy(tree.leaves[i]));
  }
  return fv;
}

}  // namespace ddd
