#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "ddd/errors.hpp"
#include "ddd/features.hpp"
#include "ddd/multiwavelet.hpp"

#include "oracles.hpp"

using Catch::Approx;

namespace {

std::vector<double> random_series(std::size_t n, std::mt19937_64& gen,
                                  double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  std::vector<double> x(n);
  for (auto& v : x) v = nd(gen);
  return x;
}

ddd::Window stat_window(const std::vector<double>& theta,
                        const std::vector<double>& theta_dot) {
  ddd::Window w;
  w.base_rate = 60.0;
  w.add("theta", 60.0, theta);
  w.add("theta_dot", 60.0, theta_dot);
  return w;
}

void check_signal_stats(const ddd::FeatureVector& fv, std::size_t offset,
                        const std::string& prefix,
                        const std::vector<double>& x, double rate) {
  const double nn = static_cast<double>(x.size());
  REQUIRE(fv.names[offset + 0] == prefix + "_mean");
  const double mean = oracle::mean(x);
  const double var = oracle::pop_variance(x);
  CHECK(fv.values[offset + 0] == Approx(mean).margin(1e-12));
  CHECK(fv.values[offset + 1] == Approx(std::sqrt(var)).margin(1e-12));
  CHECK(fv.values[offset + 2] == Approx(var).margin(1e-12));
  const double mn = *std::min_element(x.begin(), x.end());
  const double mx = *std::max_element(x.begin(), x.end());
  CHECK(fv.values[offset + 3] == Approx(mx - mn).margin(1e-12));
  double energy = 0.0;
  for (double v : x) energy += v * v;
  CHECK(fv.values[offset + 4] == Approx(std::sqrt(energy / nn)).margin(1e-12));
  CHECK(fv.values[offset + 5] == Approx(energy).epsilon(1e-12));
  const double sd = std::sqrt(var);
  CHECK(fv.values[offset + 6] ==
        Approx(var > 0 ? oracle::central_moment(x, 3) / (sd * sd * sd) : 0.0)
            .margin(1e-9));
  CHECK(fv.values[offset + 7] ==
        Approx(var > 0 ? oracle::central_moment(x, 4) / (var * var) : 0.0)
            .margin(1e-9));
  CHECK(fv.values[offset + 8] == Approx(oracle::quantile_t7(x, 0.25)).margin(1e-12));
  CHECK(fv.values[offset + 9] == Approx(oracle::quantile_t7(x, 0.50)).margin(1e-12));
  CHECK(fv.values[offset + 10] == Approx(oracle::quantile_t7(x, 0.75)).margin(1e-12));
  CHECK(fv.values[offset + 11] ==
        Approx(oracle::quantile_t7(x, 0.75) - oracle::quantile_t7(x, 0.25))
            .margin(1e-12));
  std::vector<double> centered(x);
  for (auto& v : centered) v -= mean;
  CHECK(fv.values[offset + 12] ==
        Approx(oracle::zero_cross_rate(centered)).margin(1e-12));
  CHECK(fv.values[offset + 13] ==
        Approx(oracle::histogram_entropy_bits(x, 16)).margin(1e-12));

  // Spectral block from a naive dft of the mean-removed window.
  const auto X = oracle::naive_dft(centered);
  const std::size_t nbins = x.size() / 2 + 1;
  std::vector<double> psd(nbins);
  for (std::size_t k = 0; k < nbins; ++k) {
    double v = std::norm(X[k]) / (nn * rate);
    const bool nyquist = (x.size() % 2 == 0) && (k == x.size() / 2);
    if (k != 0 && !nyquist) v *= 2.0;
    psd[k] = v;
  }
  double total = 0.0;
  for (double v : psd) total += v;
  double sent = 0.0, centroid = 0.0;
  if (total > 0.0) {
    for (std::size_t k = 0; k < nbins; ++k) {
      const double p = psd[k] / total;
      if (p > 0.0) sent -= p * std::log2(p);
      centroid += static_cast<double>(k) * rate / nn * psd[k];
    }
    centroid /= total;
  }
  CHECK(fv.values[offset + 14] == Approx(sent).margin(1e-9));
  CHECK(fv.values[offset + 15] == Approx(oracle::mean(psd)).margin(1e-12));
  CHECK(fv.values[offset + 16] ==
        Approx(oracle::pop_variance(psd)).margin(1e-12));
  CHECK(fv.values[offset + 17] == Approx(centroid).margin(1e-9));
}

}  // namespace

TEST_CASE("statistical36 matches brute-force formulas") {
  std::mt19937_64 gen(101);
  for (int rep = 0; rep < 10; ++rep) {
    const auto theta = random_series(180, gen, 0.4);
    const auto theta_dot = random_series(180, gen, 2.0);
    const auto fv = ddd::extract_statistical36(stat_window(theta, theta_dot));
    REQUIRE(fv.size() == 36);
    check_signal_stats(fv, 0, "statistical36_theta", theta, 60.0);
    check_signal_stats(fv, 18, "statistical36_theta_dot", theta_dot, 60.0);
  }
}

TEST_CASE("degenerate windows produce finite statistics") {
  const std::vector<double> flat(180, 1.5);
  const auto fv = ddd::extract_statistical36(stat_window(flat, flat));
  for (double v : fv.values) REQUIRE(std::isfinite(v));
  // skewness, kurtosis, entropy all collapse to zero on a constant window
  REQUIRE(fv.values[6] == 0.0);
  REQUIRE(fv.values[7] == 0.0);
  REQUIRE(fv.values[13] == 0.0);
}

TEST_CASE("temporal15 matches direct regression formulas") {
  std::mt19937_64 gen(103);
  ddd::Window w;
  w.base_rate = 10.0;
  std::vector<std::vector<double>> chans;
  for (const char* ch : {"theta_dot", "v_x", "a_x", "a_y", "delta"}) {
    auto x = random_series(100, gen);
    w.add(ch, 10.0, x);
    chans.push_back(std::move(x));
  }
  const auto fv = ddd::extract_temporal15(w);
  REQUIRE(fv.size() == 15);
  for (std::size_t c = 0; c < 5; ++c) {
    const auto& x = chans[c];
    CHECK(fv.values[3 * c + 0] == Approx(oracle::mean(x)).margin(1e-12));
    CHECK(fv.values[3 * c + 1] ==
          Approx(std::sqrt(oracle::pop_variance(x))).margin(1e-12));

    const std::size_t n = x.size();
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
    const double a = sxy / sxx;
    const double b = my - a * mx;
    double rss = 0.0;
    for (std::size_t t = 0; t + 1 < n; ++t) {
      const double r = x[t + 1] - (a * x[t] + b);
      rss += r * r;
    }
    CHECK(fv.values[3 * c + 2] == Approx(std::sqrt(rss / np)).margin(1e-12));
  }
}

TEST_CASE("prediction error vanishes on an exact affine recursion") {
  ddd::Window w;
  w.base_rate = 10.0;
  std::vector<double> x(50);
  x[0] = 0.3;
  for (std::size_t t = 1; t < x.size(); ++t) x[t] = 0.9 * x[t - 1] + 0.05;
  for (const char* ch : {"theta_dot", "v_x", "a_x", "a_y", "delta"})
    w.add(ch, 10.0, x);
  const auto fv = ddd::extract_temporal15(w);
  REQUIRE(fv.values[2] == Approx(0.0).margin(1e-9));
}

TEST_CASE("prediction error is translation invariant") {
  std::mt19937_64 gen(107);
  auto x = random_series(80, gen);
  ddd::Window w1, w2;
  w1.base_rate = w2.base_rate = 10.0;
  auto shifted = x;
  for (auto& v : shifted) v += 123.456;
  for (const char* ch : {"theta_dot", "v_x", "a_x", "a_y", "delta"}) {
    w1.add(ch, 10.0, x);
    w2.add(ch, 10.0, shifted);
  }
  const auto f1 = ddd::extract_temporal15(w1);
  const auto f2 = ddd::extract_temporal15(w2);
  REQUIRE(f1.values[2] == Approx(f2.values[2]).margin(1e-9));
  REQUIRE(f1.values[1] == Approx(f2.values[1]).margin(1e-9));
}

TEST_CASE("temporal15 requires at least three samples") {
  ddd::Window w;
  w.base_rate = 10.0;
  for (const char* ch : {"theta_dot", "v_x", "a_x", "a_y", "delta"})
    w.add(ch, 10.0, std::vector<double>{1.0, 2.0});
  REQUIRE_THROWS_AS(ddd::extract_temporal15(w), ddd::InsufficientSamples);
}

TEST_CASE("per-window wavelet features equal an explicit decomposition") {
  std::mt19937_64 gen(109);
  auto x = random_series(180, gen);
  ddd::Window w;
  w.base_rate = 60.0;
  w.add("theta", 60.0, x);
  const auto fv = ddd::extract_wavelet8(w);
  REQUIRE(fv.size() == 8);

  x.resize(176);  // largest multiple of 16 below 180
  const auto tree =
      ddd::packet_decompose(ddd::prefilter(x), ddd::MultiFilterBank::ghm(), 3);
  double total = 0.0;
  for (std::size_t b = 0; b < 8; ++b) {
    REQUIRE(fv.values[b] ==
            Approx(ddd::stream_energy(tree.leaves[b])).margin(1e-12));
    total += fv.values[b];
  }
  REQUIRE(total == Approx(ddd::stream_energy(ddd::prefilter(x))).epsilon(1e-11));
}

TEST_CASE("wavelet features need sixteen samples") {
  ddd::Window w;
  w.base_rate = 60.0;
  w.add("theta", 60.0, std::vector<double>(15, 1.0));
  REQUIRE_THROWS_AS(ddd::extract_wavelet8(w), ddd::InsufficientSamples);
}

TEST_CASE("session-scope wavelet sums leaf energy over each window's span") {
  std::mt19937_64 gen(113);
  const auto stream = random_series(400, gen);
  ddd::WindowSpec spec;
  spec.length = 3.0;
  spec.overlap = 0.5;
  spec.rate = 25.0;
  const auto rows = ddd::session_wavelet_features(stream, spec);
  const std::size_t w = spec.window_samples();
  const std::size_t s = spec.stride();
  REQUIRE(rows.size() == (stream.size() - w) / s + 1);

  std::vector<double> head(stream.begin(), stream.begin() + 400);
  const auto tree =
      ddd::packet_decompose(ddd::prefilter(head), ddd::MultiFilterBank::ghm(), 3);
  const std::size_t leaf_len = tree.leaves.front().size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t s0 = i * s;
    const std::size_t k0 = std::min(s0 / 16, leaf_len);
    const std::size_t k1 = std::min((s0 + w + 15) / 16, leaf_len);
    for (std::size_t b = 0; b < 8; ++b) {
      double e = 0.0;
      for (std::size_t k = k0; k < k1; ++k)
        e += tree.leaves[b][k][0] * tree.leaves[b][k][0] +
             tree.leaves[b][k][1] * tree.leaves[b][k][1];
      REQUIRE(rows[i].values[b] == Approx(e).margin(1e-12));
    }
  }
}

TEST_CASE("session and window wavelet scopes disagree by design") {
  std::mt19937_64 gen(127);
  const auto stream = random_series(600, gen);
  ddd::WindowSpec spec;
  spec.length = 3.0;
  spec.overlap = 0.5;
  spec.rate = 25.0;
  const auto session_rows = ddd::session_wavelet_features(stream, spec);

  // Same windows, isolated decomposition each.
  const std::size_t w = spec.window_samples();
  const std::size_t s = spec.stride();
  bool any_differ = false;
  for (std::size_t i = 0; i < session_rows.size(); ++i) {
    ddd::Window win;
    win.base_rate = 25.0;
    win.add("theta", 60.0,
            std::vector<double>(stream.begin() + static_cast<std::ptrdiff_t>(i * s),
                                stream.begin() + static_cast<std::ptrdiff_t>(i * s + w)));
    const auto fv = ddd::extract_wavelet8(win);
    for (std::size_t b = 0; b < 8; ++b)
      if (std::abs(fv.values[b] - session_rows[i].values[b]) > 1e-9)
        any_differ = true;
  }
  REQUIRE(any_differ);
}

TEST_CASE("multirate segmentation slices every requested rate consistently") {
  ddd::SignalFrame f;
  f.duration = 30.0;
  std::mt19937_64 gen(131);
  for (const char* ch : {"theta", "theta_dot", "v_x", "a_x", "a_y", "delta"})
    f.add_channel(ch, 60.0, random_series(1800, gen));

  ddd::WindowSpec spec;
  spec.length = 3.0;
  spec.overlap = 0.5;
  spec.rate = 60.0;
  const auto families = std::vector<ddd::FeatureFamily>{
      ddd::FeatureFamily::statistical36, ddd::FeatureFamily::wavelet8,
      ddd::FeatureFamily::temporal15};
  const auto windows =
      ddd::segment_multirate(f, spec, ddd::requests_for(families));
  REQUIRE(!windows.empty());

  const auto vx10 = ddd::resample(f.channel("v_x").samples, 60.0, 10.0);
  for (const auto& w : windows) {
    REQUIRE(w.samples("theta", 60.0).size() == 180);
    const auto& s10 = w.samples("v_x", 10.0);
    REQUIRE(s10.size() == 30);
    const auto s0 = static_cast<std::size_t>(
        std::llround(w.start_time() * 10.0));
    for (std::size_t i = 0; i < s10.size(); ++i)
      REQUIRE(s10[i] == vx10[s0 + i]);
  }

  const auto full = ddd::extract_all(windows[0], families);
  REQUIRE(full.size() == 36 + 8 + 15);
  REQUIRE(full.names[0] == "statistical36_theta_mean");
  REQUIRE(full.names[36] == "wavelet8_band_0");
  REQUIRE(full.names[44] == "temporal15_theta_dot_mean");
}

TEST_CASE("feature csv writes a header row and labels") {
  std::mt19937_64 gen(137);
  const auto theta = random_series(180, gen);
  const auto fv = ddd::extract_statistical36(stat_window(theta, theta));
  std::ostringstream os;
  std::vector<std::string> labels{"awake"};
  ddd::write_feature_csv(os, {fv}, &labels);
  const std::string text = os.str();
  REQUIRE(text.rfind("window_index,statistical36_theta_mean", 0) == 0);
  REQUIRE(text.find(",label\n") != std::string::npos);
  REQUIRE(text.find(",awake\n") != std::string::npos);

  std::vector<std::string> bad{"awake", "drowsy"};
  std::ostringstream os2;
  REQUIRE_THROWS_AS(ddd::write_feature_csv(os2, {fv}, &bad), ddd::ConfigError);
}

TEST_CASE("feature vectors reject non-finite values") {
  ddd::FeatureVector fv;
  REQUIRE_THROWS_AS(fv.push("bad", std::nan("")), ddd::Error);
}
