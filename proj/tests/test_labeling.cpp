#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "ddd/errors.hpp"
#include "ddd/labeling.hpp"
#include "ddd/numeric.hpp"

#include "oracles.hpp"

using Catch::Approx;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<ddd::DrowsinessRatio> as_ratios(const std::vector<double>& v) {
  std::vector<ddd::DrowsinessRatio> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i].window_index = i;
    out[i].value = v[i];
  }
  return out;
}

std::size_t count_state(const std::vector<ddd::Label>& labels,
                        ddd::DriverState s) {
  std::size_t c = 0;
  for (const auto& l : labels) c += l.state == s;
  return c;
}

}  // namespace

TEST_CASE("welch psd matches a naive segment-averaged periodogram") {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> nd;
  const double fs = 100.0;
  std::vector<double> x(512);
  for (auto& v : x) v = nd(gen);

  const ddd::Psd lib = ddd::welch_psd(x, fs);

  const std::size_t nper = 100, hop = 50, nfft = 128;
  std::vector<double> w(nper);
  for (std::size_t i = 0; i < nper; ++i)
    w[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * static_cast<double>(i) /
                                 static_cast<double>(nper - 1)));
  double wss = 0.0;
  for (double v : w) wss += v * v;

  std::vector<double> acc(nfft / 2 + 1, 0.0);
  std::size_t nseg = 0;
  for (std::size_t s = 0; s + nper <= x.size(); s += hop) {
    std::vector<double> seg(x.begin() + s, x.begin() + s + nper);
    const double m = oracle::mean(seg);
    for (std::size_t i = 0; i < nper; ++i) seg[i] = (seg[i] - m) * w[i];
    const auto p = oracle::onesided_density(seg, fs, nfft, wss);
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += p[k];
    ++nseg;
  }
  REQUIRE(lib.bin_hz == Approx(fs / nfft));
  REQUIRE(lib.power.size() == acc.size());
  for (std::size_t k = 0; k < acc.size(); ++k)
    REQUIRE(lib.power[k] ==
            Approx(acc[k] / static_cast<double>(nseg)).margin(1e-9));
}

TEST_CASE("band power concentrates on the tone's band") {
  const double fs = 100.0;
  std::vector<double> x(1000);
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = std::sin(2.0 * M_PI * 10.0 * static_cast<double>(i) / fs);
  const double alpha = ddd::band_power(x, fs, ddd::kAlphaBand);
  const double theta = ddd::band_power(x, fs, ddd::kThetaBand);
  const double beta = ddd::band_power(x, fs, ddd::kBetaBand);
  REQUIRE(alpha == Approx(0.5).epsilon(0.05));
  REQUIRE(theta < 0.05 * alpha);
  REQUIRE(beta < 0.05 * alpha);
}

TEST_CASE("band power validates band and data length") {
  std::vector<double> x(1000, 0.0);
  REQUIRE_THROWS_AS(ddd::band_power(x, 100.0, {13.0, 8.0}), ddd::BandError);
  REQUIRE_THROWS_AS(ddd::band_power(x, 100.0, {-1.0, 8.0}), ddd::BandError);
  REQUIRE_THROWS_AS(ddd::band_power(x, 30.0, {8.0, 15.0}), ddd::BandError);
  REQUIRE_THROWS_AS(ddd::welch_psd(std::vector<double>(10), 100.0),
                    ddd::InsufficientData);
}

TEST_CASE("percentile labels: 1..100 worked example") {
  std::vector<double> v(100);
  for (int i = 0; i < 100; ++i) v[i] = static_cast<double>(i + 1);
  std::mt19937_64 gen(5);
  std::shuffle(v.begin(), v.end(), gen);
  const auto labels = ddd::label_by_eeg(as_ratios(v));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] <= 60.0)
      REQUIRE(labels[i].state == ddd::DriverState::awake);
    else if (v[i] >= 78.0)
      REQUIRE(labels[i].state == ddd::DriverState::drowsy);
    else
      REQUIRE(labels[i].state == ddd::DriverState::unlabeled);
  }
}

TEST_CASE("percentile labels: 10000 distinct ratios split 6000/2220/1780") {
  std::vector<double> v(10000);
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = 0.1 + 0.001 * static_cast<double>(i);
  std::mt19937_64 gen(6);
  std::shuffle(v.begin(), v.end(), gen);
  const auto labels = ddd::label_by_eeg(as_ratios(v));
  REQUIRE(count_state(labels, ddd::DriverState::awake) == 6000);
  REQUIRE(count_state(labels, ddd::DriverState::drowsy) == 2220);
  REQUIRE(count_state(labels, ddd::DriverState::unlabeled) == 1780);
}

TEST_CASE("percentile labels are invariant under monotone transforms") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> ud(0.5, 8.0);
  std::vector<double> v(500);
  for (auto& x : v) x = ud(gen);
  const auto base = ddd::label_by_eeg(as_ratios(v));
  std::vector<double> expd(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) expd[i] = std::exp(v[i]);
  const auto trans = ddd::label_by_eeg(as_ratios(expd));
  for (std::size_t i = 0; i < v.size(); ++i)
    REQUIRE(base[i].state == trans[i].state);
}

TEST_CASE("percentile labels skip NaNs and degenerate populations") {
  std::vector<double> v(40);
  for (std::size_t i = 0; i < 40; ++i) v[i] = static_cast<double>(i);
  v[3] = kNaN;
  v[17] = kNaN;
  const auto labels = ddd::label_by_eeg(as_ratios(v));
  REQUIRE(labels[3].state == ddd::DriverState::unlabeled);
  REQUIRE(labels[17].state == ddd::DriverState::unlabeled);
  REQUIRE(count_state(labels, ddd::DriverState::awake) >= 1);

  // All-equal ratios give identical thresholds: nothing is labeled.
  const auto flat = ddd::label_by_eeg(as_ratios(std::vector<double>(50, 2.0)));
  REQUIRE(count_state(flat, ddd::DriverState::unlabeled) == 50);

  REQUIRE_THROWS_AS(ddd::label_by_eeg(as_ratios(std::vector<double>(9, 1.0))),
                    ddd::InsufficientData);
}

TEST_CASE("event labels agree with the interval oracle") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> td(0.0, 300.0);
  ddd::WindowSpec spec;
  spec.length = 3.0;
  spec.overlap = 0.5;
  spec.rate = 60.0;
  const std::size_t w = spec.window_samples();
  const auto stride = spec.stride();

  for (int rep = 0; rep < 20; ++rep) {
    std::vector<ddd::EventInterval> events;
    std::vector<oracle::Interval> drt;
    for (int e = 0; e < 8; ++e) {
      const double s = td(gen);
      events.push_back({ddd::EventKind::drt, s, s + 1.0});
      drt.push_back({s, s + 1.0});
    }
    // Distractor kinds must not influence labels.
    events.push_back({ddd::EventKind::brake, 10.0, 11.0});
    events.push_back({ddd::EventKind::question, 200.0, 202.0});

    std::vector<ddd::Window> windows;
    for (std::size_t i = 0; i < 100; ++i) {
      ddd::Window win;
      win.index = i;
      win.start_sample = static_cast<std::int64_t>(i) * stride;
      win.base_rate = spec.rate;
      windows.push_back(win);
    }
    const double margin = 5.0;
    const auto labels = ddd::label_by_event(windows, spec, events, margin);
    for (std::size_t i = 0; i < windows.size(); ++i) {
      const double t0 = windows[i].start_time();
      const double t1 =
          t0 + static_cast<double>(w - 1) / spec.rate;
      const int ref = oracle::event_label(t0, t1, drt, margin);
      if (ref == 1)
        REQUIRE(labels[i].state == ddd::DriverState::drowsy);
      else if (ref == 0)
        REQUIRE(labels[i].state == ddd::DriverState::awake);
      else
        REQUIRE(labels[i].state == ddd::DriverState::unlabeled);
      REQUIRE(labels[i].source == ddd::LabelSource::event);
    }
  }
}

TEST_CASE("ratio per window averages the present scalp channels") {
  const double fs = 250.0;
  const std::size_t n = 2500;
  ddd::SignalFrame f;
  f.duration = static_cast<double>(n) / fs;
  ddd::Rng rng(55);
  for (const auto& id : {"eeg_1", "eeg_2"}) {
    std::vector<double> x(n);
    for (auto& v : x) v = rng.gaussian();
    f.add_channel(id, fs, std::move(x));
  }
  ddd::WindowSpec spec;
  spec.length = 3.0;
  spec.overlap = 0.5;
  spec.rate = 60.0;
  const auto ratios = ddd::ratio_per_window(f, spec);
  REQUIRE(!ratios.empty());

  // Recompute window 0 by hand from both channels.
  const std::size_t w = static_cast<std::size_t>(std::llround(3.0 * fs));
  double th = 0.0, al = 0.0, be = 0.0;
  for (const auto& id : {"eeg_1", "eeg_2"}) {
    std::vector<double> seg(f.channel(id).samples.begin(),
                            f.channel(id).samples.begin() +
                                static_cast<std::ptrdiff_t>(w));
    const auto bp = ddd::band_powers(seg, fs);
    th += bp.theta;
    al += bp.alpha;
    be += bp.beta;
  }
  REQUIRE(ratios[0].value == Approx((th + al) / be).epsilon(1e-12));
}

TEST_CASE("ratio per window needs scalp channels at one rate") {
  ddd::SignalFrame f;
  f.duration = 10.0;
  ddd::WindowSpec spec;
  f.add_channel("theta", 60.0, std::vector<double>(600, 0.0));
  REQUIRE_THROWS_AS(ddd::ratio_per_window(f, spec), ddd::ChannelNotFound);
  f.add_channel("eeg_1", 250.0, std::vector<double>(2500, 0.0));
  f.add_channel("eeg_2", 200.0, std::vector<double>(2000, 0.0));
  REQUIRE_THROWS_AS(ddd::ratio_per_window(f, spec), ddd::DataError);
}

TEST_CASE("near-zero beta power yields an invalid ratio") {
  const double fs = 250.0;
  const std::size_t n = 1250;
  ddd::SignalFrame f;
  f.duration = static_cast<double>(n) / fs;
  f.add_channel("eeg_1", fs, std::vector<double>(n, 0.0));
  ddd::WindowSpec spec;
  spec.length = 3.0;
  spec.overlap = 0.5;
  spec.rate = 60.0;
  const auto ratios = ddd::ratio_per_window(f, spec);
  REQUIRE(!ratios.empty());
  REQUIRE_FALSE(ratios[0].valid());
}

TEST_CASE("white noise splits band power in proportion to bandwidth") {
  std::mt19937_64 gen(2026);
  std::normal_distribution<double> dist(0.0, 1.0);
  const double fs = 60.0;
  std::vector<double> x(static_cast<std::size_t>(60.0 * fs));
  for (double& v : x) v = dist(gen);
  const double theta = ddd::band_power(x, fs, ddd::kThetaBand);
  const double alpha = ddd::band_power(x, fs, ddd::kAlphaBand);
  const double ratio = theta / alpha;
  REQUIRE(ratio > 0.8 * 0.85);
  REQUIRE(ratio < 0.8 * 1.15);
}
