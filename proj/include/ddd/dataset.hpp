#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "ddd/errors.hpp"
#include "ddd/events.hpp"
#include "ddd/numeric.hpp"
#include "ddd/signal.hpp"

namespace ddd {

/// Pointers to the three files making up one recorded session. Paths are
/// relative to the manifest's own directory. The scalp and event files are
/// optional; an empty path means the session has none.
struct SessionManifest {
  std::string subject_id;
  std::string session_id;
  std::string dynamics;
  std::string eeg;
  std::string events;
};

inline SessionManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError("manifest parse error: " + std::string(e.what()));
  }
  SessionManifest m;
  try {
    m.subject_id = j.at("subject_id").get<std::string>();
    m.session_id = j.at("session_id").get<std::string>();
    m.dynamics = j.at("dynamics").get<std::string>();
    m.eeg = j.value("eeg", std::string());
    m.events = j.value("events", std::string());
  } catch (const std::exception& e) {
    throw DataError("manifest field error: " + std::string(e.what()));
  }
  return m;
}

inline void write_manifest(const std::filesystem::path& path,
                           const SessionManifest& m) {
  nlohmann::json j;
  j["subject_id"] = m.subject_id;
  j["session_id"] = m.session_id;
  j["dynamics"] = m.dynamics;
  j["eeg"] = m.eeg;
  j["events"] = m.events;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest: " + path.string());
  out << j.dump(2) << '\n';
}

/// One recoverable oddity met while reading a data file, keyed by the
/// 1-based line number it was found on.
struct RowDiagnostic {
  std::string file;
  std::size_t line = 0;
  std::string message;
};

struct LoadResult {
  std::vector<SignalFrame> frames;
  std::vector<EventInterval> events;
  std::vector<RowDiagnostic> diagnostics;
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  const char* p = s.c_str();
  char* end = nullptr;
  out = std::strtod(p, &end);
  return end != p && *end == '\0';
}

/// Gapless stretch of one file after grid snapping and short-gap fill.
struct RawSegment {
  double t0 = 0.0;
  std::vector<std::vector<double>> cols;
};

struct ParsedFile {
  double rate = 0.0;
  std::vector<RawSegment> segments;
};

/// Reads a numeric CSV with a fixed header, drops unusable rows, snaps
/// timestamps onto the inferred nominal grid, linearly fills gaps shorter
/// than `gap_split`, and splits into segments at longer ones.
inline ParsedFile read_signal_csv(const std::filesystem::path& path,
                                  const std::vector<std::string>& header,
                                  std::vector<RowDiagnostic>& diags,
                                  double gap_split = 0.5) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path.string());
  const std::string fname = path.filename().string();

  std::string line;
  if (!std::getline(in, line)) throw SchemaError(header.front());
  {
    const auto cols = split_csv(line);
    for (std::size_t i = 0; i < header.size(); ++i)
      if (i >= cols.size() || cols[i] != header[i]) throw SchemaError(header[i]);
    if (cols.size() != header.size()) throw SchemaError("extra column");
  }

  std::vector<double> times;
  std::vector<std::vector<double>> values(header.size() - 1);
  std::vector<std::size_t> lines_kept;
  std::size_t lineno = 1;
  double prev_t = -std::numeric_limits<double>::infinity();
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cols = split_csv(line);
    if (cols.size() != header.size()) {
      diags.push_back({fname, lineno, "dropped: wrong field count"});
      continue;
    }
    std::vector<double> row(cols.size());
    bool ok = true;
    for (std::size_t i = 0; i < cols.size(); ++i)
      if (!parse_double(cols[i], row[i]) || !std::isfinite(row[i])) {
        ok = false;
        break;
      }
    if (!ok) {
      diags.push_back({fname, lineno, "dropped: non-numeric or non-finite value"});
      continue;
    }
    if (row[0] <= prev_t) throw TimestampError(lineno, "timestamps not increasing");
    prev_t = row[0];
    times.push_back(row[0]);
    for (std::size_t i = 1; i < row.size(); ++i) values[i - 1].push_back(row[i]);
    lines_kept.push_back(lineno);
  }
  if (times.size() < 2) throw DataError("too few usable rows in " + fname);

  std::vector<double> dts(times.size() - 1);
  for (std::size_t i = 0; i + 1 < times.size(); ++i) dts[i] = times[i + 1] - times[i];
  std::nth_element(dts.begin(), dts.begin() + dts.size() / 2, dts.end());
  const double median_dt = dts[dts.size() / 2];
  if (!(median_dt > 0.0)) throw DataError("degenerate timestamps in " + fname);
  double rate = 1.0 / median_dt;
  if (std::abs(rate - std::round(rate)) < 1e-6 * rate) rate = std::round(rate);

  ParsedFile out;
  out.rate = rate;
  RawSegment seg;
  seg.t0 = times[0];
  seg.cols.resize(values.size());
  for (auto& c : seg.cols) c.reserve(times.size());
  for (std::size_t i = 0; i < values.size(); ++i) seg.cols[i].push_back(values[i][0]);
  std::int64_t prev_k = 0;

  for (std::size_t r = 1; r < times.size(); ++r) {
    const std::int64_t k = std::llround((times[r] - seg.t0) * rate);
    const double grid_t = seg.t0 + static_cast<double>(k) / rate;
    if (k > prev_k && std::abs(times[r] - grid_t) > 0.3 / rate)
      throw TimestampError(lines_kept[r], "timestamp off the nominal grid");
    if (k <= prev_k)
      throw TimestampError(lines_kept[r], "timestamp collides on the nominal grid");

    const double gap = static_cast<double>(k - prev_k) / rate;
    if (gap >= gap_split) {
      out.segments.push_back(std::move(seg));
      seg = RawSegment{};
      seg.t0 = times[r];
      seg.cols.resize(values.size());
      for (std::size_t i = 0; i < values.size(); ++i)
        seg.cols[i].push_back(values[i][r]);
      prev_k = 0;
      diags.push_back({fname, lines_kept[r],
                       "frame split: gap of " + std::to_string(gap) + " s"});
      continue;
    }
    if (k > prev_k + 1) {
      for (std::int64_t m = prev_k + 1; m < k; ++m) {
        const double f = static_cast<double>(m - prev_k) /
                         static_cast<double>(k - prev_k);
        for (std::size_t i = 0; i < values.size(); ++i) {
          const double a = values[i][r - 1], b = values[i][r];
          seg.cols[i].push_back(a + f * (b - a));
        }
      }
      diags.push_back({fname, lines_kept[r],
                       "gap of " + std::to_string(gap) + " s interpolated"});
    }
    for (std::size_t i = 0; i < values.size(); ++i)
      seg.cols[i].push_back(values[i][r]);
    prev_k = k;
  }
  out.segments.push_back(std::move(seg));
  return out;
}

inline double segment_end(const RawSegment& s, double rate) {
  return s.t0 + static_cast<double>(s.cols.front().size()) / rate;
}

}  // namespace detail

inline const std::vector<std::string>& dynamics_header() {
  static const std::vector<std::string> h = {"t",   "theta", "theta_dot", "v_x",
                                             "a_x", "a_y",   "delta"};
  return h;
}

inline const std::vector<std::string>& eeg_header() {
  static const std::vector<std::string> h = {"t",     "eeg_1", "eeg_2",
                                             "eeg_3", "eeg_4", "eeg_5",
                                             "eeg_6", "eeg_7", "eeg_8"};
  return h;
}

inline std::vector<EventInterval> read_events_csv(
    const std::filesystem::path& path, std::vector<RowDiagnostic>& diags) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path.string());
  const std::string fname = path.filename().string();
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("kind");
  {
    const auto cols = detail::split_csv(line);
    if (cols.size() != 3 || cols[0] != "kind") throw SchemaError("kind");
    if (cols[1] != "start") throw SchemaError("start");
    if (cols[2] != "end") throw SchemaError("end");
  }
  std::vector<EventInterval> events;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cols = detail::split_csv(line);
    if (cols.size() != 3) {
      diags.push_back({fname, lineno, "dropped: wrong field count"});
      continue;
    }
    EventInterval e;
    double s, t;
    if (!detail::parse_double(cols[1], s) || !detail::parse_double(cols[2], t) ||
        !std::isfinite(s) || !std::isfinite(t) || t < s) {
      diags.push_back({fname, lineno, "dropped: bad event bounds"});
      continue;
    }
    try {
      e.kind = event_kind_from(cols[0]);
    } catch (const SchemaError&) {
      diags.push_back({fname, lineno, "dropped: unknown event kind"});
      continue;
    }
    e.start = s;
    e.end = t;
    events.push_back(e);
  }

  std::sort(events.begin(), events.end(), [](const auto& a, const auto& b) {
    if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
    return a.start < b.start;
  });
  std::vector<EventInterval> merged;
  for (const auto& e : events) {
    if (!merged.empty() && merged.back().kind == e.kind &&
        e.start <= merged.back().end)
      merged.back().end = std::max(merged.back().end, e.end);
    else
      merged.push_back(e);
  }
  std::sort(merged.begin(), merged.end(),
            [](const auto& a, const auto& b) { return a.start < b.start; });
  return merged;
}

/// Loads one session. Each data file is segmented at gaps of half a second or
/// more; when both vehicle and scalp files are present a frame is emitted for
/// every overlap of a vehicle segment with a scalp segment, cropped to the
/// common time span. Unusable rows are dropped and reported in diagnostics.
inline LoadResult load_session(const std::filesystem::path& manifest_path) {
  const SessionManifest m = read_manifest(manifest_path);
  const std::filesystem::path dir = manifest_path.parent_path();
  LoadResult out;

  const bool have_dyn = !m.dynamics.empty();
  const bool have_eeg = !m.eeg.empty();
  if (!have_dyn && !have_eeg)
    throw DataError("manifest lists no signal files");

  detail::ParsedFile dyn, eeg;
  if (have_dyn)
    dyn = detail::read_signal_csv(dir / m.dynamics, dynamics_header(),
                                  out.diagnostics);
  if (have_eeg)
    eeg = detail::read_signal_csv(dir / m.eeg, eeg_header(), out.diagnostics);
  if (!m.events.empty())
    out.events = read_events_csv(dir / m.events, out.diagnostics);

  auto make_frame = [&](double lo, double hi) {
    SignalFrame f;
    f.subject_id = m.subject_id;
    f.session_id = m.session_id;
    f.start = lo;
    f.duration = hi - lo;
    return f;
  };
  auto crop_into = [](SignalFrame& f, const detail::ParsedFile& pf,
                      const detail::RawSegment& seg,
                      const std::vector<std::string>& header, double lo,
                      double hi) {
    const auto i0 = static_cast<std::size_t>(std::llround((lo - seg.t0) * pf.rate));
    auto count = static_cast<std::size_t>(
        std::floor((hi - lo) * pf.rate + 1e-9));
    count = std::min(count, seg.cols.front().size() - i0);
    for (std::size_t c = 0; c < seg.cols.size(); ++c) {
      std::vector<double> slice(seg.cols[c].begin() + static_cast<std::ptrdiff_t>(i0),
                                seg.cols[c].begin() +
                                    static_cast<std::ptrdiff_t>(i0 + count));
      f.add_channel(header[c + 1], pf.rate, std::move(slice));
    }
  };

  if (have_dyn && have_eeg) {
    for (const auto& ds : dyn.segments) {
      for (const auto& es : eeg.segments) {
        const double lo = std::max(ds.t0, es.t0);
        const double hi = std::min(detail::segment_end(ds, dyn.rate),
                                   detail::segment_end(es, eeg.rate));
        if (hi - lo < 1.0) continue;
        SignalFrame f = make_frame(lo, hi);
        crop_into(f, dyn, ds, dynamics_header(), lo, hi);
        crop_into(f, eeg, es, eeg_header(), lo, hi);
        f.validate();
        out.frames.push_back(std::move(f));
      }
    }
  } else {
    const detail::ParsedFile& pf = have_dyn ? dyn : eeg;
    const auto& header = have_dyn ? dynamics_header() : eeg_header();
    for (const auto& seg : pf.segments) {
      const double lo = seg.t0;
      const double hi = detail::segment_end(seg, pf.rate);
      if (hi - lo < 1.0) continue;
      SignalFrame f = make_frame(lo, hi);
      crop_into(f, pf, seg, header, lo, hi);
      f.validate();
      out.frames.push_back(std::move(f));
    }
  }
  if (out.frames.empty()) throw DataError("session yielded no usable frames");
  std::sort(out.frames.begin(), out.frames.end(),
            [](const auto& a, const auto& b) { return a.start < b.start; });
  return out;
}

/// One generated or loaded session ready for the pipeline.
struct Session {
  SignalFrame frame;
  std::vector<EventInterval> events;
};

namespace detail {

inline void write_signal_csv(const std::filesystem::path& path,
                             const std::vector<std::string>& header,
                             const SignalFrame& frame) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write: " + path.string());
  out << header[0];
  for (std::size_t i = 1; i < header.size(); ++i) out << ',' << header[i];
  out << '\n';
  std::vector<const Channel*> chans;
  for (std::size_t i = 1; i < header.size(); ++i)
    chans.push_back(&frame.channel(header[i]));
  const double rate = chans.front()->rate;
  std::size_t n = chans.front()->samples.size();
  for (const auto* c : chans) {
    if (std::abs(c->rate - rate) > 1e-9)
      throw DataError("channels in one file must share a rate");
    n = std::min(n, c->samples.size());
  }
  char buf[64];
  for (std::size_t i = 0; i < n; ++i) {
    const double t = frame.start + static_cast<double>(i) / rate;
    std::snprintf(buf, sizeof buf, "%.17g", t);
    out << buf;
    for (const auto* c : chans) {
      std::snprintf(buf, sizeof buf, "%.17g", c->samples[i]);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace detail

/// Writes dynamics.csv, eeg.csv, events.csv, and manifest.json into `dir`.
/// Values round-trip bit exactly through the max-precision format.
inline SessionManifest write_session(const std::filesystem::path& dir,
                                     const Session& s) {
  std::filesystem::create_directories(dir);
  SessionManifest m;
  m.subject_id = s.frame.subject_id;
  m.session_id = s.frame.session_id;

  bool any_dyn = false, any_eeg = false;
  for (const auto& [id, ch] : s.frame.channels)
    (id.rfind("eeg_", 0) == 0 ? any_eeg : any_dyn) = true;
  if (any_dyn) {
    m.dynamics = "dynamics.csv";
    detail::write_signal_csv(dir / m.dynamics, dynamics_header(), s.frame);
  }
  if (any_eeg) {
    m.eeg = "eeg.csv";
    detail::write_signal_csv(dir / m.eeg, eeg_header(), s.frame);
  }
  m.events = "events.csv";
  {
    std::ofstream out(dir / m.events);
    if (!out) throw DataError("cannot write events file");
    out << "kind,start,end\n";
    char buf[64];
    for (const auto& e : s.events) {
      out << to_string(e.kind);
      std::snprintf(buf, sizeof buf, "%.17g", e.start);
      out << ',' << buf;
      std::snprintf(buf, sizeof buf, "%.17g", e.end);
      out << ',' << buf << '\n';
    }
  }
  write_manifest(dir / "manifest.json", m);
  return m;
}

/// Time interval a synthetic driver spends drowsy.
struct Episode {
  double start = 0.0;
  double end = 0.0;
};

/// Knobs of the synthetic session generator. `separable` gives drowsy
/// episodes a strong vehicle-dynamics signature; `noisy` keeps the dynamics
/// statistically identical in and out of episodes so only the scalp channels
/// carry the state.
struct SynthProfile {
  std::string name = "separable";
  double duration = 600.0;
  double dynamics_rate = 60.0;
  double eeg_rate = 500.0;
  double episode_mean = 45.0;
  double gap_mean = 90.0;
  double ratio_factor = 3.0;
  double dynamics_gain = 3.0;
  double drt_period = 8.0;

  static SynthProfile separable() { return SynthProfile{}; }

  static SynthProfile noisy() {
    SynthProfile p;
    p.name = "noisy";
    p.duration = 360.0;
    p.dynamics_gain = 1.0;
    return p;
  }

  void validate() const {
    if (duration < 60.0) throw InvalidProfile("duration must be at least 60 s");
    if (dynamics_rate <= 0.0 || eeg_rate <= 0.0)
      throw InvalidProfile("rates must be positive");
    if (episode_mean <= 5.0 || gap_mean <= 5.0)
      throw InvalidProfile("episode and gap means must exceed 5 s");
    if (ratio_factor < 2.0)
      throw InvalidProfile("ratio_factor must be at least 2");
    if (dynamics_gain < 1.0)
      throw InvalidProfile("dynamics_gain must be at least 1");
    if (drt_period < 2.0) throw InvalidProfile("drt_period must be at least 2 s");
  }
};

inline nlohmann::json profile_to_json(const SynthProfile& p) {
  return nlohmann::json{{"name", p.name},
                        {"duration", p.duration},
                        {"dynamics_rate", p.dynamics_rate},
                        {"eeg_rate", p.eeg_rate},
                        {"episode_mean", p.episode_mean},
                        {"gap_mean", p.gap_mean},
                        {"ratio_factor", p.ratio_factor},
                        {"dynamics_gain", p.dynamics_gain},
                        {"drt_period", p.drt_period}};
}

/// Strict loader: unknown keys are rejected, known keys override `base`.
inline SynthProfile profile_from_json(const nlohmann::json& j,
                                      SynthProfile base = {}) {
  if (!j.is_object()) throw InvalidProfile("profile must be a JSON object");
  static const std::set<std::string> allowed{
      "name",       "duration",      "dynamics_rate",
      "eeg_rate",   "episode_mean",  "gap_mean",
      "ratio_factor", "dynamics_gain", "drt_period"};
  for (const auto& item : j.items())
    if (!allowed.count(item.key()))
      throw InvalidProfile("unknown key '" + item.key() + "' in profile");
  try {
    if (j.contains("name")) base.name = j.at("name").get<std::string>();
    if (j.contains("duration")) base.duration = j.at("duration").get<double>();
    if (j.contains("dynamics_rate"))
      base.dynamics_rate = j.at("dynamics_rate").get<double>();
    if (j.contains("eeg_rate")) base.eeg_rate = j.at("eeg_rate").get<double>();
    if (j.contains("episode_mean"))
      base.episode_mean = j.at("episode_mean").get<double>();
    if (j.contains("gap_mean")) base.gap_mean = j.at("gap_mean").get<double>();
    if (j.contains("ratio_factor"))
      base.ratio_factor = j.at("ratio_factor").get<double>();
    if (j.contains("dynamics_gain"))
      base.dynamics_gain = j.at("dynamics_gain").get<double>();
    if (j.contains("drt_period"))
      base.drt_period = j.at("drt_period").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidProfile(std::string("bad profile value: ") + e.what());
  }
  base.validate();
  return base;
}

namespace detail {

inline std::vector<Episode> draw_episodes(const SynthProfile& p, Rng& rng) {
  std::vector<Episode> eps;
  double t = p.gap_mean * (0.7 + 0.6 * rng.uniform());
  while (t < p.duration - 10.0) {
    const double len = p.episode_mean * (0.7 + 0.6 * rng.uniform());
    const double end = std::min(t + len, p.duration - 2.0);
    if (end - t >= 10.0) eps.push_back({t, end});
    t = end + p.gap_mean * (0.7 + 0.6 * rng.uniform());
  }
  return eps;
}

inline bool in_episodes(const std::vector<Episode>& eps, double t) {
  for (const auto& e : eps)
    if (t >= e.start && t < e.end) return true;
  return false;
}

/// Gaussian noise confined to [lo, hi) Hz, unit average band amplitude,
/// built by shaping a white spectrum and inverting.
inline std::vector<double> band_noise(std::size_t n, double rate, double lo,
                                      double hi, Rng& rng) {
  const std::size_t nfft = next_pow2(std::max<std::size_t>(n, 16));
  std::vector<std::complex<double>> spec(nfft, {0.0, 0.0});
  const double df = rate / static_cast<double>(nfft);
  for (std::size_t k = 1; k < nfft / 2; ++k) {
    const double f = static_cast<double>(k) * df;
    if (f < lo || f >= hi) continue;
    const std::complex<double> v(rng.gaussian(), rng.gaussian());
    spec[k] = v;
    spec[nfft - k] = std::conj(v);
  }
  fft_radix2(spec, true);
  std::vector<double> out(n);
  double power = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = spec[i].real();
    power += out[i] * out[i];
  }
  power /= static_cast<double>(n);
  const double norm = power > 0.0 ? 1.0 / std::sqrt(power) : 1.0;
  for (double& v : out) v *= norm;
  return out;
}

/// Exact-discretization first-order Gauss-Markov walk with a per-sample
/// sigma multiplier.
inline std::vector<double> ou_series(std::size_t n, double rate, double tau,
                                     double sigma, Rng& rng,
                                     const std::vector<double>* gain = nullptr) {
  std::vector<double> x(n, 0.0);
  const double rho = std::exp(-1.0 / (tau * rate));
  const double step = std::sqrt(1.0 - rho * rho);
  for (std::size_t i = 1; i < n; ++i) {
    const double g = gain ? (*gain)[i] : 1.0;
    x[i] = rho * x[i - 1] + sigma * g * step * rng.gaussian();
  }
  return x;
}

}  // namespace detail

/// Deterministic synthetic driving session: scalp channels whose band-power
/// ratio rises inside drowsy episodes, vehicle channels whose behavior either
/// mirrors the episodes (`separable`) or ignores them (`noisy`), and reaction
/// task events fired periodically inside episodes.
inline Session generate_synthetic(const SynthProfile& profile,
                                  std::uint64_t seed,
                                  const std::string& subject_id = "s01",
                                  const std::string& session_id = "r01",
                                  std::vector<Episode>* episodes_out = nullptr) {
  profile.validate();
  Session s;
  s.frame.subject_id = subject_id;
  s.frame.session_id = session_id;
  s.frame.start = 0.0;
  s.frame.duration = profile.duration;

  Rng ep_rng(derive_seed(seed, 1));
  const std::vector<Episode> episodes = detail::draw_episodes(profile, ep_rng);
  if (episodes_out) *episodes_out = episodes;

  const auto n_eeg =
      static_cast<std::size_t>(std::llround(profile.duration * profile.eeg_rate));
  const auto n_dyn = static_cast<std::size_t>(
      std::llround(profile.duration * profile.dynamics_rate));

  // Scalp channels: theta and alpha noise scaled up inside episodes so the
  // windowed (theta+alpha)/beta ratio separates by at least ratio_factor,
  // with 15% headroom for estimation noise.
  const double num_gain = std::sqrt(profile.ratio_factor * 1.15);
  for (int c = 1; c <= 8; ++c) {
    Rng rng(derive_seed(seed, 100 + static_cast<std::uint64_t>(c)));
    const auto th = detail::band_noise(n_eeg, profile.eeg_rate, 4.0, 8.0, rng);
    const auto al = detail::band_noise(n_eeg, profile.eeg_rate, 8.0, 13.0, rng);
    const auto be = detail::band_noise(n_eeg, profile.eeg_rate, 13.0, 20.0, rng);
    const auto bg = detail::band_noise(n_eeg, profile.eeg_rate, 0.5, 45.0, rng);
    std::vector<double> x(n_eeg);
    for (std::size_t i = 0; i < n_eeg; ++i) {
      const double t = static_cast<double>(i) / profile.eeg_rate;
      const double g = detail::in_episodes(episodes, t) ? num_gain : 1.0;
      x[i] = g * (th[i] + al[i]) + be[i] + 0.05 * bg[i];
    }
    s.frame.add_channel("eeg_" + std::to_string(c), profile.eeg_rate,
                        std::move(x));
  }

  // Vehicle channels. Drowsiness shows up as stronger slow steering drift and
  // weaker fast corrections; the noisy profile sets both multipliers to one.
  std::vector<double> drift_gain(n_dyn, 1.0), micro_gain(n_dyn, 1.0);
  const double micro_att = 1.0 / (1.0 + 0.5 * (profile.dynamics_gain - 1.0));
  for (std::size_t i = 0; i < n_dyn; ++i) {
    const double t = static_cast<double>(i) / profile.dynamics_rate;
    if (detail::in_episodes(episodes, t)) {
      drift_gain[i] = profile.dynamics_gain;
      micro_gain[i] = micro_att;
    }
  }

  Rng dyn_rng(derive_seed(seed, 200));
  const auto micro = detail::ou_series(n_dyn, profile.dynamics_rate, 0.15, 0.02,
                                       dyn_rng, &micro_gain);
  const auto drift = detail::ou_series(n_dyn, profile.dynamics_rate, 4.0, 0.012,
                                       dyn_rng, &drift_gain);
  std::vector<double> theta(n_dyn);
  for (std::size_t i = 0; i < n_dyn; ++i) theta[i] = micro[i] + drift[i];

  std::vector<double> theta_dot(n_dyn, 0.0);
  for (std::size_t i = 1; i < n_dyn; ++i)
    theta_dot[i] = (theta[i] - theta[i - 1]) * profile.dynamics_rate;
  if (n_dyn > 1) theta_dot[0] = theta_dot[1];

  Rng v_rng(derive_seed(seed, 201));
  const auto v_dev = detail::ou_series(n_dyn, profile.dynamics_rate, 20.0, 0.8,
                                       v_rng);
  std::vector<double> v_x(n_dyn);
  for (std::size_t i = 0; i < n_dyn; ++i) v_x[i] = 29.0 + v_dev[i];

  std::vector<double> a_x(n_dyn, 0.0);
  for (std::size_t i = 1; i < n_dyn; ++i)
    a_x[i] = (v_x[i] - v_x[i - 1]) * profile.dynamics_rate;
  if (n_dyn > 1) a_x[0] = a_x[1];

  Rng ay_rng(derive_seed(seed, 202));
  const auto ay_noise = detail::ou_series(n_dyn, profile.dynamics_rate, 0.5,
                                          0.05, ay_rng);
  std::vector<double> a_y(n_dyn);
  for (std::size_t i = 0; i < n_dyn; ++i)
    a_y[i] = v_x[i] * v_x[i] / 150.0 * theta[i] + ay_noise[i];

  std::vector<double> delta(n_dyn);
  for (std::size_t i = 0; i < n_dyn; ++i) delta[i] = 15.0 * theta[i];

  s.frame.add_channel("theta", profile.dynamics_rate, std::move(theta));
  s.frame.add_channel("theta_dot", profile.dynamics_rate, std::move(theta_dot));
  s.frame.add_channel("v_x", profile.dynamics_rate, std::move(v_x));
  s.frame.add_channel("a_x", profile.dynamics_rate, std::move(a_x));
  s.frame.add_channel("a_y", profile.dynamics_rate, std::move(a_y));
  s.frame.add_channel("delta", profile.dynamics_rate, std::move(delta));

  // Reaction-task probes inside episodes, distractor events outside.
  Rng ev_rng(derive_seed(seed, 300));
  for (const auto& e : episodes) {
    for (double t = e.start + 2.0; t + 1.0 <= e.end; t += profile.drt_period)
      s.events.push_back({EventKind::drt, t, t + 1.0});
  }
  for (double t = 15.0 + 10.0 * ev_rng.uniform(); t < profile.duration - 2.0;
       t += 35.0 + 20.0 * ev_rng.uniform()) {
    if (detail::in_episodes(episodes, t)) continue;
    const double len = 0.5 + ev_rng.uniform();
    const EventKind kind =
        ev_rng.uniform() < 0.5 ? EventKind::brake : EventKind::question;
    s.events.push_back({kind, t, t + len});
  }
  std::sort(s.events.begin(), s.events.end(),
            [](const auto& a, const auto& b) { return a.start < b.start; });

  s.frame.validate();
  return s;
}

}  // namespace ddd
