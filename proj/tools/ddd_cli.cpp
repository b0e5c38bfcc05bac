// ddd: batch driver for the drowsiness-detection toolkit.
//
// Subcommands: synth, label, extract, train, evaluate, compare, preset.
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 pipeline
// error. See README.md for the file formats and the leakage notes.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ddd/ddd.hpp"

namespace fs = std::filesystem;

namespace {

std::string iso_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct CommonOpts {
  std::string config_path;
  std::string data_path;
  std::string out_dir = "ddd-out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool leakage_ack = false;
  double max_hours = 0.0;
};

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ddd::ConfigError("cannot read file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ddd::ConfigError(path + " is not valid JSON: " + e.what());
  }
  return j;
}

ddd::PipelineConfig resolve_config(const CommonOpts& g,
                                   ddd::PipelineConfig base = {}) {
  if (!g.config_path.empty())
    base = ddd::config_from_json(read_json_file(g.config_path), base);
  if (g.seed_set) base.seed = g.seed;
  if (g.leakage_ack) base.leakage_ack = true;
  return base;
}

std::vector<ddd::Session> load_sessions(const CommonOpts& g) {
  if (g.data_path.empty())
    throw ddd::ConfigError("--data <manifest|dir> is required");
  const fs::path p(g.data_path);
  std::vector<fs::path> manifests;
  if (fs::is_directory(p)) {
    if (fs::exists(p / "manifest.json")) {
      manifests.push_back(p / "manifest.json");
    } else {
      for (const auto& e : fs::directory_iterator(p))
        if (e.is_directory() && fs::exists(e.path() / "manifest.json"))
          manifests.push_back(e.path() / "manifest.json");
      std::sort(manifests.begin(), manifests.end());
    }
  } else if (fs::exists(p)) {
    manifests.push_back(p);
  }
  if (manifests.empty())
    throw ddd::DataError("no manifest.json found under: " + g.data_path);

  std::vector<ddd::Session> sessions;
  std::size_t dropped = 0;
  for (const auto& m : manifests) {
    ddd::LoadResult r = ddd::load_session(m);
    dropped += r.diagnostics.size();
    for (auto& f : r.frames) sessions.push_back({std::move(f), r.events});
  }
  if (dropped > 0)
    std::cerr << "note: " << dropped
              << " row(s) dropped or repaired while loading (rerun the "
                 "loader directly for line numbers)\n";

  // Crude subsetting knob: keep leading sessions until the requested number
  // of data hours is covered. The selection rule is arbitrary by design.
  if (g.max_hours > 0.0) {
    const double budget = g.max_hours * 3600.0;
    double used = 0.0;
    std::size_t keep = 0;
    for (; keep < sessions.size(); ++keep) {
      if (keep > 0 && used >= budget) break;
      used += sessions[keep].frame.duration;
    }
    if (keep < sessions.size()) {
      std::cerr << "note: --max-hours keeps " << keep << " of "
                << sessions.size() << " sessions\n";
      sessions.resize(keep);
    }
  }
  return sessions;
}

void ensure_out(const CommonOpts& g) { fs::create_directories(g.out_dir); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ddd::DataError("cannot write: " + path.string());
  out << text;
}

// Writes the per-run artifacts shared by train/preset: report, model, ROC.
void write_run_artifacts(const CommonOpts& g, const std::string& name,
                         const ddd::ExperimentResult& res) {
  ensure_out(g);
  nlohmann::json j;
  j["methods"][name] = ddd::result_to_json(res);
  j["version"] = ddd::kToolVersion;
  j["run"] = {{"generated_at", iso_timestamp()},
              {"elapsed_seconds", res.wall_seconds}};
  write_text(fs::path(g.out_dir) / "report.json", j.dump(2) + "\n");
  ddd::save_trained(fs::path(g.out_dir) / "model.json", res.final_model,
                    res.final_features);
  ddd::write_roc_csv(fs::path(g.out_dir) / "roc.csv", res.pooled_roc);
  ddd::write_roc_svg(fs::path(g.out_dir) / "roc.svg", {{name, res.pooled_roc}});
  std::cout << ddd::metrics_table({{name, res}});
  std::cout << "artifacts in " << g.out_dir << ": report.json model.json "
            << "roc.csv roc.svg\n";
}

int run_synth(const CommonOpts& g, const std::string& profile_name,
              std::size_t subjects, double duration) {
  ddd::SynthProfile profile = profile_name == "noisy"
                                  ? ddd::SynthProfile::noisy()
                                  : ddd::SynthProfile::separable();
  if (profile_name != "separable" && profile_name != "noisy")
    throw ddd::InvalidProfile("unknown profile: " + profile_name);
  if (!g.config_path.empty())
    profile = ddd::profile_from_json(read_json_file(g.config_path), profile);
  if (duration > 0.0) profile.duration = duration;
  profile.validate();
  if (subjects == 0) throw ddd::ConfigError("--subjects must be >= 1");

  ensure_out(g);
  const std::uint64_t seed = g.seed_set ? g.seed : 1;
  for (std::size_t s = 0; s < subjects; ++s) {
    char sid[32];
    std::snprintf(sid, sizeof sid, "s%02lu",
                  static_cast<unsigned long>(s + 1));
    std::vector<ddd::Episode> episodes;
    const ddd::Session session = ddd::generate_synthetic(
        profile, ddd::derive_seed(seed, s), sid, "r01", &episodes);
    const fs::path dir = fs::path(g.out_dir) / sid;
    ddd::write_session(dir, session);
    std::cout << sid << ": " << profile.duration << " s, "
              << episodes.size() << " drowsy episodes, "
              << session.events.size() << " events -> " << dir.string()
              << "\n";
  }
  return 0;
}

int run_label(const CommonOpts& g) {
  const ddd::PipelineConfig cfg = resolve_config(g);
  const std::vector<ddd::Session> sessions = load_sessions(g);
  const auto rows = ddd::build_session_rows(sessions, cfg);

  ensure_out(g);
  const fs::path path = fs::path(g.out_dir) / "labels.csv";
  std::ofstream out(path);
  if (!out) throw ddd::DataError("cannot write: " + path.string());
  out << "subject,session,window,start_time,ratio,label\n";
  char buf[64];
  std::size_t labeled = 0;
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    for (std::size_t i = 0; i < rows[s].labels.size(); ++i) {
      out << sessions[s].frame.subject_id << ','
          << sessions[s].frame.session_id << ',' << i << ',';
      std::snprintf(buf, sizeof buf, "%.6f", rows[s].start_times[i]);
      out << buf << ',';
      if (std::isfinite(rows[s].ratios[i])) {
        std::snprintf(buf, sizeof buf, "%.17g", rows[s].ratios[i]);
        out << buf;
      }
      out << ',' << ddd::to_string(rows[s].labels[i].state) << '\n';
      if (rows[s].labels[i].state != ddd::DriverState::unlabeled) ++labeled;
    }
  }
  std::cout << "wrote " << path.string() << " (" << labeled
            << " labeled windows)\n";
  return 0;
}

int run_extract(const CommonOpts& g) {
  const ddd::PipelineConfig cfg = resolve_config(g);
  const std::vector<ddd::Session> sessions = load_sessions(g);
  const auto rows = ddd::build_session_rows(sessions, cfg);

  ensure_out(g);
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    std::vector<std::string> labels;
    labels.reserve(rows[s].labels.size());
    for (const auto& l : rows[s].labels)
      labels.push_back(ddd::to_string(l.state));
    const fs::path path =
        fs::path(g.out_dir) / ("features_" + sessions[s].frame.subject_id +
                               "_" + sessions[s].frame.session_id + ".csv");
    std::ofstream out(path);
    if (!out) throw ddd::DataError("cannot write: " + path.string());
    ddd::write_feature_csv(out, rows[s].features, &labels);
    std::cout << "wrote " << path.string() << " (" << rows[s].features.size()
              << " windows)\n";
  }
  return 0;
}

int run_train(const CommonOpts& g) {
  const ddd::PipelineConfig cfg = resolve_config(g);
  const std::vector<ddd::Session> sessions = load_sessions(g);
  const ddd::ExperimentResult res = ddd::run_experiment(sessions, cfg);
  write_run_artifacts(g, ddd::to_string(cfg.model.kind), res);
  return 0;
}

int run_evaluate(const CommonOpts& g, const std::string& model_path) {
  const ddd::PipelineConfig cfg = resolve_config(g);
  const ddd::TrainedModel tm = ddd::load_trained(model_path);
  const std::vector<ddd::Session> sessions = load_sessions(g);
  const auto rows = ddd::build_session_rows(sessions, cfg);

  ddd::Dataset ds;
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    ddd::Dataset part =
        ddd::Dataset::from_features(rows[s].features, rows[s].labels);
    if (part.size() > 0) ds.append_rows(part);
  }
  if (ds.size() == 0) throw ddd::InsufficientData("no labeled windows");

  std::vector<std::size_t> cols;
  for (const auto& name : tm.features) {
    const auto it =
        std::find(ds.feature_names.begin(), ds.feature_names.end(), name);
    if (it == ds.feature_names.end())
      throw ddd::ConfigError("model needs feature '" + name +
                             "' which the extracted set lacks");
    cols.push_back(
        static_cast<std::size_t>(it - ds.feature_names.begin()));
  }
  const ddd::Dataset ev = ds.select_columns(cols);
  const std::vector<double> scores = ddd::model_scores(tm.model, ev);
  const double thr = std::isnan(cfg.threshold) ? tm.model.default_threshold
                                               : cfg.threshold;
  const ddd::Metrics m = ddd::evaluate_scores(scores, ev.y, thr);
  const std::vector<ddd::RocPoint> roc = ddd::roc_curve(scores, ev.y);

  ensure_out(g);
  nlohmann::json j;
  j["model"] = model_path;
  j["rows"] = ev.size();
  j["metrics"] = ddd::metrics_to_json(m);
  j["version"] = ddd::kToolVersion;
  j["run"] = {{"generated_at", iso_timestamp()}};
  write_text(fs::path(g.out_dir) / "eval.json", j.dump(2) + "\n");
  ddd::write_roc_csv(fs::path(g.out_dir) / "roc.csv", roc);
  std::printf("rows %zu  accuracy %.4f  precision %.4f  recall %.4f  auc %.4f\n",
              ev.size(), m.accuracy, m.precision, m.recall, m.auc);
  return 0;
}

int run_preset(const CommonOpts& g, const std::string& method,
               const std::string& variant) {
  ddd::PipelineConfig cfg = ddd::preset_config(method, variant);
  cfg = resolve_config(g, cfg);
  const std::vector<ddd::Session> sessions = load_sessions(g);
  const ddd::ExperimentResult res = ddd::run_experiment(sessions, cfg);
  write_run_artifacts(g, method + "_" + variant, res);
  return 0;
}

int run_compare(const CommonOpts& g, const std::string& methods_csv,
                const std::string& variant) {
  std::vector<std::string> methods;
  std::string cur;
  for (char c : methods_csv) {
    if (c == ',') {
      if (!cur.empty()) methods.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) methods.push_back(cur);
  if (methods.empty()) throw ddd::ConfigError("--methods is empty");

  std::vector<std::pair<std::string, ddd::PipelineConfig>> configs;
  for (const auto& m : methods)
    configs.push_back({m, resolve_config(g, ddd::preset_config(m, variant))});

  const std::vector<ddd::Session> sessions = load_sessions(g);
  const auto entries = ddd::compare_methods(sessions, configs);

  ensure_out(g);
  const nlohmann::json report = ddd::comparison_report(entries, iso_timestamp());
  write_text(fs::path(g.out_dir) / "report.json", report.dump(2) + "\n");
  const std::string table = ddd::metrics_table(entries);
  write_text(fs::path(g.out_dir) / "report.txt", table);
  std::vector<std::pair<std::string, std::vector<ddd::RocPoint>>> curves;
  for (const auto& e : entries) {
    ddd::write_roc_csv(fs::path(g.out_dir) / ("roc_" + e.method + ".csv"),
                       e.result.pooled_roc);
    curves.push_back({e.method, e.result.pooled_roc});
  }
  ddd::write_roc_svg(fs::path(g.out_dir) / "roc.svg", curves);
  std::cout << table;
  for (const auto& w : report.at("warnings"))
    std::cerr << "warning: " << w.get<std::string>() << "\n";
  std::cout << "artifacts in " << g.out_dir << ": report.json report.txt "
            << "roc_<method>.csv roc.svg\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"driver drowsiness detection toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  CommonOpts g;
  app.add_option("--config", g.config_path,
                 "JSON config (pipeline fields; profile fields for synth)");
  app.add_option("--seed", g.seed, "override the experiment seed");
  app.add_option("--data", g.data_path, "session manifest or dataset dir");
  app.add_option("--out", g.out_dir, "output directory")
      ->capture_default_str();
  app.add_flag("--leakage-ack", g.leakage_ack,
               "acknowledge deliberately leaky configurations");
  app.add_option("--max-hours", g.max_hours,
                 "keep only the leading sessions covering this many hours");

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string profile = "separable";
  std::size_t subjects = 1;
  double duration = 0.0;
  synth->add_option("--profile", profile, "separable|noisy")
      ->capture_default_str();
  synth->add_option("--subjects", subjects, "number of subjects")
      ->capture_default_str();
  synth->add_option("--duration", duration, "override session length, s");

  auto* label = app.add_subcommand("label", "write per-window labels");
  auto* extract = app.add_subcommand("extract", "write per-window features");
  auto* train = app.add_subcommand("train", "run the configured experiment");

  auto* evaluate =
      app.add_subcommand("evaluate", "score a saved model on a dataset");
  std::string model_path;
  evaluate->add_option("--model", model_path, "trained model JSON")
      ->required();

  auto* preset = app.add_subcommand("preset", "run a named method preset");
  std::string method;
  std::string preset_variant = "c2";
  preset->add_option("--method", method, "rf|svma|svmw|lstm_lite")->required();
  preset->add_option("--config", preset_variant, "c1|c2")
      ->capture_default_str();

  auto* compare = app.add_subcommand("compare", "run several presets");
  std::string methods_csv = "rf,svma,svmw,lstm_lite";
  std::string compare_variant = "c2";
  compare->add_option("--methods", methods_csv, "comma-separated preset list")
      ->capture_default_str();
  compare->add_option("--config", compare_variant, "c1|c2")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  g.seed_set = app.count("--seed") > 0;

  try {
    if (synth->parsed()) return run_synth(g, profile, subjects, duration);
    if (label->parsed()) return run_label(g);
    if (extract->parsed()) return run_extract(g);
    if (train->parsed()) return run_train(g);
    if (evaluate->parsed()) return run_evaluate(g, model_path);
    if (preset->parsed()) return run_preset(g, method, preset_variant);
    if (compare->parsed())
      return run_compare(g, methods_csv, compare_variant);
  } catch (const ddd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ddd::InvalidProfile& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ddd::InvalidSearchSpace& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ddd::BudgetTooSmall& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ddd::LeakageNotAcknowledged& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ddd::PipelineError& e) {
    std::cerr << "pipeline error: " << e.what() << "\n";
    return 4;
  } catch (const ddd::Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
