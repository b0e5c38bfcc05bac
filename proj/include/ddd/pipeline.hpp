#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "ddd/dataset.hpp"
#include "ddd/errors.hpp"
#include "ddd/features.hpp"
#include "ddd/labeling.hpp"
#include "ddd/models.hpp"
#include "ddd/selection.hpp"
#include "ddd/signal.hpp"
#include "ddd/table.hpp"

namespace ddd {

inline constexpr const char* kToolVersion = "0.1.0";

enum class SplitKind { none, train_test, holdout, kfold };
enum class EvalTarget { train, val, test, all };
enum class SelectionKind { none, anova_f, t_test, wrapper };
enum class LabelSourceKind { eeg, event };
enum class LabelPopulation { pooled, per_subject };
enum class WaveletScope { window, session };

inline std::string to_string(SplitKind s) {
  switch (s) {
    case SplitKind::none: return "none";
    case SplitKind::train_test: return "train_test";
    case SplitKind::holdout: return "holdout";
    case SplitKind::kfold: return "kfold";
  }
  return "?";
}

inline std::string to_string(EvalTarget t) {
  switch (t) {
    case EvalTarget::train: return "train";
    case EvalTarget::val: return "val";
    case EvalTarget::test: return "test";
    case EvalTarget::all: return "all";
  }
  return "?";
}

inline std::string to_string(SelectionKind s) {
  switch (s) {
    case SelectionKind::none: return "none";
    case SelectionKind::anova_f: return "anova_f";
    case SelectionKind::t_test: return "t_test";
    case SelectionKind::wrapper: return "wrapper";
  }
  return "?";
}

inline std::string to_string(LabelSourceKind s) {
  return s == LabelSourceKind::eeg ? "eeg" : "event";
}

inline std::string to_string(LabelPopulation p) {
  return p == LabelPopulation::pooled ? "pooled" : "per_subject";
}

inline std::string to_string(WaveletScope s) {
  return s == WaveletScope::window ? "window" : "session";
}

namespace detail {

template <typename E>
E enum_from(const std::string& s, std::initializer_list<E> all,
            const std::string& what) {
  for (E e : all)
    if (to_string(e) == s) return e;
  throw ConfigError("unknown " + what + ": " + s);
}

}  // namespace detail

/// Optional hyperparameter search over an explicit candidate grid.
struct TuneSpec {
  bool enabled = false;
  std::size_t budget = 8;
  std::vector<ModelConfig> grid;
};

/// Full description of one experiment. Every knob the run loop consults lives
/// here, including the deliberately unsound ones (`split: none`, evaluation on
/// training rows); those must be acknowledged explicitly via `leakage_ack`.
struct PipelineConfig {
  WindowSpec window;
  std::vector<FeatureFamily> families{FeatureFamily::statistical36,
                                      FeatureFamily::wavelet8,
                                      FeatureFamily::temporal15};
  WaveletScope wavelet_scope = WaveletScope::window;

  LabelSourceKind label_source = LabelSourceKind::eeg;
  LabelPopulation label_population = LabelPopulation::pooled;
  double awake_fraction = 0.60;
  double drowsy_fraction = 0.222;
  double event_margin = 5.0;

  SplitKind split = SplitKind::holdout;
  double train_ratio = 0.8;
  double val_ratio = 0.1;
  std::size_t folds = 5;
  /// Keep every window of a session in the same partition. Off by default to
  /// match the usual window-level shuffle, which itself leaks through
  /// overlapping windows; see the leakage notes in the README.
  bool group_by_session = false;

  SelectionKind selection = SelectionKind::anova_f;
  std::size_t top_k = 20;
  double alpha = 0.05;
  WrapperOptions wrapper;

  ModelConfig model;
  TuneSpec tune;

  EvalTarget eval_target = EvalTarget::test;
  double threshold = std::numeric_limits<double>::quiet_NaN();
  bool leakage_ack = false;
  std::uint64_t seed = 1;

  /// True when the configuration evaluates on rows the model saw while
  /// training or selecting.
  bool is_leaky() const {
    return split == SplitKind::none || eval_target == EvalTarget::train ||
           eval_target == EvalTarget::all;
  }

  void validate() const {
    window.validate();
    if (families.empty()) throw ConfigError("at least one feature family");
    if (!(awake_fraction > 0.0) || !(drowsy_fraction > 0.0) ||
        !(awake_fraction + drowsy_fraction < 1.0))
      throw ConfigError("label fractions must be positive and sum below one");
    if (!(event_margin >= 0.0)) throw ConfigError("event_margin must be >= 0");
    if (split == SplitKind::train_test || split == SplitKind::holdout) {
      if (!(train_ratio > 0.0 && train_ratio < 1.0))
        throw ConfigError("train_ratio must be in (0,1)");
    }
    if (split == SplitKind::holdout) {
      if (!(val_ratio > 0.0) || !(train_ratio + val_ratio < 1.0))
        throw ConfigError("holdout needs train_ratio + val_ratio < 1");
    }
    if (split == SplitKind::kfold && folds < 3)
      throw ConfigError("kfold needs at least 3 folds");
    if (selection == SelectionKind::anova_f && top_k == 0)
      throw ConfigError("top_k must be >= 1");
    if (selection == SelectionKind::t_test && !(alpha > 0.0 && alpha < 1.0))
      throw ConfigError("alpha must be in (0,1)");
    if (tune.enabled && tune.grid.empty())
      throw InvalidSearchSpace("tune enabled with an empty grid");
    if (wavelet_scope == WaveletScope::session) {
      const bool has = std::any_of(families.begin(), families.end(), [](auto f) {
        return f == FeatureFamily::wavelet8;
      });
      if (!has)
        throw ConfigError("session wavelet scope needs the wavelet8 family");
    }
  }
};

// ---------------------------------------------------------------------------
// Config JSON (strict: unknown keys are rejected)
// ---------------------------------------------------------------------------

namespace detail {

inline void expect_keys(const nlohmann::json& j,
                        const std::set<std::string>& allowed,
                        const std::string& ctx) {
  if (!j.is_object()) throw ConfigError(ctx + " must be a JSON object");
  for (const auto& item : j.items())
    if (!allowed.count(item.key()))
      throw ConfigError("unknown key '" + item.key() + "' in " + ctx);
}

inline nlohmann::json model_config_to_json(const ModelConfig& m) {
  return nlohmann::json{
      {"kind", to_string(m.kind)},
      {"rf",
       {{"n_trees", m.rf.n_trees},
        {"max_depth", m.rf.max_depth},
        {"min_leaf", m.rf.min_leaf},
        {"mtry", m.rf.mtry},
        {"bootstrap", m.rf.bootstrap}}},
      {"svm",
       {{"c", m.svm.c},
        {"gamma", m.svm.gamma},
        {"tol", m.svm.tol},
        {"max_sweeps", m.svm.max_sweeps}}},
      {"logit",
       {{"l2", m.logit.l2},
        {"max_iter", m.logit.max_iter},
        {"tol", m.logit.tol}}}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j,
                                          ModelConfig base = {}) {
  expect_keys(j, {"kind", "rf", "svm", "logit"}, "model");
  if (j.contains("kind"))
    base.kind = model_kind_from(j.at("kind").get<std::string>());
  if (j.contains("rf")) {
    const auto& r = j.at("rf");
    expect_keys(r, {"n_trees", "max_depth", "min_leaf", "mtry", "bootstrap"},
                "model.rf");
    if (r.contains("n_trees")) base.rf.n_trees = r.at("n_trees").get<std::size_t>();
    if (r.contains("max_depth"))
      base.rf.max_depth = r.at("max_depth").get<std::size_t>();
    if (r.contains("min_leaf")) base.rf.min_leaf = r.at("min_leaf").get<std::size_t>();
    if (r.contains("mtry")) base.rf.mtry = r.at("mtry").get<std::size_t>();
    if (r.contains("bootstrap")) base.rf.bootstrap = r.at("bootstrap").get<bool>();
  }
  if (j.contains("svm")) {
    const auto& s = j.at("svm");
    expect_keys(s, {"c", "gamma", "tol", "max_sweeps"}, "model.svm");
    if (s.contains("c")) base.svm.c = s.at("c").get<double>();
    if (s.contains("gamma")) base.svm.gamma = s.at("gamma").get<double>();
    if (s.contains("tol")) base.svm.tol = s.at("tol").get<double>();
    if (s.contains("max_sweeps"))
      base.svm.max_sweeps = s.at("max_sweeps").get<std::size_t>();
  }
  if (j.contains("logit")) {
    const auto& l = j.at("logit");
    expect_keys(l, {"l2", "max_iter", "tol"}, "model.logit");
    if (l.contains("l2")) base.logit.l2 = l.at("l2").get<double>();
    if (l.contains("max_iter"))
      base.logit.max_iter = l.at("max_iter").get<std::size_t>();
    if (l.contains("tol")) base.logit.tol = l.at("tol").get<double>();
  }
  return base;
}

}  // namespace detail

inline nlohmann::json config_to_json(const PipelineConfig& c) {
  nlohmann::json j;
  j["window"] = {{"length", c.window.length},
                 {"overlap", c.window.overlap},
                 {"rate", c.window.rate}};
  nlohmann::json fams = nlohmann::json::array();
  for (auto f : c.families) fams.push_back(to_string(f));
  j["features"] = std::move(fams);
  j["wavelet_scope"] = to_string(c.wavelet_scope);
  j["label_source"] = to_string(c.label_source);
  j["label_population"] = to_string(c.label_population);
  j["awake_fraction"] = c.awake_fraction;
  j["drowsy_fraction"] = c.drowsy_fraction;
  j["event_margin"] = c.event_margin;
  j["split"] = to_string(c.split);
  j["train_ratio"] = c.train_ratio;
  j["val_ratio"] = c.val_ratio;
  j["folds"] = c.folds;
  j["group_by_session"] = c.group_by_session;
  j["selection"] = to_string(c.selection);
  j["top_k"] = c.top_k;
  j["alpha"] = c.alpha;
  j["wrapper"] = {{"strategy", to_string(c.wrapper.strategy)},
                  {"budget", c.wrapper.budget},
                  {"min_improvement", c.wrapper.min_improvement},
                  {"swarm", c.wrapper.swarm},
                  {"inertia", c.wrapper.inertia},
                  {"cognitive", c.wrapper.cognitive},
                  {"social", c.wrapper.social},
                  {"vmax", c.wrapper.vmax}};
  j["model"] = detail::model_config_to_json(c.model);
  nlohmann::json grid = nlohmann::json::array();
  for (const auto& g : c.tune.grid) grid.push_back(detail::model_config_to_json(g));
  j["tune"] = {{"enabled", c.tune.enabled},
               {"budget", c.tune.budget},
               {"grid", std::move(grid)}};
  j["eval_target"] = to_string(c.eval_target);
  if (std::isnan(c.threshold))
    j["threshold"] = nullptr;
  else
    j["threshold"] = c.threshold;
  j["leakage_ack"] = c.leakage_ack;
  j["seed"] = c.seed;
  return j;
}

/// Applies a (possibly partial) JSON object on top of `base`. Keys mirror the
/// struct exactly; anything unrecognized is a configuration error.
inline PipelineConfig config_from_json(const nlohmann::json& j,
                                       PipelineConfig base = {}) {
  detail::expect_keys(
      j,
      {"window", "features", "wavelet_scope", "label_source",
       "label_population", "awake_fraction", "drowsy_fraction", "event_margin",
       "split", "train_ratio", "val_ratio", "folds", "group_by_session",
       "selection", "top_k", "alpha", "wrapper", "model", "tune", "eval_target",
       "threshold", "leakage_ack", "seed"},
      "config");
  try {
    if (j.contains("window")) {
      const auto& w = j.at("window");
      detail::expect_keys(w, {"length", "overlap", "rate"}, "window");
      if (w.contains("length")) base.window.length = w.at("length").get<double>();
      if (w.contains("overlap")) base.window.overlap = w.at("overlap").get<double>();
      if (w.contains("rate")) base.window.rate = w.at("rate").get<double>();
    }
    if (j.contains("features")) {
      base.families.clear();
      for (const auto& f : j.at("features"))
        base.families.push_back(feature_family_from(f.get<std::string>()));
    }
    if (j.contains("wavelet_scope"))
      base.wavelet_scope = detail::enum_from<WaveletScope>(
          j.at("wavelet_scope").get<std::string>(),
          {WaveletScope::window, WaveletScope::session}, "wavelet_scope");
    if (j.contains("label_source"))
      base.label_source = detail::enum_from<LabelSourceKind>(
          j.at("label_source").get<std::string>(),
          {LabelSourceKind::eeg, LabelSourceKind::event}, "label_source");
    if (j.contains("label_population"))
      base.label_population = detail::enum_from<LabelPopulation>(
          j.at("label_population").get<std::string>(),
          {LabelPopulation::pooled, LabelPopulation::per_subject},
          "label_population");
    if (j.contains("awake_fraction"))
      base.awake_fraction = j.at("awake_fraction").get<double>();
    if (j.contains("drowsy_fraction"))
      base.drowsy_fraction = j.at("drowsy_fraction").get<double>();
    if (j.contains("event_margin"))
      base.event_margin = j.at("event_margin").get<double>();
    if (j.contains("split"))
      base.split = detail::enum_from<SplitKind>(
          j.at("split").get<std::string>(),
          {SplitKind::none, SplitKind::train_test, SplitKind::holdout,
           SplitKind::kfold},
          "split");
    if (j.contains("train_ratio")) base.train_ratio = j.at("train_ratio").get<double>();
    if (j.contains("val_ratio")) base.val_ratio = j.at("val_ratio").get<double>();
    if (j.contains("folds")) base.folds = j.at("folds").get<std::size_t>();
    if (j.contains("group_by_session"))
      base.group_by_session = j.at("group_by_session").get<bool>();
    if (j.contains("selection"))
      base.selection = detail::enum_from<SelectionKind>(
          j.at("selection").get<std::string>(),
          {SelectionKind::none, SelectionKind::anova_f, SelectionKind::t_test,
           SelectionKind::wrapper},
          "selection");
    if (j.contains("top_k")) base.top_k = j.at("top_k").get<std::size_t>();
    if (j.contains("alpha")) base.alpha = j.at("alpha").get<double>();
    if (j.contains("wrapper")) {
      const auto& w = j.at("wrapper");
      detail::expect_keys(w,
                          {"strategy", "budget", "min_improvement", "swarm",
                           "inertia", "cognitive", "social", "vmax"},
                          "wrapper");
      if (w.contains("strategy"))
        base.wrapper.strategy =
            wrapper_strategy_from(w.at("strategy").get<std::string>());
      if (w.contains("budget"))
        base.wrapper.budget = w.at("budget").get<std::size_t>();
      if (w.contains("min_improvement"))
        base.wrapper.min_improvement = w.at("min_improvement").get<double>();
      if (w.contains("swarm")) base.wrapper.swarm = w.at("swarm").get<std::size_t>();
      if (w.contains("inertia")) base.wrapper.inertia = w.at("inertia").get<double>();
      if (w.contains("cognitive"))
        base.wrapper.cognitive = w.at("cognitive").get<double>();
      if (w.contains("social")) base.wrapper.social = w.at("social").get<double>();
      if (w.contains("vmax")) base.wrapper.vmax = w.at("vmax").get<double>();
    }
    if (j.contains("model"))
      base.model = detail::model_config_from_json(j.at("model"), base.model);
    if (j.contains("tune")) {
      const auto& t = j.at("tune");
      detail::expect_keys(t, {"enabled", "budget", "grid"}, "tune");
      if (t.contains("enabled")) base.tune.enabled = t.at("enabled").get<bool>();
      if (t.contains("budget")) base.tune.budget = t.at("budget").get<std::size_t>();
      if (t.contains("grid")) {
        base.tune.grid.clear();
        for (const auto& g : t.at("grid"))
          base.tune.grid.push_back(detail::model_config_from_json(g));
      }
    }
    if (j.contains("eval_target"))
      base.eval_target = detail::enum_from<EvalTarget>(
          j.at("eval_target").get<std::string>(),
          {EvalTarget::train, EvalTarget::val, EvalTarget::test, EvalTarget::all},
          "eval_target");
    if (j.contains("threshold")) {
      if (j.at("threshold").is_null())
        base.threshold = std::numeric_limits<double>::quiet_NaN();
      else
        base.threshold = j.at("threshold").get<double>();
    }
    if (j.contains("leakage_ack")) base.leakage_ack = j.at("leakage_ack").get<bool>();
    if (j.contains("seed")) base.seed = j.at("seed").get<std::uint64_t>();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config value error: ") + e.what());
  }
  return base;
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

inline std::vector<std::string> preset_methods() {
  return {"rf", "svma", "svmw", "lstm_lite"};
}

/// Named experiment presets. Variant "c1" reproduces each method's original
/// protocol, including its evaluation flaws; variant "c2" puts every method on
/// the same clean holdout protocol. The rf preset is identical under both
/// variants because its original protocol already matches the clean one.
inline PipelineConfig preset_config(const std::string& method,
                                    const std::string& variant) {
  if (variant != "c1" && variant != "c2")
    throw ConfigError("unknown preset variant: " + variant);
  PipelineConfig c;

  if (method == "rf") {
    c.families = {FeatureFamily::statistical36, FeatureFamily::wavelet8,
                  FeatureFamily::temporal15};
    c.selection = SelectionKind::anova_f;
    c.top_k = 20;
    c.model.kind = ModelKind::rf;
  } else if (method == "svma") {
    c.families = {FeatureFamily::statistical36};
    c.selection = SelectionKind::wrapper;
    c.wrapper.strategy = WrapperStrategy::pso;
    c.wrapper.budget = 120;
    c.model.kind = ModelKind::svm;
    if (variant == "c1") {
      c.split = SplitKind::none;
      c.eval_target = EvalTarget::train;
    }
  } else if (method == "svmw") {
    c.families = {FeatureFamily::wavelet8};
    c.wavelet_scope = WaveletScope::session;
    c.window.rate = 25.0;
    c.selection = SelectionKind::none;
    c.model.kind = ModelKind::svm;
    if (variant == "c1") {
      c.split = SplitKind::train_test;
      c.train_ratio = 0.3;
      c.eval_target = EvalTarget::all;
    }
  } else if (method == "lstm_lite") {
    c.families = {FeatureFamily::temporal15};
    c.selection = SelectionKind::t_test;
    c.model.kind = ModelKind::logit;
    if (variant == "c1") {
      c.split = SplitKind::kfold;
      c.folds = 5;
      c.label_source = LabelSourceKind::event;
      c.window = WindowSpec{10.0, 0.0, 10.0};
    }
  } else {
    throw ConfigError("unknown preset method: " + method);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Access log
// ---------------------------------------------------------------------------

/// Row-level audit trail. Every stage that consumes labeled dataset rows
/// reports which partition it read and how many of those rows belong to the
/// current fold's test partition, so a non-leaky run can prove it never
/// touched test rows before evaluation.
struct AccessRecord {
  std::string stage;
  int fold = 0;
  std::string partition;
  std::size_t rows = 0;
  std::size_t test_overlap = 0;
};

struct AccessLog {
  std::vector<AccessRecord> records;

  void note(const std::string& stage, int fold, const std::string& partition,
            const std::vector<std::size_t>& rows,
            const std::vector<char>& is_test) {
    AccessRecord r;
    r.stage = stage;
    r.fold = fold;
    r.partition = partition;
    r.rows = rows.size();
    for (std::size_t i : rows) r.test_overlap += is_test[i] ? 1 : 0;
    records.push_back(std::move(r));
  }

  std::size_t pre_eval_test_reads() const {
    std::size_t n = 0;
    for (const auto& r : records)
      if (r.stage != "evaluate") n += r.test_overlap;
    return n;
  }
};

// ---------------------------------------------------------------------------
// Experiment runner
// ---------------------------------------------------------------------------

struct FoldResult {
  std::size_t fold = 0;
  Metrics metrics;
  std::vector<RocPoint> roc;
  std::vector<std::string> selected;
  std::size_t train_rows = 0, val_rows = 0, test_rows = 0;
  long tuned_candidate = -1;
};

struct ExperimentResult {
  PipelineConfig config;
  std::size_t sessions = 0;
  std::size_t windows = 0;
  std::size_t labeled = 0;
  std::size_t awake = 0;
  size_t drowsy = 0;
  std::vector<FoldResult> folds;
  Metrics mean;
  std::vector<RocPoint> pooled_roc;
  AccessLog access;
  double wall_seconds = 0.0;
  Model final_model;
  std::vector<std::string> final_features;
};

namespace detail {

template <typename F>
auto run_stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(name, e.what());
  }
}

struct FoldIdx {
  std::vector<std::size_t> train, val, test;
};

/// Shuffle-then-partition. Units are single rows, or whole sessions when
/// `row_groups` is given (index i -> group of row i), so that every window of
/// a session lands in one partition. Ratio targets are counted in rows either
/// way; a ratio that would empty a mandatory partition raises SplitError.
inline std::vector<FoldIdx> make_folds(
    std::size_t n, const PipelineConfig& cfg,
    const std::vector<std::size_t>* row_groups = nullptr) {
  if (n < 4) throw SplitError("too few labeled rows to split");
  std::vector<std::vector<std::size_t>> units;
  if (row_groups) {
    if (row_groups->size() != n)
      throw SplitError("group map does not cover every row");
    std::size_t g = 0;
    for (std::size_t v : *row_groups) g = std::max(g, v + 1);
    units.assign(g, {});
    for (std::size_t i = 0; i < n; ++i) units[(*row_groups)[i]].push_back(i);
    units.erase(std::remove_if(units.begin(), units.end(),
                               [](const auto& u) { return u.empty(); }),
                units.end());
  } else {
    units.resize(n);
    for (std::size_t i = 0; i < n; ++i) units[i] = {i};
  }
  std::vector<std::size_t> order(units.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(cfg.seed, 7));
  rng.shuffle(order);

  const std::size_t nu = order.size();
  const auto append = [&](std::vector<std::size_t>& dst, std::size_t u) {
    const auto& r = units[order[u]];
    dst.insert(dst.end(), r.begin(), r.end());
  };

  std::vector<FoldIdx> folds;
  switch (cfg.split) {
    case SplitKind::none: {
      FoldIdx f;
      for (std::size_t u = 0; u < nu; ++u) append(f.train, u);
      f.val = f.train;
      f.test = f.train;
      folds.push_back(std::move(f));
      break;
    }
    case SplitKind::train_test: {
      const auto target = std::clamp<long long>(
          std::llround(cfg.train_ratio * static_cast<double>(n)), 1,
          static_cast<long long>(n) - 1);
      FoldIdx f;
      std::size_t u = 0;
      for (; u < nu; ++u) {
        if (!f.train.empty() &&
            (static_cast<long long>(f.train.size()) >= target || u == nu - 1))
          break;
        append(f.train, u);
      }
      for (; u < nu; ++u) append(f.test, u);
      if (f.test.empty()) throw SplitError("train_test leaves no test rows");
      f.val = f.train;
      folds.push_back(std::move(f));
      break;
    }
    case SplitKind::holdout: {
      const auto tt = std::max<long long>(
          std::llround(cfg.train_ratio * static_cast<double>(n)), 1);
      const auto tv = std::max<long long>(
          std::llround(cfg.val_ratio * static_cast<double>(n)), 1);
      FoldIdx f;
      std::size_t u = 0;
      for (; u < nu; ++u) {
        if (!f.train.empty() && static_cast<long long>(f.train.size()) >= tt)
          break;
        append(f.train, u);
      }
      for (; u < nu; ++u) {
        if (!f.val.empty() && static_cast<long long>(f.val.size()) >= tv)
          break;
        append(f.val, u);
      }
      for (; u < nu; ++u) append(f.test, u);
      if (f.val.empty() || f.test.empty())
        throw SplitError("holdout leaves an empty validation or test fold");
      folds.push_back(std::move(f));
      break;
    }
    case SplitKind::kfold: {
      const std::size_t k = cfg.folds;
      if (nu < k) throw SplitError("fewer split units than folds");
      std::vector<std::vector<std::size_t>> chunk(k);
      for (std::size_t u = 0; u < nu; ++u) {
        const auto& r = units[order[u]];
        chunk[u % k].insert(chunk[u % k].end(), r.begin(), r.end());
      }
      for (std::size_t i = 0; i < k; ++i) {
        FoldIdx f;
        f.test = chunk[i];
        f.val = chunk[(i + 1) % k];
        for (std::size_t c = 0; c < k; ++c) {
          if (c == i || c == (i + 1) % k) continue;
          f.train.insert(f.train.end(), chunk[c].begin(), chunk[c].end());
        }
        folds.push_back(std::move(f));
      }
      break;
    }
  }
  return folds;
}

}  // namespace detail

/// Feature rows, aligned labels, and per-window bookkeeping for one session.
struct SessionRows {
  std::vector<FeatureVector> features;
  std::vector<Label> labels;
  std::vector<double> ratios;       ///< NaN when labels came from events
  std::vector<double> start_times;  ///< frame-relative, seconds
};

/// Stages 1-3 of the run loop (label, window, extract), shared by the batch
/// runner and the standalone label/extract commands. EEG percentile
/// thresholds are computed over the configured population before any split
/// exists; event labels are derived per window from the session's task
/// intervals.
inline std::vector<SessionRows> build_session_rows(
    const std::vector<Session>& sessions, const PipelineConfig& cfg) {
  cfg.validate();
  if (sessions.empty()) throw EmptyInput("no sessions given");

  const bool eeg_labels = cfg.label_source == LabelSourceKind::eeg;
  std::vector<std::vector<DrowsinessRatio>> ratios(sessions.size());
  std::vector<std::vector<Label>> labels(sessions.size());
  if (eeg_labels) {
    detail::run_stage("label", [&] {
      for (std::size_t s = 0; s < sessions.size(); ++s)
        ratios[s] = ratio_per_window(sessions[s].frame, cfg.window);

      std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;
      if (cfg.label_population == LabelPopulation::pooled) {
        groups.push_back({"all", {}});
        for (std::size_t s = 0; s < sessions.size(); ++s)
          groups[0].second.push_back(s);
      } else {
        for (std::size_t s = 0; s < sessions.size(); ++s) {
          const auto& id = sessions[s].frame.subject_id;
          auto it = std::find_if(groups.begin(), groups.end(),
                                 [&](const auto& g) { return g.first == id; });
          if (it == groups.end())
            groups.push_back({id, {s}});
          else
            it->second.push_back(s);
        }
      }
      for (const auto& [id, members] : groups) {
        std::vector<DrowsinessRatio> flat;
        for (std::size_t s : members)
          flat.insert(flat.end(), ratios[s].begin(), ratios[s].end());
        const std::vector<Label> pooled =
            label_by_eeg(flat, cfg.awake_fraction, cfg.drowsy_fraction);
        std::size_t off = 0;
        for (std::size_t s : members) {
          labels[s].assign(pooled.begin() + static_cast<std::ptrdiff_t>(off),
                           pooled.begin() + static_cast<std::ptrdiff_t>(
                                                off + ratios[s].size()));
          off += ratios[s].size();
        }
      }
      return 0;
    });
  }

  const bool session_wavelet = cfg.wavelet_scope == WaveletScope::session;
  std::vector<FeatureFamily> window_families;
  for (auto f : cfg.families)
    if (!(session_wavelet && f == FeatureFamily::wavelet8))
      window_families.push_back(f);

  std::vector<SessionRows> rows(sessions.size());
  detail::run_stage("extract", [&] {
    for (std::size_t s = 0; s < sessions.size(); ++s) {
      const SignalFrame& frame = sessions[s].frame;
      std::vector<Window> windows;
      if (!window_families.empty())
        windows = detail::run_stage("window", [&] {
          return segment_multirate(frame, cfg.window,
                                   requests_for(window_families));
        });

      std::vector<FeatureVector> stream_feats;
      if (session_wavelet) {
        const Channel& theta = frame.channel("theta");
        std::vector<double> x =
            std::abs(theta.rate - cfg.window.rate) <= 1e-9 * theta.rate
                ? theta.samples
                : resample(theta.samples, theta.rate, cfg.window.rate);
        stream_feats = session_wavelet_features(x, cfg.window);
      }

      std::size_t count = std::numeric_limits<std::size_t>::max();
      if (!window_families.empty()) count = std::min(count, windows.size());
      if (session_wavelet) count = std::min(count, stream_feats.size());
      if (eeg_labels) count = std::min(count, labels[s].size());
      if (count == std::numeric_limits<std::size_t>::max()) count = 0;

      std::vector<Label> evt_labels;
      if (!eeg_labels) {
        std::vector<Window> marks;
        if (!window_families.empty()) {
          marks = windows;
        } else {
          const auto stride = cfg.window.stride();
          for (std::size_t i = 0; i < count; ++i) {
            Window w;
            w.index = i;
            w.start_sample = static_cast<std::int64_t>(i) * stride;
            w.base_rate = cfg.window.rate;
            marks.push_back(w);
          }
        }
        marks.resize(std::min<std::size_t>(marks.size(), count));
        std::vector<EventInterval> shifted = sessions[s].events;
        for (auto& e : shifted) {
          e.start -= frame.start;
          e.end -= frame.start;
        }
        evt_labels = detail::run_stage("label", [&] {
          return label_by_event(marks, cfg.window, shifted, cfg.event_margin);
        });
      }

      const double stride_s =
          static_cast<double>(cfg.window.stride()) / cfg.window.rate;
      for (std::size_t i = 0; i < count; ++i) {
        FeatureVector fv;
        fv.window_index = i;
        for (auto fam : cfg.families) {
          if (fam == FeatureFamily::wavelet8 && session_wavelet)
            fv.append(stream_feats[i]);
          else
            fv.append(extract_family(fam, windows[i]));
        }
        rows[s].features.push_back(std::move(fv));
        rows[s].labels.push_back(eeg_labels ? labels[s][i] : evt_labels[i]);
        rows[s].ratios.push_back(
            eeg_labels ? ratios[s][i].value
                       : std::numeric_limits<double>::quiet_NaN());
        rows[s].start_times.push_back(static_cast<double>(i) * stride_s);
      }
    }
    return 0;
  });
  return rows;
}

/// Runs label -> window -> extract -> select -> tune -> fit -> evaluate over
/// the given sessions. Any stage failure is rethrown as a PipelineError naming
/// the stage. Deliberately leaky settings require `leakage_ack`.
inline ExperimentResult run_experiment(const std::vector<Session>& sessions,
                                       const PipelineConfig& cfg) {
  const auto t_begin = std::chrono::steady_clock::now();
  cfg.validate();
  if (sessions.empty()) throw EmptyInput("no sessions to run on");
  if (cfg.is_leaky() && !cfg.leakage_ack)
    throw LeakageNotAcknowledged(
        "configuration evaluates on data it trained or selected on; "
        "set leakage_ack to proceed");

  ExperimentResult result;
  result.config = cfg;
  result.sessions = sessions.size();

  const std::vector<SessionRows> rows = build_session_rows(sessions, cfg);

  Dataset ds;
  std::vector<std::size_t> row_groups;
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    result.windows += rows[s].features.size();
    Dataset part = Dataset::from_features(rows[s].features, rows[s].labels);
    if (part.size() > 0) {
      row_groups.insert(row_groups.end(), part.size(), s);
      ds.append_rows(part);
    }
  }
  result.labeled = ds.size();
  result.awake = ds.count(0);
  result.drowsy = ds.count(1);
  if (ds.size() == 0)
    throw PipelineError("label", "no labeled windows survive");

  const std::vector<detail::FoldIdx> folds =
      detail::run_stage("split", [&] {
        return detail::make_folds(ds.size(), cfg,
                                  cfg.group_by_session ? &row_groups : nullptr);
      });

  std::vector<std::pair<double, int>> pooled_scores;
  for (std::size_t fi = 0; fi < folds.size(); ++fi) {
    const detail::FoldIdx& fold = folds[fi];
    std::vector<char> is_test(ds.size(), 0);
    for (std::size_t i : fold.test) is_test[i] = 1;

    FoldResult fr;
    fr.fold = fi;
    fr.train_rows = fold.train.size();
    fr.val_rows = fold.val.size();
    fr.test_rows = fold.test.size();

    const Dataset tr = ds.subset_rows(fold.train);
    const Dataset va = ds.subset_rows(fold.val);

    // Stage 4, select.
    std::vector<std::size_t> cols;
    detail::run_stage("select", [&] {
      switch (cfg.selection) {
        case SelectionKind::none: {
          cols.resize(ds.dim());
          for (std::size_t c = 0; c < cols.size(); ++c) cols[c] = c;
          result.access.note("select", static_cast<int>(fi), "train",
                             fold.train, is_test);
          break;
        }
        case SelectionKind::anova_f: {
          result.access.note("select", static_cast<int>(fi), "train",
                             fold.train, is_test);
          cols = anova_f_topk(tr, cfg.top_k).indices;
          break;
        }
        case SelectionKind::t_test: {
          result.access.note("select", static_cast<int>(fi), "train",
                             fold.train, is_test);
          cols = t_test_filter(tr, cfg.alpha).indices;
          break;
        }
        case SelectionKind::wrapper: {
          result.access.note("select", static_cast<int>(fi), "train",
                             fold.train, is_test);
          result.access.note("select", static_cast<int>(fi), "val", fold.val,
                             is_test);
          WrapperOptions opt = cfg.wrapper;
          opt.seed = derive_seed(cfg.seed, 11 + fi);
          const std::uint64_t fit_seed = derive_seed(cfg.seed, 13 + fi);
          auto fitness = [&](const std::vector<std::size_t>& sub) {
            const Model m =
                fit_model(tr.select_columns(sub), cfg.model, fit_seed);
            const Dataset vs = va.select_columns(sub);
            return auc_of(roc_curve(model_scores(m, vs), vs.y));
          };
          cols = wrapper_select(tr.feature_names, fitness, opt).indices;
          break;
        }
      }
      return 0;
    });
    std::sort(cols.begin(), cols.end());
    for (std::size_t c : cols) fr.selected.push_back(ds.feature_names[c]);

    const Dataset tr2 = tr.select_columns(cols);
    const Dataset va2 = va.select_columns(cols);

    // Stage 5, tune.
    ModelConfig chosen = cfg.model;
    if (cfg.tune.enabled) {
      detail::run_stage("tune", [&] {
        result.access.note("tune", static_cast<int>(fi), "train", fold.train,
                           is_test);
        result.access.note("tune", static_cast<int>(fi), "val", fold.val,
                           is_test);
        const TuneResult t = tune(cfg.tune.grid, tr2, va2, cfg.tune.budget,
                                  derive_seed(cfg.seed, 17 + fi));
        chosen = cfg.tune.grid[t.best];
        fr.tuned_candidate = static_cast<long>(t.best);
        return 0;
      });
    }

    // Stage 6, fit.
    result.access.note("fit", static_cast<int>(fi), "train", fold.train,
                       is_test);
    const Model model = detail::run_stage("fit", [&] {
      return fit_model(tr2, chosen, derive_seed(cfg.seed, 19 + fi));
    });

    // Stage 7, evaluate.
    detail::run_stage("evaluate", [&] {
      std::vector<std::size_t> target;
      switch (cfg.eval_target) {
        case EvalTarget::train: target = fold.train; break;
        case EvalTarget::val: target = fold.val; break;
        case EvalTarget::test: target = fold.test; break;
        case EvalTarget::all: {
          target.resize(ds.size());
          for (std::size_t i = 0; i < target.size(); ++i) target[i] = i;
          break;
        }
      }
      result.access.note("evaluate", static_cast<int>(fi),
                         to_string(cfg.eval_target), target, is_test);
      const Dataset ev = ds.subset_rows(target).select_columns(cols);
      const std::vector<double> scores = model_scores(model, ev);
      const double thr =
          std::isnan(cfg.threshold) ? model.default_threshold : cfg.threshold;
      fr.metrics = evaluate_scores(scores, ev.y, thr);
      fr.roc = roc_curve(scores, ev.y);
      for (std::size_t i = 0; i < scores.size(); ++i)
        pooled_scores.push_back({scores[i], ev.y[i]});
      return 0;
    });

    if (fi == 0) {
      result.final_model = model;
      result.final_features = fr.selected;
    }
    result.folds.push_back(std::move(fr));
  }

  // Averaged metrics plus one ROC over the pooled evaluation scores.
  Metrics& m = result.mean;
  m.auc = 0.0;
  for (const auto& fr : result.folds) {
    m.accuracy += fr.metrics.accuracy;
    m.precision += fr.metrics.precision;
    m.recall += fr.metrics.recall;
    m.f1 += fr.metrics.f1;
    m.auc += fr.metrics.auc;
    m.tp += fr.metrics.tp;
    m.fp += fr.metrics.fp;
    m.tn += fr.metrics.tn;
    m.fn += fr.metrics.fn;
  }
  const double nf = static_cast<double>(result.folds.size());
  m.accuracy /= nf;
  m.precision /= nf;
  m.recall /= nf;
  m.f1 /= nf;
  m.auc /= nf;
  m.threshold = result.folds.front().metrics.threshold;
  {
    std::vector<double> s(pooled_scores.size());
    std::vector<int> y(pooled_scores.size());
    for (std::size_t i = 0; i < pooled_scores.size(); ++i) {
      s[i] = pooled_scores[i].first;
      y[i] = pooled_scores[i].second;
    }
    result.pooled_roc = roc_curve(s, y);
  }

  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin)
          .count();
  return result;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline nlohmann::json metrics_to_json(const Metrics& m) {
  return nlohmann::json{{"accuracy", m.accuracy}, {"precision", m.precision},
                        {"recall", m.recall},     {"f1", m.f1},
                        {"auc", m.auc},           {"threshold", m.threshold},
                        {"tp", m.tp},             {"fp", m.fp},
                        {"tn", m.tn},             {"fn", m.fn}};
}

inline nlohmann::json result_to_json(const ExperimentResult& r) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : r.folds) {
    folds.push_back({{"fold", f.fold},
                     {"metrics", metrics_to_json(f.metrics)},
                     {"selected", f.selected},
                     {"train_rows", f.train_rows},
                     {"val_rows", f.val_rows},
                     {"test_rows", f.test_rows},
                     {"tuned_candidate", f.tuned_candidate}});
  }
  nlohmann::json access = nlohmann::json::array();
  for (const auto& a : r.access.records)
    access.push_back({{"stage", a.stage},
                      {"fold", a.fold},
                      {"partition", a.partition},
                      {"rows", a.rows},
                      {"test_overlap", a.test_overlap}});
  return nlohmann::json{
      {"config", config_to_json(r.config)},
      {"dataset",
       {{"sessions", r.sessions},
        {"windows", r.windows},
        {"labeled", r.labeled},
        {"awake", r.awake},
        {"drowsy", r.drowsy}}},
      {"metrics", metrics_to_json(r.mean)},
      {"folds", std::move(folds)},
      {"access_log", std::move(access)},
      {"pre_eval_test_reads", r.access.pre_eval_test_reads()},
      {"leaky_by_design", r.config.is_leaky()},
      {"version", kToolVersion}};
}

struct ComparisonEntry {
  std::string method;
  ExperimentResult result;
};

/// Runs several presets (or custom configs) against the same sessions, one
/// task per method. Each run is seeded independently, so parallel execution
/// returns the same results as a serial loop.
inline std::vector<ComparisonEntry> compare_methods(
    const std::vector<Session>& sessions,
    const std::vector<std::pair<std::string, PipelineConfig>>& configs) {
  if (configs.empty()) throw ConfigError("nothing to compare");
  std::vector<std::future<ExperimentResult>> tasks;
  tasks.reserve(configs.size());
  for (const auto& [name, cfg] : configs)
    tasks.push_back(std::async(std::launch::async,
                               [&sessions, cfg] { return run_experiment(sessions, cfg); }));
  std::vector<ComparisonEntry> out;
  for (std::size_t i = 0; i < configs.size(); ++i)
    out.push_back({configs[i].first, tasks[i].get()});
  return out;
}

/// Deterministic comparison report. Volatile values (timestamps, wall time)
/// live only under the "run" key so consumers can strip that one key when
/// byte-comparing runs. Mixed label sources across methods are legal but get
/// flagged, since their ground truths are not directly comparable.
inline nlohmann::json comparison_report(const std::vector<ComparisonEntry>& entries,
                                        const std::string& generated_at) {
  nlohmann::json methods;
  for (const auto& e : entries) methods[e.method] = result_to_json(e.result);
  nlohmann::json j;
  j["methods"] = std::move(methods);
  j["version"] = kToolVersion;
  nlohmann::json warnings = nlohmann::json::array();
  for (std::size_t i = 1; i < entries.size(); ++i)
    if (entries[i].result.config.label_source !=
        entries[0].result.config.label_source) {
      warnings.push_back(
          "methods mix label sources (" + entries[0].method + ": " +
          to_string(entries[0].result.config.label_source) + ", " +
          entries[i].method + ": " +
          to_string(entries[i].result.config.label_source) +
          "); metrics are not directly comparable");
      break;
    }
  j["warnings"] = std::move(warnings);
  double total = 0.0;
  for (const auto& e : entries) total += e.result.wall_seconds;
  j["run"] = {{"generated_at", generated_at}, {"elapsed_seconds", total}};
  return j;
}

inline void write_roc_csv(const std::filesystem::path& path,
                          const std::vector<RocPoint>& roc) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write: " + path.string());
  out << "fpr,tpr,threshold\n";
  char buf[64];
  for (const auto& p : roc) {
    std::snprintf(buf, sizeof buf, "%.17g", p.fpr);
    out << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", p.tpr);
    out << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", p.threshold);
    out << buf << '\n';
  }
}

/// Self-contained SVG overlay of one ROC curve per method.
inline void write_roc_svg(
    const std::filesystem::path& path,
    const std::vector<std::pair<std::string, std::vector<RocPoint>>>& curves) {
  static const char* palette[] = {"#1b6ca8", "#c44536", "#2a9d4e",
                                  "#7d4fa0", "#b8860b", "#3a3a3a"};
  const double x0 = 60, y0 = 20, w = 420, h = 420;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write: " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" "
         "height=\"510\" viewBox=\"0 0 640 510\">\n"
      << "<rect width=\"640\" height=\"510\" fill=\"white\"/>\n"
      << "<rect x=\"60\" y=\"20\" width=\"420\" height=\"420\" fill=\"none\" "
         "stroke=\"#333\"/>\n"
      << "<line x1=\"60\" y1=\"440\" x2=\"480\" y2=\"20\" stroke=\"#bbb\" "
         "stroke-dasharray=\"6,4\"/>\n"
      << "<text x=\"250\" y=\"485\" font-family=\"sans-serif\" "
         "font-size=\"14\">false positive rate</text>\n"
      << "<text x=\"18\" y=\"250\" font-family=\"sans-serif\" font-size=\"14\" "
         "transform=\"rotate(-90 18 250)\">true positive rate</text>\n";
  char buf[128];
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const char* color = palette[c % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : curves[c].second) {
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", x0 + p.fpr * w,
                    y0 + h - p.tpr * h);
      out << buf;
    }
    out << "\"/>\n";
    const double ly = 40.0 + 22.0 * static_cast<double>(c);
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"500\" y=\"%.0f\" width=\"14\" height=\"14\" "
                  "fill=\"%s\"/>\n",
                  ly - 11.0, color);
    out << buf;
    out << "<text x=\"520\" y=\"" << ly
        << "\" font-family=\"sans-serif\" font-size=\"13\">"
        << curves[c].first << "</text>\n";
  }
  out << "</svg>\n";
}

inline std::string metrics_table(const std::vector<ComparisonEntry>& entries) {
  std::string s;
  char line[256];
  std::snprintf(line, sizeof line, "%-10s %9s %9s %9s %9s %9s\n", "method",
                "accuracy", "precision", "recall", "f1", "auc");
  s += line;
  for (const auto& e : entries) {
    const Metrics& m = e.result.mean;
    std::snprintf(line, sizeof line, "%-10s %9.4f %9.4f %9.4f %9.4f %9.4f\n",
                  e.method.c_str(), m.accuracy, m.precision, m.recall, m.f1,
                  m.auc);
    s += line;
  }
  return s;
}

/// Saves a fitted model together with the feature names it expects.
inline void save_trained(const std::filesystem::path& path, const Model& m,
                         const std::vector<std::string>& features) {
  nlohmann::json j = model_to_json(m);
  j["features"] = features;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model file: " + path.string());
  out << j.dump(2) << '\n';
}

struct TrainedModel {
  Model model;
  std::vector<std::string> features;
};

inline TrainedModel load_trained(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError("model parse error: " + std::string(e.what()));
  }
  TrainedModel t;
  t.model = model_from_json(j);
  if (j.contains("features"))
    t.features = j.at("features").get<std::vector<std::string>>();
  return t;
}

}  // namespace ddd
