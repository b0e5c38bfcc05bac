#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "ddd/errors.hpp"
#include "ddd/numeric.hpp"
#include "ddd/table.hpp"

namespace ddd {

enum class ModelKind { rf, svm, logit };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::rf: return "rf";
    case ModelKind::svm: return "svm";
    case ModelKind::logit: return "logit";
  }
  return "?";
}

inline ModelKind model_kind_from(const std::string& s) {
  if (s == "rf") return ModelKind::rf;
  if (s == "svm") return ModelKind::svm;
  if (s == "logit") return ModelKind::logit;
  throw ConfigError("unknown model kind: " + s);
}

/// Per-feature affine map to zero mean and unit spread, frozen at fit time.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> sd;

  void fit(const Dataset& ds) {
    const std::size_t d = ds.dim();
    mean.assign(d, 0.0);
    sd.assign(d, 1.0);
    const double n = static_cast<double>(ds.size());
    for (const auto& row : ds.x)
      for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
    for (std::size_t j = 0; j < d; ++j) mean[j] /= n;
    std::vector<double> ss(d, 0.0);
    for (const auto& row : ds.x)
      for (std::size_t j = 0; j < d; ++j) {
        const double dv = row[j] - mean[j];
        ss[j] += dv * dv;
      }
    for (std::size_t j = 0; j < d; ++j) {
      const double v = std::sqrt(ss[j] / n);
      sd[j] = v > 0.0 ? v : 1.0;
    }
  }

  std::vector<double> transform(const std::vector<double>& row) const {
    std::vector<double> z(row.size());
    for (std::size_t j = 0; j < row.size(); ++j)
      z[j] = (row[j] - mean[j]) / sd[j];
    return z;
  }
};

// ---------------------------------------------------------------------------
// Random forest
// ---------------------------------------------------------------------------

struct RfConfig {
  std::size_t n_trees = 200;
  std::size_t max_depth = 0;  ///< 0 means unlimited
  std::size_t min_leaf = 1;
  std::size_t mtry = 0;  ///< 0 means ceil(sqrt(d))
  bool bootstrap = true;
};

struct TreeNode {
  std::int32_t feature = -1;  ///< -1 marks a leaf
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::int32_t label = 0;
};

struct Tree {
  std::vector<TreeNode> nodes;

  int predict(const std::vector<double>& row) const {
    std::int32_t i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      const TreeNode& n = nodes[static_cast<std::size_t>(i)];
      i = row[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left
                                                                 : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].label;
  }
};

struct RfModel {
  RfConfig config;
  std::vector<std::string> feature_names;
  std::vector<Tree> trees;
};

namespace detail {

inline double gini(double c0, double c1) {
  const double n = c0 + c1;
  if (n <= 0.0) return 0.0;
  const double p0 = c0 / n, p1 = c1 / n;
  return 1.0 - p0 * p0 - p1 * p1;
}

struct SplitChoice {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double decrease = 0.0;
};

class TreeGrower {
 public:
  TreeGrower(const Dataset& ds, const RfConfig& cfg, Rng& rng)
      : ds_(ds), cfg_(cfg), rng_(rng) {
    mtry_ = cfg.mtry > 0 ? std::min(cfg.mtry, ds.dim())
                         : static_cast<std::size_t>(
                               std::ceil(std::sqrt(static_cast<double>(ds.dim()))));
  }

  Tree grow(std::vector<std::size_t> rows) {
    Tree t;
    build(t, std::move(rows), 0);
    return t;
  }

 private:
  std::int32_t build(Tree& t, std::vector<std::size_t> rows, std::size_t depth) {
    const auto id = static_cast<std::int32_t>(t.nodes.size());
    t.nodes.emplace_back();

    std::size_t c1 = 0;
    for (std::size_t r : rows) c1 += static_cast<std::size_t>(ds_.y[r]);
    const std::size_t c0 = rows.size() - c1;

    const bool pure = c0 == 0 || c1 == 0;
    const bool too_small = rows.size() < 2 * cfg_.min_leaf;
    const bool too_deep = cfg_.max_depth > 0 && depth >= cfg_.max_depth;
    SplitChoice split;
    if (!pure && !too_small && !too_deep) split = best_split(rows, c0, c1);

    if (!split.found) {
      t.nodes[static_cast<std::size_t>(id)].label = c1 > c0 ? 1 : 0;
      return id;
    }

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows)
      (ds_.x[r][split.feature] < split.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    const std::int32_t li = build(t, std::move(left), depth + 1);
    const std::int32_t ri = build(t, std::move(right), depth + 1);
    TreeNode& n = t.nodes[static_cast<std::size_t>(id)];
    n.feature = static_cast<std::int32_t>(split.feature);
    n.threshold = split.threshold;
    n.left = li;
    n.right = ri;
    return id;
  }

  SplitChoice best_split(const std::vector<std::size_t>& rows, std::size_t c0,
                         std::size_t c1) {
    std::vector<std::size_t> feats(ds_.dim());
    for (std::size_t j = 0; j < feats.size(); ++j) feats[j] = j;
    rng_.shuffle(feats);
    feats.resize(mtry_);
    std::sort(feats.begin(), feats.end());

    const double n = static_cast<double>(rows.size());
    const double parent =
        gini(static_cast<double>(c0), static_cast<double>(c1));

    SplitChoice best;
    std::vector<std::pair<double, int>> vals(rows.size());
    for (std::size_t f : feats) {
      for (std::size_t i = 0; i < rows.size(); ++i)
        vals[i] = {ds_.x[rows[i]][f], ds_.y[rows[i]]};
      std::sort(vals.begin(), vals.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });

      double l0 = 0.0, l1 = 0.0;
      for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
        if (vals[i].second == 1)
          l1 += 1.0;
        else
          l0 += 1.0;
        if (!(vals[i].first < vals[i + 1].first)) continue;
        const double nl = l0 + l1, nr = n - nl;
        if (nl < static_cast<double>(cfg_.min_leaf) ||
            nr < static_cast<double>(cfg_.min_leaf))
          continue;
        const double r0 = static_cast<double>(c0) - l0;
        const double r1 = static_cast<double>(c1) - l1;
        const double dec =
            parent - (nl * gini(l0, l1) + nr * gini(r0, r1)) / n;
        if (dec > best.decrease + 1e-12) {
          best.found = true;
          best.feature = f;
          best.threshold = 0.5 * (vals[i].first + vals[i + 1].first);
          best.decrease = dec;
        }
      }
    }
    return best;
  }

  const Dataset& ds_;
  const RfConfig& cfg_;
  Rng& rng_;
  std::size_t mtry_ = 0;
};

}  // namespace detail

/// Bagged CART forest. Each tree draws its own bootstrap sample and its own
/// per-node feature subsets from a seed derived off `seed` and the tree index,
/// so refitting with the same seed reproduces the forest exactly.
inline RfModel fit_rf(const Dataset& ds, const RfConfig& cfg,
                      std::uint64_t seed) {
  if (ds.size() == 0) throw EmptyInput("cannot fit on an empty dataset");
  if (ds.count(0) == 0 || ds.count(1) == 0)
    throw DegenerateLabels("training set must contain both classes");
  if (cfg.n_trees == 0) throw ConfigError("forest needs at least one tree");

  RfModel model;
  model.config = cfg;
  model.feature_names = ds.feature_names;
  model.trees.assign(cfg.n_trees, Tree{});
  const std::size_t n = ds.size();

  // Trees are grown from per-tree seed streams, so growing them on several
  // threads yields the exact forest a serial loop would.
  const auto grow_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t t = lo; t < hi; ++t) {
      Rng rng(derive_seed(seed, t));
      std::vector<std::size_t> rows(n);
      if (cfg.bootstrap)
        for (std::size_t i = 0; i < n; ++i) rows[i] = rng.index(n);
      else
        for (std::size_t i = 0; i < n; ++i) rows[i] = i;
      detail::TreeGrower grower(ds, cfg, rng);
      model.trees[t] = grower.grow(std::move(rows));
    }
  };
  const std::size_t workers =
      std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()),
                            cfg.n_trees);
  if (workers <= 1) {
    grow_range(0, cfg.n_trees);
  } else {
    std::vector<std::thread> pool;
    const std::size_t per = (cfg.n_trees + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t lo = w * per;
      const std::size_t hi = std::min(cfg.n_trees, lo + per);
      if (lo >= hi) break;
      pool.emplace_back(grow_range, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  return model;
}

/// Fraction of trees voting drowsy.
inline double rf_score(const RfModel& m, const std::vector<double>& row) {
  std::size_t votes = 0;
  for (const auto& t : m.trees) votes += static_cast<std::size_t>(t.predict(row));
  return static_cast<double>(votes) / static_cast<double>(m.trees.size());
}

// ---------------------------------------------------------------------------
// Support vector machine (SMO)
// ---------------------------------------------------------------------------

struct SvmConfig {
  double c = 1.0;
  double gamma = 0.0;  ///< 0 means 1 / (d * mean standardized variance)
  double tol = 1e-3;
  std::size_t max_sweeps = 1000;
};

struct SvmModel {
  Standardizer standardizer;
  std::vector<std::vector<double>> support_vectors;  ///< standardized
  std::vector<double> coef;                          ///< alpha_i * y_i
  double bias = 0.0;
  double gamma = 0.0;
  double c = 1.0;
};

namespace detail {

inline double rbf(const std::vector<double>& a, const std::vector<double>& b,
                  double gamma) {
  double d2 = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

/// Sequential minimal optimization on the standardized data with a full
/// kernel cache. The working-pair heuristics are deterministic: scans start
/// at index zero and the partner maximizes |E1 - E2|.
class SmoSolver {
 public:
  SmoSolver(const std::vector<std::vector<double>>& z, const std::vector<double>& y,
            double c, double gamma, double tol, std::size_t max_sweeps)
      : z_(z), y_(y), c_(c), gamma_(gamma), tol_(tol), max_sweeps_(max_sweeps) {
    const std::size_t n = z.size();
    alpha_.assign(n, 0.0);
    error_.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) error_[i] = -y_[i];
    gram_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      gram_[i].resize(n);
      for (std::size_t j = 0; j <= i; ++j) {
        const double k = rbf(z[i], z[j], gamma_);
        gram_[i][j] = k;
        gram_[j][i] = k;
      }
    }
  }

  void solve() {
    const std::size_t n = z_.size();
    bool examine_all = true;
    for (std::size_t sweep = 0; sweep < max_sweeps_; ++sweep) {
      std::size_t changed = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!examine_all && !non_bound(i)) continue;
        changed += examine(i) ? 1 : 0;
      }
      if (examine_all) {
        if (changed == 0) break;
        examine_all = false;
      } else if (changed == 0) {
        examine_all = true;
      }
    }
  }

  const std::vector<double>& alpha() const { return alpha_; }
  double bias() const { return b_; }

 private:
  bool non_bound(std::size_t i) const {
    return alpha_[i] > 1e-12 && alpha_[i] < c_ - 1e-12;
  }

  bool examine(std::size_t i2) {
    const double y2 = y_[i2];
    const double a2 = alpha_[i2];
    const double e2 = error_[i2];
    const double r2 = e2 * y2;
    if (!((r2 < -tol_ && a2 < c_) || (r2 > tol_ && a2 > 0.0))) return false;

    std::size_t best = i2;
    double best_gap = -1.0;
    for (std::size_t i = 0; i < alpha_.size(); ++i) {
      if (i == i2 || !non_bound(i)) continue;
      const double gap = std::fabs(error_[i] - e2);
      if (gap > best_gap) {
        best_gap = gap;
        best = i;
      }
    }
    if (best != i2 && step(best, i2)) return true;

    for (std::size_t i = 0; i < alpha_.size(); ++i)
      if (i != i2 && non_bound(i) && step(i, i2)) return true;
    for (std::size_t i = 0; i < alpha_.size(); ++i)
      if (i != i2 && !non_bound(i) && step(i, i2)) return true;
    return false;
  }

  bool step(std::size_t i1, std::size_t i2) {
    if (i1 == i2) return false;
    const double a1 = alpha_[i1], a2 = alpha_[i2];
    const double y1 = y_[i1], y2 = y_[i2];
    const double e1 = error_[i1], e2 = error_[i2];
    const double s = y1 * y2;

    double lo, hi;
    if (s < 0.0) {
      lo = std::max(0.0, a2 - a1);
      hi = std::min(c_, c_ + a2 - a1);
    } else {
      lo = std::max(0.0, a1 + a2 - c_);
      hi = std::min(c_, a1 + a2);
    }
    if (lo >= hi) return false;

    const double k11 = gram_[i1][i1], k12 = gram_[i1][i2], k22 = gram_[i2][i2];
    const double eta = k11 + k22 - 2.0 * k12;
    if (eta <= 0.0) return false;

    double a2n = a2 + y2 * (e1 - e2) / eta;
    a2n = std::clamp(a2n, lo, hi);
    if (std::fabs(a2n - a2) < 1e-12 * (a2n + a2 + 1e-12)) return false;
    const double a1n = a1 + s * (a2 - a2n);

    const double b1 = b_ - e1 - y1 * (a1n - a1) * k11 - y2 * (a2n - a2) * k12;
    const double b2 = b_ - e2 - y1 * (a1n - a1) * k12 - y2 * (a2n - a2) * k22;
    double bn;
    if (a1n > 1e-12 && a1n < c_ - 1e-12)
      bn = b1;
    else if (a2n > 1e-12 && a2n < c_ - 1e-12)
      bn = b2;
    else
      bn = 0.5 * (b1 + b2);

    const double db = bn - b_;
    for (std::size_t i = 0; i < alpha_.size(); ++i)
      error_[i] += y1 * (a1n - a1) * gram_[i1][i] +
                   y2 * (a2n - a2) * gram_[i2][i] + db;
    alpha_[i1] = a1n;
    alpha_[i2] = a2n;
    b_ = bn;
    return true;
  }

  const std::vector<std::vector<double>>& z_;
  const std::vector<double>& y_;
  double c_, gamma_, tol_;
  std::size_t max_sweeps_;
  std::vector<double> alpha_, error_;
  std::vector<std::vector<double>> gram_;
  double b_ = 0.0;
};

}  // namespace detail

inline SvmModel fit_svm(const Dataset& ds, const SvmConfig& cfg) {
  if (ds.size() == 0) throw EmptyInput("cannot fit on an empty dataset");
  if (ds.count(0) == 0 || ds.count(1) == 0)
    throw DegenerateLabels("training set must contain both classes");
  if (!(cfg.c > 0.0)) throw ConfigError("svm c must be positive");

  SvmModel m;
  m.standardizer.fit(ds);
  std::vector<std::vector<double>> z(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i)
    z[i] = m.standardizer.transform(ds.x[i]);

  double gamma = cfg.gamma;
  if (gamma <= 0.0) {
    double var = 0.0;
    std::vector<double> colmean(ds.dim(), 0.0);
    for (const auto& row : z)
      for (std::size_t j = 0; j < row.size(); ++j) colmean[j] += row[j];
    for (double& v : colmean) v /= static_cast<double>(z.size());
    for (const auto& row : z)
      for (std::size_t j = 0; j < row.size(); ++j) {
        const double d = row[j] - colmean[j];
        var += d * d;
      }
    var /= static_cast<double>(z.size()) * static_cast<double>(ds.dim());
    gamma = 1.0 / (static_cast<double>(ds.dim()) * std::max(var, 1e-12));
  }
  m.gamma = gamma;
  m.c = cfg.c;

  std::vector<double> y(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) y[i] = ds.y[i] == 1 ? 1.0 : -1.0;

  detail::SmoSolver solver(z, y, cfg.c, gamma, cfg.tol, cfg.max_sweeps);
  solver.solve();
  m.bias = solver.bias();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (solver.alpha()[i] <= 1e-12) continue;
    m.support_vectors.push_back(z[i]);
    m.coef.push_back(solver.alpha()[i] * y[i]);
  }
  return m;
}

/// Signed decision value; positive means drowsy.
inline double svm_score(const SvmModel& m, const std::vector<double>& row) {
  const std::vector<double> z = m.standardizer.transform(row);
  double f = m.bias;
  for (std::size_t k = 0; k < m.support_vectors.size(); ++k)
    f += m.coef[k] * detail::rbf(m.support_vectors[k], z, m.gamma);
  return f;
}

// ---------------------------------------------------------------------------
// Regularized logistic model (sequence-free stand-in baseline)
// ---------------------------------------------------------------------------

struct LogitConfig {
  double l2 = 1e-3;
  std::size_t max_iter = 500;
  double tol = 1e-7;
};

struct LogitModel {
  Standardizer standardizer;
  std::vector<double> w;
  double bias = 0.0;
};

namespace detail {

inline double log1pexp(double s) {
  return s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
}

}  // namespace detail

inline LogitModel fit_logit(const Dataset& ds, const LogitConfig& cfg) {
  if (ds.size() == 0) throw EmptyInput("cannot fit on an empty dataset");
  if (ds.count(0) == 0 || ds.count(1) == 0)
    throw DegenerateLabels("training set must contain both classes");

  LogitModel m;
  m.standardizer.fit(ds);
  const std::size_t n = ds.size(), d = ds.dim();
  std::vector<std::vector<double>> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = m.standardizer.transform(ds.x[i]);

  m.w.assign(d, 0.0);
  double b = 0.0;

  auto loss = [&](const std::vector<double>& w, double bias) {
    double l = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = bias;
      for (std::size_t j = 0; j < d; ++j) s += w[j] * z[i][j];
      l += detail::log1pexp(s) - (ds.y[i] == 1 ? s : 0.0);
    }
    l /= static_cast<double>(n);
    double reg = 0.0;
    for (double v : w) reg += v * v;
    return l + 0.5 * cfg.l2 * reg;
  };

  double cur = loss(m.w, b);
  for (std::size_t it = 0; it < cfg.max_iter; ++it) {
    std::vector<double> gw(d, 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = b;
      for (std::size_t j = 0; j < d; ++j) s += m.w[j] * z[i][j];
      const double p = 1.0 / (1.0 + std::exp(-s));
      const double r = p - (ds.y[i] == 1 ? 1.0 : 0.0);
      for (std::size_t j = 0; j < d; ++j) gw[j] += r * z[i][j];
      gb += r;
    }
    for (std::size_t j = 0; j < d; ++j)
      gw[j] = gw[j] / static_cast<double>(n) + cfg.l2 * m.w[j];
    gb /= static_cast<double>(n);

    double gmax = std::fabs(gb), gnorm2 = gb * gb;
    for (double v : gw) {
      gmax = std::max(gmax, std::fabs(v));
      gnorm2 += v * v;
    }
    if (gmax < cfg.tol) break;

    double t = 1.0;
    std::vector<double> wn(d);
    double bn, next = cur;
    for (int half = 0; half < 40; ++half) {
      for (std::size_t j = 0; j < d; ++j) wn[j] = m.w[j] - t * gw[j];
      bn = b - t * gb;
      next = loss(wn, bn);
      if (next <= cur - 1e-4 * t * gnorm2) break;
      t *= 0.5;
    }
    if (next >= cur) break;
    m.w = wn;
    b = bn;
    cur = next;
  }
  m.bias = b;
  return m;
}

inline double logit_score(const LogitModel& m, const std::vector<double>& row) {
  const std::vector<double> z = m.standardizer.transform(row);
  double s = m.bias;
  for (std::size_t j = 0; j < z.size(); ++j) s += m.w[j] * z[j];
  return 1.0 / (1.0 + std::exp(-s));
}

// ---------------------------------------------------------------------------
// Unified model handle
// ---------------------------------------------------------------------------

struct ModelConfig {
  ModelKind kind = ModelKind::rf;
  RfConfig rf;
  SvmConfig svm;
  LogitConfig logit;
};

struct Model {
  ModelKind kind = ModelKind::rf;
  RfModel rf;
  SvmModel svm;
  LogitModel logit;
  double default_threshold = 0.5;
};

inline Model fit_model(const Dataset& ds, const ModelConfig& cfg,
                       std::uint64_t seed) {
  Model m;
  m.kind = cfg.kind;
  switch (cfg.kind) {
    case ModelKind::rf:
      m.rf = fit_rf(ds, cfg.rf, seed);
      m.default_threshold = 0.5;
      break;
    case ModelKind::svm:
      m.svm = fit_svm(ds, cfg.svm);
      m.default_threshold = 0.0;
      break;
    case ModelKind::logit:
      m.logit = fit_logit(ds, cfg.logit);
      m.default_threshold = 0.5;
      break;
  }
  return m;
}

inline double model_score(const Model& m, const std::vector<double>& row) {
  switch (m.kind) {
    case ModelKind::rf: return rf_score(m.rf, row);
    case ModelKind::svm: return svm_score(m.svm, row);
    case ModelKind::logit: return logit_score(m.logit, row);
  }
  throw ConfigError("unknown model kind");
}

inline std::vector<double> model_scores(const Model& m, const Dataset& ds) {
  std::vector<double> s(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) s[i] = model_score(m, ds.x[i]);
  return s;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;
};

/// ROC over the distinct score values, highest threshold first. A single-class
/// score set degenerates to the two corner points.
inline std::vector<RocPoint> roc_curve(const std::vector<double>& scores,
                                       const std::vector<int>& y) {
  if (scores.size() != y.size()) throw ConfigError("scores/labels mismatch");
  double pos = 0.0, neg = 0.0;
  for (int v : y) (v == 1 ? pos : neg) += 1.0;
  const double inf = std::numeric_limits<double>::infinity();
  if (pos == 0.0 || neg == 0.0 || scores.empty())
    return {{0.0, 0.0, inf}, {1.0, 1.0, -inf}};

  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  std::vector<RocPoint> roc;
  roc.push_back({0.0, 0.0, inf});
  double tp = 0.0, fp = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      (y[order[i]] == 1 ? tp : fp) += 1.0;
      ++i;
    }
    roc.push_back({fp / neg, tp / pos, s});
  }
  return roc;
}

/// Trapezoidal area under the ROC; equals the tie-adjusted rank statistic.
inline double auc_of(const std::vector<RocPoint>& roc) {
  double a = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i)
    a += (roc[i].fpr - roc[i - 1].fpr) * 0.5 * (roc[i].tpr + roc[i - 1].tpr);
  return a;
}

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double auc = 0.5;
  double threshold = 0.5;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Thresholded confusion metrics plus AUC. A score at or above the threshold
/// predicts drowsy. Empty-denominator rates are reported as zero.
inline Metrics evaluate_scores(const std::vector<double>& scores,
                               const std::vector<int>& y, double threshold) {
  if (scores.size() != y.size()) throw ConfigError("scores/labels mismatch");
  if (scores.empty()) throw EmptyInput("nothing to evaluate");
  Metrics m;
  m.threshold = threshold;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    const bool truth = y[i] == 1;
    if (pred && truth)
      ++m.tp;
    else if (pred && !truth)
      ++m.fp;
    else if (!pred && !truth)
      ++m.tn;
    else
      ++m.fn;
  }
  const double n = static_cast<double>(scores.size());
  m.accuracy = static_cast<double>(m.tp + m.tn) / n;
  m.precision = (m.tp + m.fp) > 0
                    ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp)
                    : 0.0;
  m.recall = (m.tp + m.fn) > 0
                 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn)
                 : 0.0;
  m.f1 = (m.precision + m.recall) > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  m.auc = auc_of(roc_curve(scores, y));
  return m;
}

// ---------------------------------------------------------------------------
// Random-search tuning
// ---------------------------------------------------------------------------

struct TuneTrial {
  std::size_t candidate = 0;
  double auc = 0.0;
};

struct TuneResult {
  std::size_t best = 0;
  double best_auc = 0.0;
  std::vector<TuneTrial> trials;
};

/// Seeded random search without replacement over an explicit candidate list.
/// Each visited candidate is fitted on `train` and scored by AUC on `val`;
/// the first candidate reaching the best AUC wins.
inline TuneResult tune(const std::vector<ModelConfig>& candidates,
                       const Dataset& train, const Dataset& val,
                       std::size_t budget, std::uint64_t seed) {
  if (candidates.empty())
    throw InvalidSearchSpace("tuning needs at least one candidate");
  if (budget == 0) throw ConfigError("tuning budget must be positive");

  std::vector<std::size_t> order(candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  order.resize(std::min<std::size_t>(budget, order.size()));

  TuneResult out;
  out.best_auc = -1.0;
  for (std::size_t idx : order) {
    const Model m = fit_model(train, candidates[idx], derive_seed(seed, idx));
    const double auc = auc_of(roc_curve(model_scores(m, val), val.y));
    out.trials.push_back({idx, auc});
    if (auc > out.best_auc) {
      out.best_auc = auc;
      out.best = idx;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline nlohmann::json standardizer_to_json(const Standardizer& s) {
  return nlohmann::json{{"mean", s.mean}, {"sd", s.sd}};
}

inline Standardizer standardizer_from_json(const nlohmann::json& j) {
  Standardizer s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.sd = j.at("sd").get<std::vector<double>>();
  return s;
}

}  // namespace detail

inline nlohmann::json model_to_json(const Model& m) {
  nlohmann::json j;
  j["format_version"] = kModelFormatVersion;
  j["kind"] = to_string(m.kind);
  j["default_threshold"] = m.default_threshold;
  switch (m.kind) {
    case ModelKind::rf: {
      nlohmann::json trees = nlohmann::json::array();
      for (const auto& t : m.rf.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& n : t.nodes)
          nodes.push_back({{"f", n.feature},
                           {"thr", n.threshold},
                           {"l", n.left},
                           {"r", n.right},
                           {"y", n.label}});
        trees.push_back(std::move(nodes));
      }
      j["rf"] = {{"n_trees", m.rf.config.n_trees},
                 {"max_depth", m.rf.config.max_depth},
                 {"min_leaf", m.rf.config.min_leaf},
                 {"mtry", m.rf.config.mtry},
                 {"bootstrap", m.rf.config.bootstrap},
                 {"feature_names", m.rf.feature_names},
                 {"trees", std::move(trees)}};
      break;
    }
    case ModelKind::svm:
      j["svm"] = {{"standardizer", detail::standardizer_to_json(m.svm.standardizer)},
                  {"support_vectors", m.svm.support_vectors},
                  {"coef", m.svm.coef},
                  {"bias", m.svm.bias},
                  {"gamma", m.svm.gamma},
                  {"c", m.svm.c}};
      break;
    case ModelKind::logit:
      j["logit"] = {{"standardizer",
                     detail::standardizer_to_json(m.logit.standardizer)},
                    {"w", m.logit.w},
                    {"bias", m.logit.bias}};
      break;
  }
  return j;
}

inline Model model_from_json(const nlohmann::json& j) {
  if (!j.contains("format_version") ||
      j.at("format_version").get<int>() != kModelFormatVersion)
    throw ConfigError("unsupported model format version");
  Model m;
  m.kind = model_kind_from(j.at("kind").get<std::string>());
  m.default_threshold = j.at("default_threshold").get<double>();
  switch (m.kind) {
    case ModelKind::rf: {
      const auto& r = j.at("rf");
      m.rf.config.n_trees = r.at("n_trees").get<std::size_t>();
      m.rf.config.max_depth = r.at("max_depth").get<std::size_t>();
      m.rf.config.min_leaf = r.at("min_leaf").get<std::size_t>();
      m.rf.config.mtry = r.at("mtry").get<std::size_t>();
      m.rf.config.bootstrap = r.at("bootstrap").get<bool>();
      m.rf.feature_names = r.at("feature_names").get<std::vector<std::string>>();
      for (const auto& tn : r.at("trees")) {
        Tree t;
        for (const auto& n : tn) {
          TreeNode node;
          node.feature = n.at("f").get<std::int32_t>();
          node.threshold = n.at("thr").get<double>();
          node.left = n.at("l").get<std::int32_t>();
          node.right = n.at("r").get<std::int32_t>();
          node.label = n.at("y").get<std::int32_t>();
          t.nodes.push_back(node);
        }
        m.rf.trees.push_back(std::move(t));
      }
      break;
    }
    case ModelKind::svm: {
      const auto& s = j.at("svm");
      m.svm.standardizer = detail::standardizer_from_json(s.at("standardizer"));
      m.svm.support_vectors =
          s.at("support_vectors").get<std::vector<std::vector<double>>>();
      m.svm.coef = s.at("coef").get<std::vector<double>>();
      m.svm.bias = s.at("bias").get<double>();
      m.svm.gamma = s.at("gamma").get<double>();
      m.svm.c = s.at("c").get<double>();
      break;
    }
    case ModelKind::logit: {
      const auto& l = j.at("logit");
      m.logit.standardizer = detail::standardizer_from_json(l.at("standardizer"));
      m.logit.w = l.at("w").get<std::vector<double>>();
      m.logit.bias = l.at("bias").get<double>();
      break;
    }
  }
  return m;
}

inline void save_model(const std::filesystem::path& path, const Model& m) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model file: " + path.string());
  out << model_to_json(m).dump(2) << '\n';
}

inline Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError("model parse error: " + std::string(e.what()));
  }
  return model_from_json(j);
}

}  // namespace ddd
