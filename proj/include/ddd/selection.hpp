#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ddd/errors.hpp"
#include "ddd/numeric.hpp"
#include "ddd/table.hpp"

namespace ddd {

/// Outcome of a feature-selection pass. `indices` refer to columns of the
/// dataset the selector ran on, in rank order; `scores` align with them.
struct SelectionResult {
  std::vector<std::size_t> indices;
  std::vector<std::string> names;
  std::vector<double> scores;
  std::size_t evaluations = 0;
};

namespace detail {

struct ClassStats {
  std::size_t n0 = 0, n1 = 0;
  double mean0 = 0.0, mean1 = 0.0;
  double ss0 = 0.0, ss1 = 0.0;  // sums of squared deviations
};

inline ClassStats column_stats(const Dataset& ds, std::size_t col) {
  ClassStats s;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.y[i] == 1) {
      ++s.n1;
      s.mean1 += ds.x[i][col];
    } else {
      ++s.n0;
      s.mean0 += ds.x[i][col];
    }
  }
  if (s.n0 > 0) s.mean0 /= static_cast<double>(s.n0);
  if (s.n1 > 0) s.mean1 /= static_cast<double>(s.n1);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double d = ds.x[i][col] - (ds.y[i] == 1 ? s.mean1 : s.mean0);
    (ds.y[i] == 1 ? s.ss1 : s.ss0) += d * d;
  }
  return s;
}

}  // namespace detail

/// One-way two-class F statistic of a single column.
inline double anova_f(const Dataset& ds, std::size_t col) {
  const auto s = detail::column_stats(ds, col);
  if (s.n0 == 0 || s.n1 == 0)
    throw DegenerateLabels("F statistic needs both classes present");
  const double n0 = static_cast<double>(s.n0), n1 = static_cast<double>(s.n1);
  const double grand = (n0 * s.mean0 + n1 * s.mean1) / (n0 + n1);
  const double ssb = n0 * (s.mean0 - grand) * (s.mean0 - grand) +
                     n1 * (s.mean1 - grand) * (s.mean1 - grand);
  const double ssw = s.ss0 + s.ss1;
  const double denom = std::max(ssw / (n0 + n1 - 2.0), 1e-30);
  return ssb / denom;
}

/// Welch two-sample t statistic and two-sided p value of a single column.
struct TTest {
  double t = 0.0;
  double df = 1.0;
  double p = 1.0;
};

inline TTest welch_t_test(const Dataset& ds, std::size_t col) {
  const auto s = detail::column_stats(ds, col);
  if (s.n0 < 2 || s.n1 < 2)
    throw DegenerateLabels("t test needs at least two samples per class");
  const double n0 = static_cast<double>(s.n0), n1 = static_cast<double>(s.n1);
  const double v0 = s.ss0 / (n0 - 1.0), v1 = s.ss1 / (n1 - 1.0);
  const double q0 = v0 / n0, q1 = v1 / n1;
  TTest r;
  if (q0 + q1 <= 0.0) {
    r.t = 0.0;
    r.df = n0 + n1 - 2.0;
    r.p = 1.0;
    return r;
  }
  r.t = (s.mean1 - s.mean0) / std::sqrt(q0 + q1);
  const double denom = q0 * q0 / (n0 - 1.0) + q1 * q1 / (n1 - 1.0);
  r.df = denom > 0.0 ? (q0 + q1) * (q0 + q1) / denom : n0 + n1 - 2.0;
  r.p = student_t_two_sided_p(r.t, r.df);
  return r;
}

/// Keeps the k columns with the largest F statistic, ranked by F descending
/// with name ties broken alphabetically.
inline SelectionResult anova_f_topk(const Dataset& ds, std::size_t k) {
  if (k == 0) throw ConfigError("top-k selection needs k >= 1");
  if (ds.dim() == 0) throw ConfigError("dataset has no features");
  k = std::min(k, ds.dim());
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t c = 0; c < ds.dim(); ++c) ranked.push_back({anova_f(ds, c), c});
  std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return ds.feature_names[a.second] < ds.feature_names[b.second];
  });
  SelectionResult out;
  for (std::size_t i = 0; i < k; ++i) {
    out.indices.push_back(ranked[i].second);
    out.names.push_back(ds.feature_names[ranked[i].second]);
    out.scores.push_back(ranked[i].first);
  }
  out.evaluations = ds.dim();
  return out;
}

/// Keeps every column whose two-sided Welch p value is below alpha, ranked by
/// |t| descending. Throws InsufficientData when nothing passes.
inline SelectionResult t_test_filter(const Dataset& ds, double alpha = 0.05) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must be in (0,1)");
  if (ds.dim() == 0) throw ConfigError("dataset has no features");
  std::vector<std::pair<double, std::size_t>> kept;
  std::vector<double> pvals(ds.dim());
  for (std::size_t c = 0; c < ds.dim(); ++c) {
    const TTest r = welch_t_test(ds, c);
    pvals[c] = r.p;
    if (r.p < alpha) kept.push_back({std::fabs(r.t), c});
  }
  if (kept.empty())
    throw InsufficientData("no feature passes the t-test filter");
  std::sort(kept.begin(), kept.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return ds.feature_names[a.second] < ds.feature_names[b.second];
  });
  SelectionResult out;
  for (const auto& [t, c] : kept) {
    out.indices.push_back(c);
    out.names.push_back(ds.feature_names[c]);
    out.scores.push_back(t);
  }
  out.evaluations = ds.dim();
  return out;
}

enum class WrapperStrategy { sfs, pso };

inline std::string to_string(WrapperStrategy s) {
  return s == WrapperStrategy::sfs ? "sfs" : "pso";
}

inline WrapperStrategy wrapper_strategy_from(const std::string& s) {
  if (s == "sfs") return WrapperStrategy::sfs;
  if (s == "pso") return WrapperStrategy::pso;
  throw ConfigError("unknown wrapper strategy: " + s);
}

struct WrapperOptions {
  WrapperStrategy strategy = WrapperStrategy::sfs;
  std::size_t budget = 200;
  double min_improvement = 1e-4;
  std::size_t swarm = 20;
  double inertia = 0.72;
  double cognitive = 1.49;
  double social = 1.49;
  double vmax = 4.0;
  std::uint64_t seed = 1;
};

/// Fitness of a candidate column subset, higher is better. Subsets arrive as
/// sorted column indices; the empty subset is never passed in.
using SubsetFitness = std::function<double(const std::vector<std::size_t>&)>;

namespace detail {

class FitnessCache {
 public:
  FitnessCache(SubsetFitness fn, std::size_t budget)
      : fn_(std::move(fn)), budget_(budget) {}

  /// Empty masks score zero without spending budget. Repeated masks replay
  /// the cached value. Returns false when the budget is exhausted.
  bool eval(const std::vector<bool>& mask, double& out) {
    std::vector<std::size_t> cols;
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) cols.push_back(i);
    if (cols.empty()) {
      out = 0.0;
      return true;
    }
    auto it = cache_.find(mask);
    if (it != cache_.end()) {
      out = it->second;
      return true;
    }
    if (used_ >= budget_) return false;
    ++used_;
    out = fn_(cols);
    cache_.emplace(mask, out);
    return true;
  }

  std::size_t used() const { return used_; }

 private:
  SubsetFitness fn_;
  std::size_t budget_;
  std::size_t used_ = 0;
  std::map<std::vector<bool>, double> cache_;
};

inline SelectionResult wrapper_sfs(const std::vector<std::string>& names,
                                   FitnessCache& cache,
                                   const WrapperOptions& opt) {
  const std::size_t d = names.size();
  std::vector<bool> chosen(d, false);
  std::vector<std::size_t> order;
  std::vector<double> trail;
  double best_so_far = 0.0;

  for (;;) {
    double round_best = -1.0;
    std::size_t round_arg = d;
    bool exhausted = false;
    for (std::size_t c = 0; c < d; ++c) {
      if (chosen[c]) continue;
      std::vector<bool> mask = chosen;
      mask[c] = true;
      double f;
      if (!cache.eval(mask, f)) {
        exhausted = true;
        break;
      }
      if (f > round_best) {
        round_best = f;
        round_arg = c;
      }
    }
    if (round_arg == d) break;
    if (!order.empty() && round_best - best_so_far < opt.min_improvement) break;
    chosen[round_arg] = true;
    order.push_back(round_arg);
    trail.push_back(round_best);
    best_so_far = round_best;
    if (exhausted || order.size() == d) break;
  }

  SelectionResult out;
  out.indices = order;
  for (std::size_t c : order) out.names.push_back(names[c]);
  out.scores = trail;
  out.evaluations = cache.used();
  return out;
}

inline SelectionResult wrapper_pso(const std::vector<std::string>& names,
                                   FitnessCache& cache,
                                   const WrapperOptions& opt) {
  const std::size_t d = names.size();
  Rng rng(opt.seed);
  const std::size_t m = std::max<std::size_t>(opt.swarm, 2);

  std::vector<std::vector<bool>> pos(m, std::vector<bool>(d));
  std::vector<std::vector<double>> vel(m, std::vector<double>(d));
  std::vector<std::vector<bool>> pbest(m);
  std::vector<double> pbest_fit(m, -1.0);
  std::vector<bool> gbest(d, false);
  double gbest_fit = -1.0;

  for (std::size_t p = 0; p < m; ++p)
    for (std::size_t j = 0; j < d; ++j) {
      pos[p][j] = rng.uniform() < 0.5;
      vel[p][j] = rng.uniform(-1.0, 1.0);
    }

  bool budget_left = true;
  const std::size_t max_sweeps = 10 * opt.budget + 10;
  for (std::size_t sweep = 0; budget_left && sweep < max_sweeps; ++sweep) {
    for (std::size_t p = 0; p < m && budget_left; ++p) {
      double f;
      if (!cache.eval(pos[p], f)) {
        budget_left = false;
        break;
      }
      if (f > pbest_fit[p]) {
        pbest_fit[p] = f;
        pbest[p] = pos[p];
      }
      if (f > gbest_fit) {
        gbest_fit = f;
        gbest = pos[p];
      }
    }
    if (!budget_left) break;
    for (std::size_t p = 0; p < m; ++p) {
      for (std::size_t j = 0; j < d; ++j) {
        const double towards_p = (pbest[p][j] ? 1.0 : 0.0) - (pos[p][j] ? 1.0 : 0.0);
        const double towards_g = (gbest[j] ? 1.0 : 0.0) - (pos[p][j] ? 1.0 : 0.0);
        double v = opt.inertia * vel[p][j] +
                   opt.cognitive * rng.uniform() * towards_p +
                   opt.social * rng.uniform() * towards_g;
        v = std::clamp(v, -opt.vmax, opt.vmax);
        vel[p][j] = v;
        const double prob = 1.0 / (1.0 + std::exp(-v));
        pos[p][j] = rng.uniform() < prob;
      }
    }
  }

  SelectionResult out;
  for (std::size_t j = 0; j < d; ++j)
    if (gbest[j]) {
      out.indices.push_back(j);
      out.names.push_back(names[j]);
      out.scores.push_back(gbest_fit);
    }
  out.evaluations = cache.used();
  return out;
}

}  // namespace detail

/// Wrapper selection around a caller-supplied fitness (typically validation
/// AUC of a model retrained on the candidate subset). The budget counts
/// distinct subset evaluations and must cover at least one pass over the
/// single-feature candidates.
inline SelectionResult wrapper_select(const std::vector<std::string>& names,
                                      const SubsetFitness& fitness,
                                      const WrapperOptions& opt = {}) {
  if (names.empty()) throw ConfigError("no features to select from");
  if (opt.budget < names.size())
    throw BudgetTooSmall("wrapper budget below the number of features");
  detail::FitnessCache cache(fitness, opt.budget);
  SelectionResult r = opt.strategy == WrapperStrategy::sfs
                          ? detail::wrapper_sfs(names, cache, opt)
                          : detail::wrapper_pso(names, cache, opt);
  if (r.indices.empty())
    throw InsufficientData("wrapper selection found no useful subset");
  return r;
}

}  // namespace ddd
