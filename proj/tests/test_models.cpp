#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include "ddd/errors.hpp"
#include "ddd/models.hpp"
#include "ddd/table.hpp"

#include "oracles.hpp"

using Catch::Approx;

namespace {

ddd::Dataset gaussian_blobs(std::size_t n, std::size_t d, double shift,
                            std::mt19937_64& gen) {
  std::normal_distribution<double> nd(0.0, 1.0);
  ddd::Dataset ds;
  for (std::size_t c = 0; c < d; ++c)
    ds.feature_names.push_back("f" + std::to_string(c));
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % 2);
    std::vector<double> row(d);
    for (std::size_t c = 0; c < d; ++c)
      row[c] = nd(gen) + (y == 1 ? shift : 0.0);
    ds.x.push_back(std::move(row));
    ds.y.push_back(y);
  }
  return ds;
}

double svm_dual_from_model(const ddd::SvmModel& m) {
  const auto k = oracle::rbf_gram(m.support_vectors, m.gamma);
  double obj = 0.0;
  for (std::size_t i = 0; i < m.coef.size(); ++i) obj += std::fabs(m.coef[i]);
  for (std::size_t i = 0; i < m.coef.size(); ++i)
    for (std::size_t j = 0; j < m.coef.size(); ++j)
      obj -= 0.5 * m.coef[i] * m.coef[j] * k[i][j];
  return obj;
}

}  // namespace

TEST_CASE("single depth-one trees match the exhaustive stump") {
  std::mt19937_64 gen(211);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    ddd::Dataset ds;
    const std::size_t d = 3;
    for (std::size_t c = 0; c < d; ++c)
      ds.feature_names.push_back("f" + std::to_string(c));
    for (int i = 0; i < 20; ++i) {
      std::vector<double> row(d);
      for (auto& v : row) v = nd(gen);
      const int y = (i < 10) ? 0 : 1;
      for (auto& v : row) v += y == 1 ? 1.0 : 0.0;
      ds.x.push_back(std::move(row));
      ds.y.push_back(y);
    }

    ddd::RfConfig cfg;
    cfg.n_trees = 1;
    cfg.max_depth = 1;
    cfg.mtry = d;
    cfg.bootstrap = false;
    const auto model =
        ddd::fit_rf(ds, cfg, static_cast<std::uint64_t>(1000 + rep));

    const auto stump = oracle::best_stump(ds.x, ds.y);
    for (const auto& row : ds.x) {
      REQUIRE(model.trees[0].predict(row) == stump.predict(row));
    }
  }
}

TEST_CASE("forests without bootstrap memorize consistent data") {
  std::mt19937_64 gen(223);
  const auto ds = gaussian_blobs(60, 4, 1.0, gen);
  ddd::RfConfig cfg;
  cfg.n_trees = 7;
  cfg.bootstrap = false;
  const auto model = ddd::fit_rf(ds, cfg, 3);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double s = ddd::rf_score(model, ds.x[i]);
    REQUIRE((s >= 0.5 ? 1 : 0) == ds.y[i]);
  }
}

TEST_CASE("forests are reproducible per seed and threaded growth is stable") {
  std::mt19937_64 gen(227);
  const auto ds = gaussian_blobs(80, 5, 1.5, gen);
  ddd::RfConfig cfg;
  cfg.n_trees = 33;
  const auto a = ddd::fit_rf(ds, cfg, 17);
  const auto b = ddd::fit_rf(ds, cfg, 17);
  REQUIRE(a.trees.size() == b.trees.size());
  for (std::size_t t = 0; t < a.trees.size(); ++t) {
    REQUIRE(a.trees[t].nodes.size() == b.trees[t].nodes.size());
    for (std::size_t k = 0; k < a.trees[t].nodes.size(); ++k) {
      REQUIRE(a.trees[t].nodes[k].feature == b.trees[t].nodes[k].feature);
      REQUIRE(a.trees[t].nodes[k].threshold == b.trees[t].nodes[k].threshold);
      REQUIRE(a.trees[t].nodes[k].label == b.trees[t].nodes[k].label);
    }
  }
  // Different seeds draw different bootstraps and must change some tree.
  const auto c = ddd::fit_rf(ds, cfg, 18);
  bool differs = false;
  for (std::size_t t = 0; t < a.trees.size() && !differs; ++t) {
    if (a.trees[t].nodes.size() != c.trees[t].nodes.size()) {
      differs = true;
      break;
    }
    for (std::size_t k = 0; k < a.trees[t].nodes.size(); ++k)
      if (a.trees[t].nodes[k].threshold != c.trees[t].nodes[k].threshold)
        differs = true;
  }
  REQUIRE(differs);
}

TEST_CASE("degenerate training labels are rejected") {
  ddd::Dataset ds;
  ds.feature_names = {"f0"};
  for (int i = 0; i < 8; ++i) {
    ds.x.push_back({static_cast<double>(i)});
    ds.y.push_back(1);
  }
  REQUIRE_THROWS_AS(ddd::fit_rf(ds, {}, 1), ddd::DegenerateLabels);
  REQUIRE_THROWS_AS(ddd::fit_svm(ds, {}), ddd::DegenerateLabels);
  REQUIRE_THROWS_AS(ddd::fit_logit(ds, {}), ddd::DegenerateLabels);
}

TEST_CASE("svm solutions are dual feasible and near optimal") {
  std::mt19937_64 gen(229);
  for (int rep = 0; rep < 10; ++rep) {
    const auto ds = gaussian_blobs(30, 3, 1.2, gen);
    ddd::SvmConfig cfg;
    cfg.c = 1.0;
    const auto m = ddd::fit_svm(ds, cfg);

    double coef_sum = 0.0;
    for (double c : m.coef) {
      const double alpha = std::fabs(c);
      REQUIRE(alpha > 1e-12);
      REQUIRE(alpha <= cfg.c + 1e-8);
      coef_sum += c;
    }
    REQUIRE(std::fabs(coef_sum) < 1e-8);

    // Optimality against a projected-gradient solve of the same dual.
    const auto z = oracle::standardize(ds.x);
    std::vector<double> y(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) y[i] = ds.y[i] == 1 ? 1.0 : -1.0;
    const auto k = oracle::rbf_gram(z, m.gamma);
    const auto alpha_star = oracle::pg_svm_dual(y, k, cfg.c);
    const double best = oracle::dual_objective(alpha_star, y, k);
    const double got = svm_dual_from_model(m);
    REQUIRE(got <= best + 1e-6);
    REQUIRE(got >= best - 1e-3);
  }
}

TEST_CASE("a symmetric two-point problem puts the boundary at the midpoint") {
  ddd::Dataset ds;
  ds.feature_names = {"f0"};
  ds.x = {{-1.0}, {1.0}};
  ds.y = {0, 1};
  const auto m = ddd::fit_svm(ds, {});
  REQUIRE(std::fabs(ddd::svm_score(m, {0.0})) < 1e-9);
  REQUIRE(ddd::svm_score(m, {1.0}) > 0.0);
  REQUIRE(ddd::svm_score(m, {-1.0}) < 0.0);
}

TEST_CASE("default kernel width follows the standardized variance rule") {
  std::mt19937_64 gen(233);
  const auto ds = gaussian_blobs(40, 6, 0.7, gen);
  const auto m = ddd::fit_svm(ds, {});

  const auto z = oracle::standardize(ds.x);
  std::vector<double> colmean(6, 0.0);
  for (const auto& row : z)
    for (std::size_t j = 0; j < 6; ++j) colmean[j] += row[j];
  for (double& v : colmean) v /= static_cast<double>(z.size());
  double var = 0.0;
  for (const auto& row : z)
    for (std::size_t j = 0; j < 6; ++j) {
      const double d = row[j] - colmean[j];
      var += d * d;
    }
  var /= static_cast<double>(z.size()) * 6.0;
  REQUIRE(m.gamma == Approx(1.0 / (6.0 * std::max(var, 1e-12))).epsilon(1e-12));
}

TEST_CASE("logistic training separates well-separated blobs") {
  std::mt19937_64 gen(239);
  const auto ds = gaussian_blobs(100, 3, 4.0, gen);
  const auto m = ddd::fit_logit(ds, {});
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double p = ddd::logit_score(m, ds.x[i]);
    REQUIRE(p >= 0.0);
    REQUIRE(p <= 1.0);
    correct += ((p >= 0.5 ? 1 : 0) == ds.y[i]) ? 1 : 0;
  }
  REQUIRE(correct == ds.size());
}

TEST_CASE("roc area equals the rank statistic, ties included") {
  std::mt19937_64 gen(241);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  std::bernoulli_distribution lb(0.4);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> scores;
    std::vector<int> y;
    std::vector<double> pos, neg;
    const std::size_t n = 5 + static_cast<std::size_t>(gen() % 60);
    for (std::size_t i = 0; i < n; ++i) {
      // Quantized scores force plenty of ties.
      const double s = std::round(ud(gen) * 8.0) / 8.0;
      const int label = lb(gen) ? 1 : 0;
      scores.push_back(s);
      y.push_back(label);
      (label == 1 ? pos : neg).push_back(s);
    }
    if (pos.empty() || neg.empty()) continue;
    const double auc = ddd::auc_of(ddd::roc_curve(scores, y));
    REQUIRE(auc == Approx(oracle::mann_whitney_auc(scores, y)).margin(1e-12));
  }
}

TEST_CASE("roc curves are monotone with descending thresholds") {
  std::vector<double> scores{0.9, 0.7, 0.7, 0.3, 0.1};
  std::vector<int> y{1, 1, 0, 0, 1};
  const auto roc = ddd::roc_curve(scores, y);
  REQUIRE(roc.front().fpr == 0.0);
  REQUIRE(roc.front().tpr == 0.0);
  REQUIRE(std::isinf(roc.front().threshold));
  REQUIRE(roc.back().fpr == 1.0);
  REQUIRE(roc.back().tpr == 1.0);
  for (std::size_t i = 1; i < roc.size(); ++i) {
    REQUIRE(roc[i].fpr >= roc[i - 1].fpr);
    REQUIRE(roc[i].tpr >= roc[i - 1].tpr);
    REQUIRE(roc[i].threshold < roc[i - 1].threshold);
  }
  // 0.7 appears twice and must collapse to one point.
  REQUIRE(roc.size() == 1 + 4);
}

TEST_CASE("single-class score sets degenerate gracefully") {
  const auto roc = ddd::roc_curve({0.2, 0.8}, {1, 1});
  REQUIRE(roc.size() == 2);
  REQUIRE(ddd::auc_of(roc) == Approx(0.5));
}

TEST_CASE("thresholded metrics count the confusion cells") {
  const std::vector<double> scores{0.9, 0.8, 0.4, 0.2};
  const std::vector<int> y{1, 0, 1, 0};
  const auto m = ddd::evaluate_scores(scores, y, 0.5);
  REQUIRE(m.tp == 1);
  REQUIRE(m.fp == 1);
  REQUIRE(m.tn == 1);
  REQUIRE(m.fn == 1);
  REQUIRE(m.accuracy == Approx(0.5));
  REQUIRE(m.precision == Approx(0.5));
  REQUIRE(m.recall == Approx(0.5));
  REQUIRE(m.f1 == Approx(0.5));

  // Nothing predicted positive: precision denominator empty, reported zero.
  const auto m2 = ddd::evaluate_scores({0.1, 0.2}, {0, 1}, 0.9);
  REQUIRE(m2.precision == 0.0);
  REQUIRE(m2.f1 == 0.0);
  REQUIRE_THROWS_AS(ddd::evaluate_scores({}, {}, 0.5), ddd::EmptyInput);

  // A score equal to the threshold counts as drowsy.
  const auto m3 = ddd::evaluate_scores({0.5}, {1}, 0.5);
  REQUIRE(m3.tp == 1);
}

TEST_CASE("random-search tuning keeps the best validation candidate") {
  std::mt19937_64 gen(251);
  const auto train = gaussian_blobs(80, 2, 3.0, gen);
  const auto val = gaussian_blobs(40, 2, 3.0, gen);

  ddd::ModelConfig crippled;
  crippled.kind = ddd::ModelKind::logit;
  crippled.logit.l2 = 1e9;  // shrinks weights to nothing, AUC ~ 0.5
  crippled.logit.max_iter = 5;
  ddd::ModelConfig decent;
  decent.kind = ddd::ModelKind::logit;

  const auto r = ddd::tune({crippled, decent}, train, val, 10, 21);
  REQUIRE(r.best == 1);
  REQUIRE(r.best_auc > 0.95);
  REQUIRE(r.trials.size() == 2);

  const auto r1 = ddd::tune({crippled, decent}, train, val, 1, 21);
  REQUIRE(r1.trials.size() == 1);

  REQUIRE_THROWS_AS(ddd::tune({}, train, val, 5, 1), ddd::InvalidSearchSpace);
  REQUIRE_THROWS_AS(ddd::tune({decent}, train, val, 0, 1), ddd::ConfigError);
}

TEST_CASE("models survive a json round trip with identical scores") {
  std::mt19937_64 gen(257);
  const auto ds = gaussian_blobs(40, 3, 1.5, gen);
  for (const auto kind :
       {ddd::ModelKind::rf, ddd::ModelKind::svm, ddd::ModelKind::logit}) {
    ddd::ModelConfig cfg;
    cfg.kind = kind;
    cfg.rf.n_trees = 9;
    const auto m = ddd::fit_model(ds, cfg, 5);
    const auto j = ddd::model_to_json(m);
    const auto back = ddd::model_from_json(j);
    const auto s1 = ddd::model_scores(m, ds);
    const auto s2 = ddd::model_scores(back, ds);
    REQUIRE(s1 == s2);
    REQUIRE(j.at("format_version").get<int>() == ddd::kModelFormatVersion);
  }
}

TEST_CASE("model files round-trip on disk and reject foreign versions") {
  std::mt19937_64 gen(263);
  const auto ds = gaussian_blobs(30, 2, 2.0, gen);
  ddd::ModelConfig cfg;
  cfg.kind = ddd::ModelKind::logit;
  const auto m = ddd::fit_model(ds, cfg, 2);

  const std::filesystem::path dir = "tmp_tests/models";
  std::filesystem::create_directories(dir);
  ddd::save_model(dir / "m.json", m);
  const auto back = ddd::load_model(dir / "m.json");
  REQUIRE(ddd::model_scores(m, ds) == ddd::model_scores(back, ds));

  auto j = ddd::model_to_json(m);
  j["format_version"] = 999;
  REQUIRE_THROWS_AS(ddd::model_from_json(j), ddd::ConfigError);
  REQUIRE_THROWS_AS(ddd::load_model(dir / "missing.json"), ddd::DataError);
}

TEST_CASE("logistic fit reaches a stationary point of its stated loss") {
  std::mt19937_64 gen(808);
  const auto ds = gaussian_blobs(160, 4, 1.2, gen);
  ddd::LogitConfig cfg;
  const auto m = ddd::fit_logit(ds, cfg);

  std::vector<std::vector<double>> z(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i)
    z[i] = m.standardizer.transform(ds.x[i]);

  auto loss = [&](const std::vector<double>& w, double bias) {
    double l = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      double s = bias;
      for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * z[i][j];
      l += (s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s))) -
           (ds.y[i] == 1 ? s : 0.0);
    }
    l /= static_cast<double>(ds.size());
    double reg = 0.0;
    for (double v : w) reg += v * v;
    return l + 0.5 * cfg.l2 * reg;
  };

  const double h = 1e-6;
  for (std::size_t j = 0; j < m.w.size(); ++j) {
    auto wp = m.w, wm = m.w;
    wp[j] += h;
    wm[j] -= h;
    const double g = (loss(wp, m.bias) - loss(wm, m.bias)) / (2.0 * h);
    REQUIRE(std::fabs(g) < 1e-5);
  }
  const double gb =
      (loss(m.w, m.bias + h) - loss(m.w, m.bias - h)) / (2.0 * h);
  REQUIRE(std::fabs(gb) < 1e-5);
}
