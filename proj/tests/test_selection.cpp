#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "ddd/errors.hpp"
#include "ddd/selection.hpp"
#include "ddd/table.hpp"

#include "oracles.hpp"

using Catch::Approx;

namespace {

ddd::Dataset random_dataset(std::size_t n, std::size_t d, std::mt19937_64& gen,
                            const std::vector<std::size_t>& informative = {},
                            double shift = 2.0) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::bernoulli_distribution lb(0.5);
  ddd::Dataset ds;
  for (std::size_t c = 0; c < d; ++c)
    ds.feature_names.push_back("f" + std::to_string(c));
  for (std::size_t i = 0; i < n; ++i) {
    const int y = lb(gen) ? 1 : 0;
    std::vector<double> row(d);
    for (std::size_t c = 0; c < d; ++c) {
      row[c] = nd(gen);
      for (std::size_t inf : informative)
        if (c == inf && y == 1) row[c] += shift;
    }
    ds.x.push_back(std::move(row));
    ds.y.push_back(y);
  }
  // Guarantee both classes.
  ds.y[0] = 0;
  ds.y[1] = 1;
  return ds;
}

std::vector<double> column_of(const ddd::Dataset& ds, std::size_t col, int label) {
  std::vector<double> out;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.y[i] == label) out.push_back(ds.x[i][col]);
  return out;
}

}  // namespace

TEST_CASE("F statistic matches the textbook decomposition") {
  std::mt19937_64 gen(11);
  for (int rep = 0; rep < 25; ++rep) {
    const auto ds = random_dataset(40, 3, gen, {1});
    for (std::size_t c = 0; c < ds.dim(); ++c) {
      const auto a = column_of(ds, c, 0);
      const auto b = column_of(ds, c, 1);
      REQUIRE(ddd::anova_f(ds, c) ==
              Approx(oracle::anova_f(a, b)).epsilon(1e-8).margin(1e-10));
    }
  }
}

TEST_CASE("Welch statistic, dof, and p value match independent formulas") {
  std::mt19937_64 gen(13);
  for (int rep = 0; rep < 25; ++rep) {
    const auto ds = random_dataset(30 + rep, 2, gen, {0}, 1.0);
    for (std::size_t c = 0; c < 2; ++c) {
      const auto a = column_of(ds, c, 0);
      const auto b = column_of(ds, c, 1);
      const auto want = oracle::welch_t(a, b);
      const auto got = ddd::welch_t_test(ds, c);
      REQUIRE(got.t == Approx(-want.t).margin(1e-10));  // sign: class1 - class0
      REQUIRE(got.df == Approx(want.df).margin(1e-10));
      REQUIRE(got.p ==
              Approx(oracle::student_t_two_sided_p(want.t, want.df)).margin(1e-8));
    }
  }
}

TEST_CASE("t statistic is zero when both classes are constant") {
  ddd::Dataset ds;
  ds.feature_names = {"f0"};
  for (int i = 0; i < 10; ++i) {
    ds.x.push_back({2.0});
    ds.y.push_back(i % 2);
  }
  const auto r = ddd::welch_t_test(ds, 0);
  REQUIRE(r.t == 0.0);
  REQUIRE(r.p == 1.0);
}

TEST_CASE("degenerate label sets are rejected") {
  ddd::Dataset ds;
  ds.feature_names = {"f0"};
  for (int i = 0; i < 6; ++i) {
    ds.x.push_back({static_cast<double>(i)});
    ds.y.push_back(1);
  }
  REQUIRE_THROWS_AS(ddd::anova_f(ds, 0), ddd::DegenerateLabels);
  REQUIRE_THROWS_AS(ddd::welch_t_test(ds, 0), ddd::DegenerateLabels);
}

TEST_CASE("top-k filter ranks the planted feature first") {
  std::mt19937_64 gen(17);
  const auto ds = random_dataset(120, 8, gen, {5}, 3.0);
  const auto r = ddd::anova_f_topk(ds, 3);
  REQUIRE(r.indices.size() == 3);
  REQUIRE(r.indices[0] == 5);
  REQUIRE(r.names[0] == "f5");
  REQUIRE(r.scores[0] > r.scores[1]);
  REQUIRE(r.evaluations == 8);

  const auto all = ddd::anova_f_topk(ds, 99);
  REQUIRE(all.indices.size() == 8);
  REQUIRE_THROWS_AS(ddd::anova_f_topk(ds, 0), ddd::ConfigError);
}

TEST_CASE("significance filter keeps informative features only") {
  std::mt19937_64 gen(19);
  const auto ds = random_dataset(200, 6, gen, {2}, 3.0);
  const auto r = ddd::t_test_filter(ds, 1e-4);
  REQUIRE(!r.indices.empty());
  REQUIRE(r.indices[0] == 2);

  // With pure noise and a tiny alpha nothing should pass.
  const auto noise = random_dataset(50, 4, gen, {});
  REQUIRE_THROWS_AS(ddd::t_test_filter(noise, 1e-9), ddd::InsufficientData);
  REQUIRE_THROWS_AS(ddd::t_test_filter(ds, 0.0), ddd::ConfigError);
}

TEST_CASE("greedy forward search finds a planted subset") {
  // Fitness rewards exactly the subset {1, 3}; adding anything else never
  // helps, so greedy search should stop right after the second pick.
  const std::vector<std::string> names{"a", "b", "c", "d", "e"};
  auto fitness = [](const std::vector<std::size_t>& cols) {
    double f = 0.0;
    for (std::size_t c : cols) {
      if (c == 1) f += 0.4;
      else if (c == 3) f += 0.35;
      else f -= 0.05;
    }
    return f;
  };
  ddd::WrapperOptions opt;
  opt.strategy = ddd::WrapperStrategy::sfs;
  opt.budget = 20;
  const auto r = ddd::wrapper_select(names, fitness, opt);
  REQUIRE(r.indices == std::vector<std::size_t>{1, 3});
  REQUIRE(r.scores.back() == Approx(0.75));
}

TEST_CASE("wrapper budget counts distinct subsets only") {
  const std::vector<std::string> names{"a", "b", "c", "d"};
  std::set<std::vector<std::size_t>> seen;
  std::size_t calls = 0;
  auto fitness = [&](const std::vector<std::size_t>& cols) {
    ++calls;
    REQUIRE(seen.insert(cols).second);  // the cache must dedupe
    double f = 0.0;
    for (std::size_t c : cols) f += static_cast<double>(c + 1) * 0.1;
    return f;
  };
  ddd::WrapperOptions opt;
  opt.strategy = ddd::WrapperStrategy::pso;
  opt.budget = 25;
  opt.seed = 5;
  const auto r = ddd::wrapper_select(names, fitness, opt);
  REQUIRE(calls == r.evaluations);
  REQUIRE(r.evaluations <= opt.budget);
  // Monotone fitness: the best subset is everything.
  REQUIRE(r.indices == std::vector<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("wrapper refuses budgets below one pass") {
  const std::vector<std::string> names{"a", "b", "c"};
  auto fitness = [](const std::vector<std::size_t>&) { return 1.0; };
  ddd::WrapperOptions opt;
  opt.budget = 2;
  REQUIRE_THROWS_AS(ddd::wrapper_select(names, fitness, opt),
                    ddd::BudgetTooSmall);
}

TEST_CASE("swarm search is deterministic in its seed") {
  const std::vector<std::string> names{"a", "b", "c", "d", "e", "f"};
  auto fitness = [](const std::vector<std::size_t>& cols) {
    double f = 0.0;
    for (std::size_t c : cols) f += (c % 2 == 0) ? 0.3 : -0.1;
    return f;
  };
  ddd::WrapperOptions opt;
  opt.strategy = ddd::WrapperStrategy::pso;
  opt.budget = 40;
  opt.seed = 9;
  const auto r1 = ddd::wrapper_select(names, fitness, opt);
  const auto r2 = ddd::wrapper_select(names, fitness, opt);
  REQUIRE(r1.indices == r2.indices);
  REQUIRE(r1.evaluations == r2.evaluations);
  REQUIRE(r1.indices == std::vector<std::size_t>{0, 2, 4});
}

TEST_CASE("greedy search stops below the improvement threshold") {
  const std::vector<std::string> names{"a", "b", "c"};
  auto fitness = [](const std::vector<std::size_t>& cols) {
    double f = 0.0;
    for (std::size_t c : cols) f += (c == 0) ? 0.5 : 1e-6;
    return f;
  };
  ddd::WrapperOptions opt;
  opt.strategy = ddd::WrapperStrategy::sfs;
  opt.budget = 10;
  opt.min_improvement = 1e-4;
  const auto r = ddd::wrapper_select(names, fitness, opt);
  REQUIRE(r.indices == std::vector<std::size_t>{0});
}

TEST_CASE("swarm search lands near the exhaustive subset optimum") {
  std::mt19937_64 gen(321);
  const std::size_t d = 6;
  const auto train = random_dataset(120, d, gen, {1, 4}, 1.4);
  const auto val = random_dataset(120, d, gen, {1, 4}, 1.4);

  auto fitness = [&](const std::vector<std::size_t>& cols) {
    std::vector<double> w(cols.size(), 0.0);
    std::size_t n0 = 0, n1 = 0;
    std::vector<double> m0(cols.size(), 0.0), m1(cols.size(), 0.0);
    for (std::size_t i = 0; i < train.x.size(); ++i) {
      auto& m = train.y[i] == 1 ? m1 : m0;
      (train.y[i] == 1 ? n1 : n0)++;
      for (std::size_t j = 0; j < cols.size(); ++j)
        m[j] += train.x[i][cols[j]];
    }
    for (std::size_t j = 0; j < cols.size(); ++j)
      w[j] = m1[j] / static_cast<double>(n1) - m0[j] / static_cast<double>(n0);
    std::vector<double> scores(val.x.size());
    for (std::size_t i = 0; i < val.x.size(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < cols.size(); ++j)
        s += w[j] * val.x[i][cols[j]];
      scores[i] = s;
    }
    return oracle::mann_whitney_auc(scores, val.y);
  };

  double best_exhaustive = 0.0;
  for (std::size_t mask = 1; mask < (1u << d); ++mask) {
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < d; ++c)
      if (mask & (1u << c)) cols.push_back(c);
    best_exhaustive = std::max(best_exhaustive, fitness(cols));
  }

  std::vector<std::string> names;
  for (std::size_t c = 0; c < d; ++c) names.push_back("f" + std::to_string(c));
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ddd::WrapperOptions opt;
    opt.strategy = ddd::WrapperStrategy::pso;
    opt.budget = 500;
    opt.seed = seed;
    const auto r = ddd::wrapper_select(names, fitness, opt);
    REQUIRE(r.scores.back() >= best_exhaustive - 0.02);
  }
}
