#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace ecomem;

namespace {

SimScenario single_covariate(Family fam, int lag, WeightShape w, std::uint64_t seed = 5) {
  SimScenario s;
  s.family = fam;
  s.series_length = 200;
  s.seed = seed;
  s.formula = "y ~ x";
  s.mu = 0.5;
  s.beta = {{"x", 0.8}};
  s.sigma = 0.2;
  CovariateGenerator g{"x", CovariateKind::Continuous, 0.0, 0.4, 1.0, lag, w};
  s.covariates = {g};
  return s;
}

MemoryFunction memfn(const std::string& name, std::vector<double> mean, std::vector<double> lo, std::vector<double> hi) {
  MemoryFunction f;
  f.name = name;
  f.mean = std::move(mean);
  f.lower = std::move(lo);
  f.upper = std::move(hi);
  return f;
}

}  // namespace

TEST(TrueWeights, Shapes) {
  WeightShape e{"exponential", 0.5, 0, 1, {}};
  auto w = true_weights(e, 6);
  ASSERT_EQ(w.size(), 7u);
  double sum = 0;
  for (double v : w) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-14);
  for (int l = 1; l <= 6; ++l) EXPECT_NEAR(w[l] / w[l - 1], std::exp(-0.5), 1e-12);

  WeightShape h{"hump", 0.5, 2.0, 1.5, {}};
  auto hw = true_weights(h, 10);
  EXPECT_EQ(std::max_element(hw.begin(), hw.end()) - hw.begin(), 2);
  auto u = true_weights(WeightShape{}, 4);
  for (double v : u) EXPECT_NEAR(v, 0.2, 1e-15);
  auto c = true_weights(WeightShape{"custom", 0, 0, 1, {2, 1, 1}}, 2);
  EXPECT_NEAR(c[0], 0.5, 1e-15);
  EXPECT_THROW(true_weights(WeightShape{"custom", 0, 0, 1, {1, 1}}, 2), Error);
}

TEST(Generate, CanonicalShape) {
  auto sim = generate(canonical_scenario(2019));
  EXPECT_EQ(sim.data.rows(), 120u);
  for (const char* c : {"y", "v1", "v2", "v3"}) EXPECT_TRUE(sim.data.has(c));
  EXPECT_EQ(sim.data.time.front(), 1);
  EXPECT_EQ(sim.data.time.back(), 120);
  EXPECT_EQ(sim.truth.weights.at("v1").size(), 11u);
  EXPECT_EQ(sim.truth.weights.at("v2").size(), 7u);
  EXPECT_FALSE(sim.truth.weights.count("v3"));
  for (double v : sim.data.column("v1")) EXPECT_TRUE(v == 0.0 || v == 1.0);
  for (double v : sim.data.column("y")) EXPECT_EQ(v, std::floor(v));
}

TEST(Generate, GroupedDisturbance) {
  auto sim = generate(disturbance_scenario(2018));
  EXPECT_EQ(sim.data.rows(), 300u);
  EXPECT_EQ(sim.data.group_id, "group");
  EXPECT_EQ(sim.data.group.front(), "1");
  EXPECT_EQ(sim.data.group.back(), "10");
}

TEST(Generate, DeterministicInSeed) {
  auto a = generate(canonical_scenario(7)), b = generate(canonical_scenario(7)), c = generate(canonical_scenario(8));
  for (const auto& n : a.data.names) EXPECT_EQ(a.data.column(n), b.data.column(n));
  EXPECT_NE(a.data.column("y"), c.data.column("y"));
  EXPECT_EQ(to_json(a.truth), to_json(b.truth));
}

TEST(Generate, NullModelMean) {
  SimScenario s = single_covariate(Family::Poisson, 3, WeightShape{});
  s.series_length = 4000;
  s.mu = 1.0;
  s.beta = {{"x", 0.0}};
  auto sim = generate(s);
  const auto& y = sim.data.column("y");
  double m = 0;
  for (double v : y) m += v;
  m /= y.size();
  EXPECT_NEAR(m, std::exp(1.0), 4.0 * std::sqrt(std::exp(1.0) / y.size()));
}

TEST(Generate, DegenerateWeightsMatchNoMemory) {
  WeightShape onehot{"custom", 0, 0, 1, std::vector<double>(13, 0.0)};
  onehot.values[0] = 1.0;
  auto with = single_covariate(Family::Gaussian, 12, onehot);
  auto without = single_covariate(Family::Gaussian, 0, WeightShape{});
  with.history = 12;
  without.history = 12;
  auto a = generate(with), b = generate(without);
  EXPECT_EQ(a.data.column("x"), b.data.column("x"));
  EXPECT_EQ(a.data.column("y"), b.data.column("y"));
}

TEST(Generate, ResponseUsesTheFilteredCovariate) {
  WeightShape w{"exponential", 0.3, 0, 1, {}};
  auto sc = single_covariate(Family::Gaussian, 5, w);
  sc.sigma = 0.0;
  auto sim = generate(sc);
  auto panel = build_lag_panel(sim.data, make_memory_spec({"x"}, {5}), "y", {"x"});
  const auto& tw = sim.truth.weights.at("x");
  Eigen::VectorXd xf = filter_covariate(panel.lagged.at("x"), Eigen::Map<const Eigen::VectorXd>(tw.data(), 6));
  for (Eigen::Index r = 0; r < panel.rows(); ++r) {
    double direct = 0.0;
    for (int l = 0; l <= 5; ++l) direct += tw[l] * panel.lagged.at("x")(r, l);
    EXPECT_NEAR(xf(r), direct, 1e-14);
    EXPECT_NEAR(panel.response(r), 0.5 + 0.8 * xf(r), 1e-12);
  }
}

TEST(Generate, BinomialTrialsColumn) {
  auto sc = single_covariate(Family::Binomial, 2, WeightShape{});
  sc.trials = 7;
  auto sim = generate(sc);
  for (double n : sim.data.column("n")) EXPECT_EQ(n, 7.0);
  for (double y : sim.data.column("y")) {
    EXPECT_GE(y, 0.0);
    EXPECT_LE(y, 7.0);
  }
}

TEST(Generate, InvalidScenarios) {
  auto sc = single_covariate(Family::Poisson, 2, WeightShape{});
  sc.beta["q"] = 1.0;
  try {
    generate(sc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TermNotFound);
  }
  sc = single_covariate(Family::Poisson, 2, WeightShape{});
  sc.formula = "y ~ x + w";
  EXPECT_THROW(generate(sc), Error);
  sc = single_covariate(Family::Poisson, 2, WeightShape{});
  sc.history = 1;
  EXPECT_THROW(generate(sc), Error);
  sc = single_covariate(Family::Poisson, 2, WeightShape{});
  sc.covariates[0].ar = 1.0;
  EXPECT_THROW(generate(sc), Error);
}

TEST(ScoreRecovery, WorkedExamples) {
  GroundTruth t;
  t.weights["a"] = {0.5, 0.3, 0.2};
  auto perfect = score_recovery({memfn("a", {0.5, 0.3, 0.2}, {0.4, 0.2, 0.1}, {0.6, 0.4, 0.3})}, t);
  EXPECT_EQ(perfect.mae, 0.0);
  EXPECT_EQ(perfect.coverage, 1.0);

  auto off = score_recovery({memfn("a", {0.4, 0.4, 0.2}, {0.35, 0.35, 0.21}, {0.45, 0.45, 0.3})}, t);
  EXPECT_NEAR(off.mae, 0.2 / 3, 1e-15);
  EXPECT_NEAR(off.coverage, 0.0, 1e-15);
  ASSERT_EQ(off.covariates[0].lags.size(), 3u);
  EXPECT_FALSE(off.covariates[0].lags[2].covered);

  t.weights["b"] = {0.5, 0.5};
  auto both = score_recovery({memfn("a", {0.5, 0.3, 0.2}, {0.4, 0.2, 0.1}, {0.6, 0.4, 0.3}),
                              memfn("b", {0.6, 0.4}, {0.0, 0.0}, {1.0, 1.0})},
                             t);
  EXPECT_NEAR(both.mae, 0.2 / 5, 1e-15);
  EXPECT_NEAR(both.coverage, 1.0, 1e-15);
}

TEST(ScoreRecovery, ShapeMismatch) {
  GroundTruth t;
  t.weights["a"] = {0.5, 0.3, 0.2};
  for (auto f : {memfn("a", {0.5, 0.5}, {0, 0}, {1, 1}), memfn("z", {1}, {0}, {1})}) {
    try {
      score_recovery({f}, t);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
    }
  }
}

TEST(ScenarioJson, RoundTrip) {
  for (const auto& sc : {canonical_scenario(3), disturbance_scenario(4)}) {
    auto back = scenario_from_json(to_json(sc));
    EXPECT_EQ(to_json(back), to_json(sc));
    auto a = generate(sc), b = generate(back);
    EXPECT_EQ(a.data.column(a.data.names.front()), b.data.column(b.data.names.front()));
    for (const auto& n : a.data.names) EXPECT_EQ(a.data.column(n), b.data.column(n));
  }
  auto t = generate(canonical_scenario(3)).truth;
  EXPECT_EQ(to_json(truth_from_json(to_json(t))), to_json(t));
  EXPECT_THROW(scenario_from_json(nlohmann::json::parse(R"({"family": 3})")), Error);
}
