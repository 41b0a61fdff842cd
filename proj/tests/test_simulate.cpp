#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "coxthin/simulate.hpp"
#include "oracles.hpp"

using namespace coxthin;

namespace {

SimScenario homogeneous_scenario(double mu, int n = 4) {
  SimScenario sc;
  sc.grid = RasterGrid(0, 0, n, n, 1.0);
  sc.n_campaigns = 1;
  sc.mu = {mu};
  sc.grouping = {1};
  sc.gp_hypers = {{0.0, 1.0, 1}};  // sigma = 0 disables the field
  sc.seed = 1234;
  return sc;
}

}  // namespace

TEST_CASE("potential intensity", "[simulate]") {
  SECTION("homogeneous limit") {
    auto sc = homogeneous_scenario(std::log(3.0));
    auto sim = simulate_campaigns(sc);
    for (int c = 0; c < sc.grid.n_cells(); ++c)
      CHECK(sim.lambda_pot[0][c] == Catch::Approx(3.0));
  }

  SECTION("single covariate shifts the log intensity") {
    auto sc = homogeneous_scenario(0.0);
    sc.covariate_names = {"one"};
    sc.beta = {1.0};
    LayerGenerator g;
    g.kind = LayerGenerator::Kind::constant;
    g.value = 1.0;
    sc.covariate_generators = {g};
    auto sim = simulate_campaigns(sc);
    for (int c = 0; c < sc.grid.n_cells(); ++c)
      CHECK(sim.lambda_pot[0][c] == Catch::Approx(std::exp(1.0)));
  }

  SECTION("campaigns in one group share the identical field") {
    SimScenario sc;
    sc.grid = RasterGrid(0, 0, 4, 4, 1.0);
    sc.n_campaigns = 3;
    sc.mu = {0.0, 0.0, 1.0};
    sc.grouping = {1, 1, 2};
    sc.gp_hypers = {{0.5, 2.0, 1}, {0.5, 2.0, 2}};
    sc.seed = 9;
    auto sim = simulate_campaigns(sc);
    for (int c = 0; c < sc.grid.n_cells(); ++c) {
      CHECK(sim.lambda_pot[0][c] == sim.lambda_pot[1][c]);  // same w, same mu
      CHECK(sim.lambda_pot[0][c] != sim.lambda_pot[2][c]);
    }
  }

  SECTION("overflow names the cell") {
    auto sc = homogeneous_scenario(1000.0);
    CHECK_THROWS_AS(simulate_campaigns(sc), NumericError);
  }
}

TEST_CASE("poisson pattern simulation", "[simulate]") {
  RasterGrid g(0, 0, 4, 4, 0.25);  // unit-area domain

  SECTION("zero intensity gives an empty pattern") {
    RasterLayer lambda(g, 0.0);
    CHECK(simulate_pattern(lambda, 5).size() == 0);
  }

  SECTION("mean count matches a Monte Carlo oracle") {
    double c = 40.0;
    RasterLayer lambda(g, c);
    std::vector<double> counts;
    for (int s = 0; s < 1000; ++s)
      counts.push_back(static_cast<double>(simulate_pattern(lambda, 100 + s).size()));
    double se = std::sqrt(c / 1000.0);
    CHECK(std::abs(oracles::mean(counts) - c) < 3.0 * se * std::sqrt(c));
  }

  SECTION("disjoint half-domains are uncorrelated") {
    RasterLayer lambda(g, 30.0);
    std::vector<double> left, right;
    for (int s = 0; s < 1000; ++s) {
      auto pat = simulate_pattern(lambda, 5000 + s);
      int nl = 0, nr = 0;
      for (const auto& p : pat.points) (p.x < 0.5 ? nl : nr) += 1;
      left.push_back(nl);
      right.push_back(nr);
    }
    double ml = oracles::mean(left), mr = oracles::mean(right);
    double cov = 0.0;
    for (std::size_t i = 0; i < left.size(); ++i)
      cov += (left[i] - ml) * (right[i] - mr);
    cov /= static_cast<double>(left.size() - 1);
    double corr = cov / std::sqrt(oracles::variance(left) * oracles::variance(right));
    CHECK(std::abs(corr) < 0.1);
  }

  SECTION("deterministic given the seed; points stay in their cells") {
    RasterLayer lambda(g, 25.0);
    auto a = simulate_pattern(lambda, 77);
    auto b = simulate_pattern(lambda, 77);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a.points[i].x == b.points[i].x);
      CHECK(a.points[i].y == b.points[i].y);
    }
    for (const auto& p : a.points) CHECK(g.contains(p.x, p.y));
  }
}

TEST_CASE("thinning", "[simulate]") {
  RasterGrid g(0, 0, 4, 4, 1.0);
  RasterLayer lambda(g, 80.0);
  auto pattern = simulate_pattern(lambda, 31);  // ~1280 points
  pattern.set_mark("confidence",
                   std::vector<double>(pattern.size(), 0.5));

  SECTION("p == 1 keeps everything, p == 0 drops everything") {
    auto all = thin_pattern(pattern, RasterLayer(g, 1.0), 3);
    CHECK(all.size() == pattern.size());
    for (std::size_t i = 0; i < all.size(); ++i)
      CHECK(all.points[i].x == pattern.points[i].x);
    CHECK(all.mark("confidence").size() == all.size());
    auto none = thin_pattern(pattern, RasterLayer(g, 0.0), 3);
    CHECK(none.size() == 0);
  }

  SECTION("binomial oracle at p = 0.5") {
    RasterLayer half(g, 0.5);
    RasterLayer lam1000(g, 62.5);  // 62.5 * 16 = 1000 expected points
    int inside = 0, total = 0;
    for (int s = 0; s < 200; ++s) {
      auto big = simulate_pattern(lam1000, 400 + s);
      auto kept = thin_pattern(big, half, 900 + s);
      double n = static_cast<double>(big.size());
      double expect = 0.5 * n;
      double sd = std::sqrt(n * 0.25);
      if (std::abs(static_cast<double>(kept.size()) - expect) <= 3.0 * sd) ++inside;
      ++total;
    }
    CHECK(inside >= static_cast<int>(0.97 * total));
  }

  SECTION("field values outside [0,1] are rejected") {
    RasterLayer bad(g, 1.5);
    CHECK_THROWS_AS(thin_pattern(pattern, bad, 3), DataError);
  }
}

TEST_CASE("thinned-process mean and dispersion", "[simulate]") {
  // superposition/thinning identity: E[N_obs] = sum lambda(c) p(c) a
  RasterGrid g(0, 0, 8, 8, 0.5);
  SimScenario sc;
  sc.grid = g;
  sc.n_campaigns = 1;
  sc.mu = {std::log(18.0)};
  sc.grouping = {1};
  sc.gp_hypers = {{0.0, 1.0, 1}};
  ScenarioDetectionComponent det;
  det.name = "zfield";
  det.from_mark = false;
  det.transform = TransformKind::identity;
  det.tau = 1.0;
  det.generator.kind = LayerGenerator::Kind::linear;
  det.generator.c0 = -1.0;
  det.generator.cx = 0.5;
  sc.detection = {det};

  double expected = 0.0;
  {
    sc.seed = 0;
    auto sim0 = simulate_campaigns(sc);
    for (int c = 0; c < g.n_cells(); ++c)
      expected += sim0.lambda_pot[0][c] * sim0.p_fields[0][c] * g.cell_area();
  }
  const int R = 500;
  std::vector<double> counts;
  for (int r = 0; r < R; ++r) {
    sc.seed = 10000 + r;
    auto sim = simulate_campaigns(sc);
    counts.push_back(static_cast<double>(sim.observed_patterns[0].size()));
  }
  double se = std::sqrt(expected / R);
  CHECK(std::abs(oracles::mean(counts) - expected) < 3.0 * se);

  // Poisson property preserved: variance/mean close to 1
  double ratio = oracles::variance(counts) / oracles::mean(counts);
  CHECK(ratio > 0.8);
  CHECK(ratio < 1.25);
}

TEST_CASE("full determinism of scenarios", "[simulate]") {
  SimScenario sc;
  sc.grid = RasterGrid(0, 0, 6, 6, 1.0);
  sc.n_campaigns = 2;
  sc.mu = {1.0, 1.2};
  sc.grouping = {1, 1};
  sc.gp_hypers = {{0.4, 3.0, 1}};
  sc.covariate_names = {"grad"};
  sc.beta = {0.5};
  LayerGenerator cg;
  cg.kind = LayerGenerator::Kind::linear;
  cg.cx = 0.1;
  sc.covariate_generators = {cg};
  ScenarioDetectionComponent det;
  det.name = "confidence";
  det.from_mark = true;
  det.transform = TransformKind::complement_to_one;
  det.tau = 0.8;
  det.generator.kind = LayerGenerator::Kind::linear;
  det.generator.c0 = 0.3;
  det.generator.cx = 0.1;
  sc.detection = {det};
  sc.seed = 424242;

  auto a = simulate_campaigns(sc);
  auto b = simulate_campaigns(sc);
  for (int t = 0; t < 2; ++t) {
    REQUIRE(a.true_patterns[t].size() == b.true_patterns[t].size());
    for (std::size_t i = 0; i < a.true_patterns[t].size(); ++i) {
      CHECK(a.true_patterns[t].points[i].x == b.true_patterns[t].points[i].x);
      CHECK(a.true_patterns[t].points[i].y == b.true_patterns[t].points[i].y);
    }
    CHECK(a.observed_patterns[t].size() == b.observed_patterns[t].size());
    CHECK(a.true_patterns[t].mark("confidence") == b.true_patterns[t].mark("confidence"));
  }

  SECTION("observed marks come from the mark layer by cell lookup") {
    const auto& pat = a.true_patterns[0];
    const auto& layer = a.mark_layers[0][0];
    for (std::size_t i = 0; i < pat.size(); ++i) {
      int cell = sc.grid.cell_of(pat.points[i].x, pat.points[i].y);
      CHECK(pat.mark("confidence")[i] == layer[cell]);
    }
  }
}
