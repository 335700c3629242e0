#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "steiner/oracles.hpp"
#include "support.hpp"

using namespace steiner;

namespace {

const AnchorSet kRightTriangle{Point{0.0, 0.0}, Point{4.0, 0.0}, Point{0.0, 3.0}};

double ulp_slack(double v) { return 4.0 * std::numeric_limits<double>::epsilon() * std::abs(v); }

}  // namespace

TEST(Weiszfeld, CollinearReturnsMiddleAnchor) {
  const auto r = weiszfeld(AnchorSet{Point{0.0, 0.0}, Point{1.0, 0.0}, Point{5.0, 0.0}});
  EXPECT_EQ(r.location, (Point{1.0, 0.0}));
  EXPECT_TRUE(r.converged);
  EXPECT_DOUBLE_EQ(r.value, 5.0);
  EXPECT_EQ(r.method, OracleMethod::weiszfeld);
}

TEST(Weiszfeld, EquilateralTriangleReturnsCentroid) {
  const double h = std::sqrt(3.0) / 2.0;
  const auto r = weiszfeld(AnchorSet{Point{0.0, 0.0}, Point{1.0, 0.0}, Point{0.5, h}});
  EXPECT_NEAR(r.location[0], 0.5, 1e-12);
  EXPECT_NEAR(r.location[1], std::sqrt(3.0) / 6.0, 1e-12);
}

TEST(Weiszfeld, RightTriangleAgreesWithLattice) {
  const ref::Coords a = support::coords(kRightTriangle);
  const auto f = [&](const std::vector<double>& p) { return static_cast<double>(ref::distance_sum(a, p)); };
  const auto [where, best] = ref::grid_min_2d(f, 0, 4, 0, 3, 1e-3);
  const auto r = weiszfeld(kRightTriangle);
  EXPECT_NEAR(r.location[0], where[0], 2e-3);
  EXPECT_NEAR(r.location[1], where[1], 2e-3);
  EXPECT_LE(r.value, best);
  const auto median = ref::geometric_median(support::coords(kRightTriangle));
  EXPECT_NEAR(r.location[0], median[0], 1e-10);
  EXPECT_NEAR(r.location[1], median[1], 1e-10);
}

TEST(Weiszfeld, ValueNeverIncreases) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 100; ++t) {
    const std::size_t d = 2 + t % 3;
    const auto pts = support::random_points(3 + t % 40, d, 0.0, 10.0, rng);
    std::vector<double> w;
    if (t % 2) {
      std::uniform_real_distribution<double> u(0.5, 3.0);
      for (std::size_t i = 0; i < pts.size(); ++i) w.push_back(u(rng));
    }
    const auto r = weiszfeld(AnchorSet(pts), w, 1e-12, 100000);
    EXPECT_TRUE(r.converged);
    // An anchor accepted by the up-front vertex test leaves no history.
    EXPECT_TRUE(!r.value_history.empty() || r.iterations == 0);
    for (std::size_t k = 1; k < r.value_history.size(); ++k) {
      ASSERT_LE(r.value_history[k], r.value_history[k - 1] + ulp_slack(r.value_history[k - 1]))
          << "instance " << t << " iteration " << k;
    }
    const std::vector<double> x(r.location.coords().begin(), r.location.coords().end());
    const auto exact = ref::distance_sum(support::coords(AnchorSet(pts)), x, w);
    EXPECT_NEAR(r.value, static_cast<double>(exact), 1e-12 * r.value);
  }
}

TEST(Weiszfeld, HeavyAnchorIsOptimalVertex) {
  const AnchorSet anchors{Point{0.0, 0.0}, Point{4.0, 0.0}, Point{0.0, 3.0}};
  const auto r = weiszfeld(anchors, {5.0, 1.0, 1.0}, 1e-12, 1000);
  EXPECT_EQ(r.location, (Point{0.0, 0.0}));
  EXPECT_DOUBLE_EQ(r.value, 7.0);
  // Iterates reach an anchor from off-vertex starts too: a four-point star.
  const auto star = weiszfeld(AnchorSet{Point{0.0, 0.0}, Point{1.0, 0.0}, Point{-1.0, 0.0},
                                        Point{0.0, 1.0}, Point{0.0, -1.0}, Point{0.3, 0.2}});
  EXPECT_LE(distance(star.location, Point{0.0, 0.0}), 1e-12);
}

TEST(Weiszfeld, UnconvergedReportStillReturnsIterate) {
  std::mt19937_64 rng(4);
  const auto r = weiszfeld(AnchorSet(support::random_points(20, 2, 0.0, 10.0, rng)), {}, 1e-15, 1);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 1u);
  EXPECT_EQ(r.location.dimension(), 2u);
}

TEST(Weiszfeld, Validation) {
  EXPECT_THROW(weiszfeld(kRightTriangle, 0.0), ConfigError);
  EXPECT_THROW(weiszfeld(kRightTriangle, {1.0, 2.0}, 1e-9, 10), ConfigError);
  EXPECT_THROW(weiszfeld(kRightTriangle, {1.0, -2.0, 1.0}, 1e-9, 10), ConfigError);
  const auto single = weiszfeld(AnchorSet{Point{3.0, 2.0, 1.0}});
  EXPECT_EQ(single.location, (Point{3.0, 2.0, 1.0}));
  EXPECT_EQ(single.value, 0.0);
}

TEST(Centroid, Examples) {
  const auto a = centroid(AnchorSet{Point{0.0, 0.0}, Point{2.0, 0.0}, Point{1.0, 3.0}});
  EXPECT_EQ(a.location, (Point{1.0, 1.0}));
  EXPECT_DOUBLE_EQ(a.value, 8.0);
  EXPECT_EQ(centroid(AnchorSet{Point{7.0, -2.0}}).location, (Point{7.0, -2.0}));
  EXPECT_EQ(centroid(AnchorSet{Point{-1.0, -1.0}, Point{1.0, 1.0}}).location, (Point{0.0, 0.0}));
}

TEST(Centroid, IsLocalMinimumUnderCoordinateProbes) {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 50; ++t) {
    const std::size_t d = 1 + t % 8;
    const AnchorSet anchors(support::random_points(2 + t % 30, d, -5.0, 5.0, rng));
    const Objective obj(anchors, PotentialSpec::squared());
    const auto c = centroid(anchors, &obj);
    EXPECT_EQ(c.value, objective_value(obj, c.location));
    for (std::size_t k = 0; k < d; ++k) {
      for (double delta : {-1e-3, 1e-3}) {
        std::vector<double> y(c.location.coords().begin(), c.location.coords().end());
        y[k] += delta;
        EXPECT_LE(c.value, objective_value(obj, Point(y)));
      }
    }
  }
}

TEST(GridSearch, Examples) {
  const AnchorSet tri{Point{0.0, 0.0}, Point{2.0, 0.0}, Point{1.0, 3.0}};
  const auto sq = grid_search(Objective(tri, PotentialSpec::squared()), Box{{{0.0, 2.0}, {0.0, 3.0}}}, 0.5);
  EXPECT_EQ(sq.location, (Point{1.0, 1.0}));
  EXPECT_EQ(sq.cells_scanned, 35u);
  EXPECT_EQ(sq.method, OracleMethod::grid);

  const Objective one(AnchorSet{Point{1.0, 2.0}}, PotentialSpec::euclidean(0.0));
  const auto r = grid_search(one, Box{{{0.0, 2.0}, {0.0, 4.0}}}, 0.25);
  EXPECT_EQ(r.location, (Point{1.0, 2.0}));
  EXPECT_EQ(r.value, 0.0);
}

// Recorded fixture: both wells have value 1 - exp(-400) == 1 in double, and
// the lexicographic tie rule picks the left one.
TEST(GridSearch, TwoGaussianWellsFixture) {
  const Objective obj(AnchorSet{Point{0.0, 0.0}, Point{10.0, 0.0}}, PotentialSpec::gaussian_well(0.5));
  const auto r = grid_search(obj, Box{{{-2.0, 12.0}, {-2.0, 2.0}}}, 0.01, 4);
  EXPECT_EQ(r.cells_scanned, 1401u * 401u);
  EXPECT_NEAR(r.location[0], 0.0, 1e-12);
  EXPECT_NEAR(r.location[1], 0.0, 1e-12);
  EXPECT_EQ(r.value, 1.0);
}

TEST(GridSearch, TiesGoToLexicographicallySmallestPoint) {
  const Objective obj(AnchorSet{Point{-1.0, 0.0}, Point{1.0, 0.0}}, PotentialSpec::euclidean(0.0));
  // Every point of the segment between the anchors is optimal.
  const auto r = grid_search(obj, Box{{{-2.0, 2.0}, {-1.0, 1.0}}}, 0.5);
  EXPECT_EQ(r.location, (Point{-1.0, 0.0}));
}

TEST(GridSearch, GuardAndValidation) {
  const Objective obj(AnchorSet{Point{0.0, 0.0, 0.0}}, PotentialSpec::euclidean());
  EXPECT_THROW(grid_search(obj, Box{{{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}}}, 1e-3), ConfigError);
  EXPECT_THROW(grid_search(obj, Box{{{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}}}, 0.0), ConfigError);
  EXPECT_THROW(grid_search(obj, Box{{{0.0, 1.0}, {0.0, 1.0}}}, 0.1), InputError);
  EXPECT_NO_THROW(grid_search(obj, Box{{{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}}}, 0.05));
}

TEST(GridSearch, ThreadsGiveIdenticalReports) {
  std::mt19937_64 rng(21);
  const AnchorSet anchors(support::random_points(12, 3, 0.0, 10.0, rng));
  const Objective obj(anchors, PotentialSpec::gaussian_well(2.0));
  const Box box = Box::around(anchors);
  const auto one = grid_search(obj, box, 0.2, 1);
  for (unsigned threads : {2u, 3u, 8u}) {
    const auto many = grid_search(obj, box, 0.2, threads);
    EXPECT_EQ(one.location, many.location);
    EXPECT_EQ(one.value, many.value);
    EXPECT_EQ(one.cells_scanned, many.cells_scanned);
  }
}

TEST(GridSearch, BracketsWeiszfeldOnEuclideanInstances) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 10; ++t) {
    const std::size_t d = 2 + t % 2;
    const std::size_t n = 3 + t;
    const AnchorSet anchors(support::random_points(n, d, 0.0, 10.0, rng));
    const Objective obj(anchors, PotentialSpec::euclidean(0.0));
    const double spacing = d == 2 ? 0.01 : 0.1;
    const auto g = grid_search(obj, Box::around(anchors), spacing, 4);
    const auto w = weiszfeld(anchors);
    const double lipschitz = static_cast<double>(n);
    EXPECT_NEAR(g.value, objective_value(obj, g.location), 1e-12 * g.value);
    EXPECT_GE(g.value, w.value - 1e-9 * w.value);
    EXPECT_LE(g.value, w.value + lipschitz * spacing * std::sqrt(static_cast<double>(d)));
  }
}
