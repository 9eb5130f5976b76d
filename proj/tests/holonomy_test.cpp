#include <doctest.h>

#include "finslerlab/holonomy.hpp"
#include "finslerlab/sampling.hpp"
#include "oracles.hpp"

#include <cmath>
#include <map>

using namespace finsler;

namespace {

Point pt(std::initializer_list<double> xs) {
  Point p(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) p[i++] = x;
  return p;
}

Matrix cols(std::initializer_list<std::initializer_list<double>> columns, int n) {
  Matrix m(n, static_cast<Eigen::Index>(columns.size()));
  Eigen::Index j = 0;
  for (const auto& c : columns) m.col(j++) = pt(c);
  return m;
}

const Point kProductBase = pt({0.0, std::numbers::pi / 2, 0.0});

}  // namespace

TEST_CASE("chart radius") {
  const ChartBox box{{-1, 1}, {0, 4}};
  CHECK(chart_radius(box, pt({0.0, 2.0})) == doctest::Approx(1.0));
  CHECK(chart_radius(box, pt({0.5, 0.2})) == doctest::Approx(0.2));
}

TEST_CASE("geodesic shooting reaches the target") {
  const ConnectionField c(oracle::load("hyperbolic").model);
  const Point a = pt({-0.5, 1.0});
  const Point b = pt({0.7, 1.6});
  const CurveRecord g = geodesic_between(c, a, b);
  CHECK((g.positions.back() - b).norm() <= 1e-9);
  CHECK((g.positions.front() - a).norm() == 0.0);
}

TEST_CASE("rotation angle") {
  const Matrix g = Matrix::Identity(2, 2);
  Matrix r(2, 2);
  r << std::cos(0.4), -std::sin(0.4), std::sin(0.4), std::cos(0.4);
  CHECK(rotation_angle(r, g) == doctest::Approx(0.4));
  CHECK(rotation_angle(r.transpose(), g) == doctest::Approx(-0.4));
  CHECK_THROWS_AS(rotation_angle(Matrix::Identity(3, 3), Matrix::Identity(3, 3)), GeometryError);
}

TEST_CASE("holonomy samples") {
  const ConnectionField c(oracle::load("product").model);
  const HolonomyBundle b = holonomy_samples(c, kProductBase, 6, 0);
  CHECK(b.matrices.size() == b.loops.size());
  CHECK(b.matrices.size() >= 11);
  CHECK(b.loops.front().kind == "geodesic-triangle");
  SUBCASE("flat direction is fixed by every loop") {
    for (const Matrix& p : b.matrices) {
      CHECK(std::abs(p(0, 0) - 1.0) <= 1e-8);
      CHECK(p.block(1, 0, 2, 1).cwiseAbs().maxCoeff() <= 1e-8);
      CHECK(p.block(0, 1, 1, 2).cwiseAbs().maxCoeff() <= 1e-8);
    }
  }
  SUBCASE("norms are preserved") {
    const NormPreservationReport r = norm_preservation(c.model(), b, 20, 0);
    CHECK(r.pass);
    CHECK(r.max_relative_change <= 1e-6);
  }
  SUBCASE("reproducible") {
    const HolonomyBundle again = holonomy_samples(c, kProductBase, 6, 0);
    for (std::size_t k = 0; k < b.matrices.size(); ++k) CHECK(b.matrices[k] == again.matrices[k]);
  }
}

TEST_CASE("latitude loop rotation on the sphere") {
  const ConnectionField c(oracle::load("sphere").model);
  for (double theta0 : {0.5, std::numbers::pi / 3, 1.2}) {
    const CurveRecord loop = sample_curve(
        c.model(),
        [&](double t, Point& x, Vector& v) {
          x = pt({theta0, t});
          v = pt({0.0, 1.0});
        },
        -std::numbers::pi, std::numbers::pi, 64);
    const Matrix g = c.model().evaluate_fundamental_tensor(loop.positions.front(), pt({1.0, 0.0}));
    CHECK(std::abs(rotation_angle(transport_matrix(c, loop), g)) ==
          doctest::Approx(std::abs(oracle::latitude_holonomy_angle(theta0))).epsilon(1e-8));
  }
}

TEST_CASE("custom loops") {
  const ConnectionField c(oracle::load("hyperbolic").model);
  const Point a = pt({0.0, 1.0});
  const CurveRecord loop = concatenate({coordinate_segment(c.model(), a, pt({0.5, 1.0})),
                                        coordinate_segment(c.model(), pt({0.5, 1.0}), pt({0.5, 1.5})),
                                        coordinate_segment(c.model(), pt({0.5, 1.5}), a)});
  HolonomyBundle b;
  b.x = a;
  add_loop(b, c, loop);
  REQUIRE(b.matrices.size() == 1);
  CHECK(b.loops.front().kind == "custom");
  // Rotation by the enclosed hyperbolic area (curvature -1).
  const Matrix g = c.model().evaluate_fundamental_tensor(a, pt({1, 0}));
  CHECK(std::abs(rotation_angle(b.matrices.front(), g)) > 0.05);
  const CurveRecord open = coordinate_segment(c.model(), a, pt({0.5, 1.0}));
  CHECK_THROWS_AS(add_loop(b, c, open), GeometryError);
}

TEST_CASE("averaged metric") {
  SUBCASE("Riemannian input returns its metric") {
    const ConnectionField c(oracle::load("sphere").model);
    const SzaboMetric h = szabo_metrize(c);
    CounterRng rng(31, 0);
    for (int k = 0; k < 5; ++k) {
      const Point x = random_point(c.model().box(), rng);
      const Matrix g = c.model().evaluate_fundamental_tensor(x, pt({1, 0}));
      CHECK((h.metric(x) - g).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }
  SUBCASE("quartic Minkowski norm gives the frozen multiple of the identity") {
    const ConnectionField c(oracle::load("quartic").model);
    const SzaboMetric h = szabo_metrize(c, 256);
    const Matrix m = h.metric(pt({0, 0}));
    CHECK(m(0, 0) == doctest::Approx(oracle::kQuarticAveragedLambda).epsilon(1e-9));
    CHECK(m(1, 1) == doctest::Approx(oracle::kQuarticAveragedLambda).epsilon(1e-9));
    CHECK(std::abs(m(0, 1)) <= 1e-12);
    CHECK(h.quadrature_error(pt({0, 0})) <= 1e-8);
  }
  SUBCASE("Levi-Civita connection of the average is the Berwald connection") {
    const ConnectionField c(oracle::load("product").model);
    const SzaboMetric h = szabo_metrize(c);
    const MetrizationReport r = metrization_check(c, h, 5, 0);
    CHECK(r.pass);
    CHECK(r.max_deviation <= 1e-6);
    CHECK(r.min_eigenvalue > 0.0);
  }
  SUBCASE("derivative matches finite differences") {
    const ConnectionField c(oracle::load("product").model);
    const SzaboMetric h = szabo_metrize(c);
    const Point x = pt({0.3, 1.0, 0.2});
    const Tensor3 dh = h.derivative(x);
    const double step = 1e-5;
    Point xp = x, xm = x;
    xp[1] += step;
    xm[1] -= step;
    const Matrix num = (h.metric(xp) - h.metric(xm)) / (2 * step);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(std::abs(dh(1, i, j) - num(i, j)) <= 1e-7);
  }
  SUBCASE("non-Berwald models are refused") {
    CHECK_THROWS_AS(szabo_metrize(ConnectionField(oracle::load("randers").model)), GeometryError);
  }
}

TEST_CASE("principal angles") {
  const Matrix a = cols({{1, 0, 0}, {0, 1, 0}}, 3);
  const Matrix b = cols({{0, 1, 0}, {1, 0, 0}}, 3);
  CHECK(principal_angle(a, b) == doctest::Approx(0.0));
  const Matrix c = cols({{1, 0, 0}, {0, 0, 1}}, 3);
  CHECK(principal_angle(a, c) == doctest::Approx(std::numbers::pi / 2));
}

TEST_CASE("de Rham split") {
  SUBCASE("quartic product splits into line and sphere") {
    const ConnectionField c(oracle::load("product").model);
    const HolonomyBundle b = holonomy_samples(c, kProductBase, 10, 0);
    const SzaboMetric h = szabo_metrize(c);
    const SplitResult s = de_rham_split(b, h.metric(kProductBase), 0);
    REQUIRE(s.subspaces.size() == 2);
    CHECK(s.flat[0]);
    CHECK_FALSE(s.flat[1]);
    CHECK(principal_angle(s.subspaces[0], cols({{1, 0, 0}}, 3)) <= 1e-6);
    CHECK(principal_angle(s.subspaces[1], cols({{0, 1, 0}, {0, 0, 1}}, 3)) <= 1e-6);
    CHECK(s.block_residual <= 1e-6);
    CHECK(s.commutant_dim == 2);
  }
  SUBCASE("sphere holonomy is irreducible") {
    const ConnectionField c(oracle::load("sphere").model);
    const Point x = pt({1.2, 0.0});
    const HolonomyBundle b = holonomy_samples(c, x, 10, 0);
    const SplitResult s = de_rham_split(b, c.model().evaluate_fundamental_tensor(x, pt({1, 0})), 0);
    REQUIRE(s.subspaces.size() == 1);
    CHECK_FALSE(s.flat[0]);
    CHECK(s.commutant_dim == 1);
  }
  SUBCASE("flat space is entirely flat") {
    const ConnectionField c(oracle::load("flat").model);
    const HolonomyBundle b = holonomy_samples(c, pt({0, 0}), 10, 0);
    const SplitResult s = de_rham_split(b, Matrix::Identity(2, 2), 0);
    REQUIRE(s.subspaces.size() == 1);
    CHECK(s.flat[0]);
    CHECK(s.subspaces[0].cols() == 2);
  }
  SUBCASE("too few loops are rejected") {
    const ConnectionField c(oracle::load("flat").model);
    const HolonomyBundle b = holonomy_samples(c, pt({0, 0}), 2, 0);
    CHECK_THROWS_AS(de_rham_split(b, Matrix::Identity(2, 2), 0), GeometryError);
  }
}

TEST_CASE("invariant functions") {
  const ConnectionField c(oracle::load("product").model);
  const HolonomyBundle b = holonomy_samples(c, kProductBase, 10, 0);
  const FinslerModel& m = c.model();
  SUBCASE("the norm itself is invariant and radial") {
    // F^2 frozen at the base point is a function on the tangent space there.
    std::map<Symbol, Expression> freeze;
    for (int i = 0; i < 3; ++i) freeze.emplace(Symbol::position(i), Expression(kProductBase[i]));
    const Expression f2 = substitute(m.norm_squared(), freeze);
    const InvariantFunctionReport r = invariant_function_test(f2, m, b, 30, 0);
    CHECK(r.invariant);
    CHECK(r.radial);
  }
  SUBCASE("the flat component is invariant but not radial") {
    const InvariantFunctionReport r = invariant_function_test(parse_expression("sqrt(v1^2)", 3), m, b, 30, 0);
    CHECK(r.invariant);
    CHECK_FALSE(r.radial);
  }
  SUBCASE("a sphere coordinate is not invariant") {
    const InvariantFunctionReport r = invariant_function_test(parse_expression("v2^2", 3), m, b, 30, 0);
    CHECK_FALSE(r.invariant);
    CHECK(r.witness_loop >= 0);
  }
  SUBCASE("position dependence is rejected") {
    CHECK_THROWS_AS(invariant_function_test(parse_expression("x1*v1", 3), m, b, 10, 0), GeometryError);
  }
}
