#include <doctest.h>

#include "finslerlab/curvature.hpp"
#include "finslerlab/sampling.hpp"
#include "oracles.hpp"

#include <cmath>
#include <sstream>

using namespace finsler;

namespace {

Point pt(std::initializer_list<double> xs) {
  Point p(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) p[i++] = x;
  return p;
}

double max_diff(const Tensor4& a, const Tensor4& b) {
  double d = 0.0;
  for (std::size_t e = 0; e < a.data().size(); ++e) d = std::max(d, std::abs(a.data()[e] - b.data()[e]));
  return d;
}

const char* const kGallery[] = {"flat", "sphere", "hyperbolic", "quartic", "product", "product-riemannian", "randers"};

}  // namespace

TEST_CASE("sphere curvature tensor matches the hand formula") {
  const ConnectionField c(oracle::load("sphere").model);
  const double theta = 0.9;
  const Tensor4 r = curvature_tensor(c, pt({theta, 0.4}), pt({1.0, 0.2}));
  CHECK(r(0, 1, 0, 1) == doctest::Approx(oracle::sphere_r_0101(theta)));
  CHECK(r(0, 1, 1, 0) == doctest::Approx(-oracle::sphere_r_0101(theta)));
  CHECK(r(1, 0, 0, 1) == doctest::Approx(-1.0));
  CHECK(r(0, 0, 0, 1) == doctest::Approx(0.0));
}

TEST_CASE("constant curvature models") {
  SUBCASE("sphere") {
    const ConnectionField c(oracle::load("sphere").model);
    CounterRng rng(21, 0);
    for (int k = 0; k < 10; ++k) {
      const Point x = random_point(c.model().box(), rng);
      const Vector v = rng.unit_vector(2);
      const Vector w = rng.unit_vector(2);
      CHECK(sectional_curvature(c, x, v, w) == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(flag_curvature(c, x, v, w) == doctest::Approx(1.0).epsilon(1e-9));
      const double f = c.model().evaluate_norm(x, v);
      CHECK(ricci(c, x, v) == doctest::Approx(f * f).epsilon(1e-9));
    }
  }
  SUBCASE("hyperbolic half-plane") {
    const ConnectionField c(oracle::load("hyperbolic").model);
    CounterRng rng(22, 0);
    for (int k = 0; k < 10; ++k) {
      const Point x = random_point(c.model().box(), rng);
      CHECK(sectional_curvature(c, x, rng.unit_vector(2), rng.unit_vector(2)) == doctest::Approx(-1.0).epsilon(1e-9));
    }
  }
  SUBCASE("flat and Minkowski") {
    for (const char* name : {"flat", "quartic"}) {
      const ConnectionField c(oracle::load(name).model);
      const Tensor4 r = curvature_tensor(c, pt({0.2, 0.3}), pt({0.6, 0.8}));
      for (double e : r.data()) CHECK(e == 0.0);
    }
  }
}

TEST_CASE("quartic product curvature") {
  const ConnectionField c(oracle::load("product").model);
  const Point x = pt({0.5, 0.785, 0.3});
  SUBCASE("flags containing the flat direction vanish") {
    CHECK(std::abs(flag_curvature(c, x, pt({1, 0, 0}), pt({0, 1, 0}))) <= 1e-9);
    CHECK(std::abs(flag_curvature(c, x, pt({0, 1, 0}), pt({1, 0, 0}))) <= 1e-9);
    CHECK(std::abs(flag_curvature(c, x, pt({1, 0, 0}), pt({0, 0, 1}))) <= 1e-9);
  }
  SUBCASE("Ricci sees only the sphere factor") {
    CHECK(ricci(c, x, pt({0, 1, 0})) == doctest::Approx(1.0));
    CHECK(ricci(c, x, pt({1, 0, 0})) == doctest::Approx(0.0));
    // Ric(v) = |v_sphere|^2 in the sphere metric.
    const Vector v = pt({0.7, 0.2, 0.5});
    const double s2 = 0.04 + std::sin(0.785) * std::sin(0.785) * 0.25;
    CHECK(ricci(c, x, v) == doctest::Approx(s2));
  }
  SUBCASE("flag curvature inside the sphere factor") {
    // F^2 = 2 |v|^2 on sphere directions, so g_v is twice the round metric.
    CHECK(flag_curvature(c, x, pt({0, 1, 0}), pt({0, 0, 1})) == doctest::Approx(0.5));
  }
}

TEST_CASE("flag and sectional preconditions") {
  const ConnectionField randers(oracle::load("randers").model);
  CHECK_THROWS_AS(flag_curvature(randers, pt({0.1, 0.1}), pt({1, 0}), pt({0, 1})), GeometryError);
  const ConnectionField quartic(oracle::load("quartic").model);
  CHECK_THROWS_AS(sectional_curvature(quartic, pt({0, 0}), pt({1, 0}), pt({0, 1})), GeometryError);
  const ConnectionField sphere(oracle::load("sphere").model);
  CHECK_THROWS_AS(sectional_curvature(sphere, pt({1, 0}), pt({1, 0}), pt({2, 0})), GeometryError);
}

TEST_CASE("property: symmetries and finite-difference agreement across the gallery") {
  for (const char* name : kGallery) {
    const ConnectionField c(oracle::load(name).model);
    CounterRng rng(23, 0);
    for (int k = 0; k < 6; ++k) {
      const Point x = random_point(c.model().box(), rng);
      const Vector v = rng.unit_vector(c.model().dim());
      const Tensor4 r = curvature_tensor(c, x, v);
      INFO(name << " at " << x.transpose());
      CHECK(antisymmetry_defect(r) <= 1e-10);
      CHECK(bianchi_defect(r) <= 1e-9);
      CHECK(max_diff(r, oracle::fd_curvature(c, x, v)) <= 1e-6);
    }
  }
}

TEST_CASE("property: Ricci is quadratic in the direction") {
  const ConnectionField c(oracle::load("product").model);
  CounterRng rng(24, 0);
  for (int k = 0; k < 10; ++k) {
    const Point x = random_point(c.model().box(), rng);
    const Vector v = rng.unit_vector(3);
    const double lambda = rng.uniform(0.2, 3.0);
    CHECK(ricci(c, x, lambda * v) == doctest::Approx(lambda * lambda * ricci(c, x, v)).epsilon(1e-10));
  }
}

TEST_CASE("apply_curvature and sectional curvature with an explicit metric") {
  const ConnectionField c(oracle::load("sphere").model);
  const Point x = pt({1.1, 0.0});
  const Tensor4 r = curvature_tensor(c, x, pt({1, 0}));
  const Vector z = apply_curvature(r, pt({1, 0}), pt({0, 1}), pt({0, 1}));
  CHECK(z[0] == doctest::Approx(oracle::sphere_r_0101(1.1)));
  CHECK(z[1] == doctest::Approx(0.0));
  const Matrix g = c.model().evaluate_fundamental_tensor(x, pt({1, 0}));
  CHECK(sectional_curvature(r, g, pt({1, 0}), pt({0, 1})) == doctest::Approx(1.0));
}

TEST_CASE("Ricci invariance between models sharing a connection") {
  const ConnectionField a(oracle::load("product").model);
  const ConnectionField b(oracle::load("product-riemannian").model);
  const InvarianceReport r = ricci_invariance_check(a, b, 20, 0);
  CHECK(r.pass);
  CHECK(r.max_deviation <= kRicciInvarianceTolerance);
  CHECK(r.probes == 20);
  const ConnectionField s(oracle::load("sphere").model);
  const ConnectionField h(oracle::load("hyperbolic").model);
  CHECK_THROWS_AS(ricci_invariance_check(s, h, 5, 0), GeometryError);
}

TEST_CASE("weighted Ricci") {
  const ChartBox box{{-2, 2}};
  const FinslerModel line = FinslerModel::riemannian({{1.0}}, box);
  const ConnectionField c(line);
  const Expression psi = parse_expression("x1", 1);
  SUBCASE("linear weight on a line") {
    const WeightedRicci two = weighted_ricci(c, {psi, 2.0}, pt({0.3}), pt({1.0}));
    CHECK(two.first == doctest::Approx(1.0));
    CHECK(two.second == doctest::Approx(0.0));
    // Ric + (psi o eta)'' + ((psi o eta)')^2 / (N - n) = 0 + 0 + 1.
    CHECK(two.value == doctest::Approx(1.0).epsilon(1e-12));
    const WeightedRicci three = weighted_ricci(c, {psi, 3.0}, pt({0.3}), pt({1.0}));
    CHECK(three.value == doctest::Approx(0.5));
    const WeightedRicci n = weighted_ricci(c, {psi, 1.0}, pt({0.3}), pt({1.0}));
    CHECK(n.minus_infinity);
    CHECK(std::isinf(n.value));
    CHECK(n.value < 0);
    const WeightedRicci inf = weighted_ricci(c, {psi, kInfiniteN}, pt({0.3}), pt({1.0}));
    CHECK(inf.value == doctest::Approx(0.0));
  }
  SUBCASE("quadratic weight") {
    const Expression q = parse_expression("x1^2", 1);
    const WeightedRicci inf = weighted_ricci(c, {q, kInfiniteN}, pt({0.5}), pt({2.0}));
    CHECK(inf.second == doctest::Approx(8.0));
    CHECK(inf.value == doctest::Approx(8.0));
    // At the critical point the N = n branch is finite.
    const WeightedRicci n = weighted_ricci(c, {q, 1.0}, pt({0.0}), pt({1.0}));
    CHECK_FALSE(n.minus_infinity);
    CHECK(n.value == doctest::Approx(2.0));
  }
  SUBCASE("zero weight reproduces Ricci") {
    const ConnectionField s(oracle::load("sphere").model);
    for (double big_n : {2.0, 3.0, kInfiniteN}) {
      const WeightedRicci r = weighted_ricci(s, {Expression(0.0), big_n}, pt({1.0, 0.5}), pt({0.3, 0.8}));
      CHECK(r.value == doctest::Approx(ricci(s, pt({1.0, 0.5}), pt({0.3, 0.8}))).epsilon(1e-12));
    }
  }
  SUBCASE("property: Ric_N decreases towards Ric_inf") {
    const ConnectionField s(oracle::load("sphere").model);
    const WeightSpec base{parse_expression("x1*x2 + sin(x2)", 2), kInfiniteN};
    double prev = kInfiniteN;
    for (double big_n : {2.5, 3.0, 5.0, 10.0, 100.0}) {
      const WeightedRicci r = weighted_ricci(s, {base.psi, big_n}, pt({1.0, 0.5}), pt({0.3, 0.8}));
      CHECK(r.value < prev);
      prev = r.value;
    }
    CHECK(prev > weighted_ricci(s, base, pt({1.0, 0.5}), pt({0.3, 0.8})).value);
  }
  SUBCASE("N below the dimension is rejected") {
    CHECK_THROWS_AS(weighted_ricci(c, {psi, 0.5}, pt({0.0}), pt({1.0})), GeometryError);
  }
  SUBCASE("invariance on the product pair") {
    const ConnectionField a(oracle::load("product").model);
    const ConnectionField b(oracle::load("product-riemannian").model);
    const InvarianceReport r = weighted_invariance_check(a, b, parse_expression("x1^2 + 0.1*x2", 3), 10, 0);
    CHECK(r.pass);
    CHECK(r.max_deviation <= kWeightedInvarianceTolerance);
  }
}

TEST_CASE("Einstein verdicts") {
  const EinsteinReport sphere = einstein_check(ConnectionField(oracle::load("sphere").model), 4, 0);
  CHECK(sphere.verdict == EinsteinVerdict::Einstein);
  CHECK(sphere.lambda == doctest::Approx(1.0));
  CHECK_FALSE(sphere.rigidity_warning);
  const EinsteinReport hyp = einstein_check(ConnectionField(oracle::load("hyperbolic").model), 4, 0);
  CHECK(hyp.verdict == EinsteinVerdict::Einstein);
  CHECK(hyp.lambda == doctest::Approx(-1.0));
  const EinsteinReport flat = einstein_check(ConnectionField(oracle::load("quartic").model), 4, 0);
  CHECK(flat.verdict == EinsteinVerdict::RicciFlat);
  CHECK(flat.non_riemannian);
  CHECK_FALSE(flat.rigidity_warning);
  const EinsteinReport prod = einstein_check(ConnectionField(oracle::load("product").model), 4, 0);
  CHECK(prod.verdict == EinsteinVerdict::NotEinstein);
  CHECK(to_string(EinsteinVerdict::RicciFlat) == "ricci-flat");
  CHECK_THROWS_AS(einstein_check(ConnectionField(oracle::load("randers").model), 2, 0), GeometryError);
}

TEST_CASE("curvature CSV") {
  CurvatureSample s;
  s.x = pt({0.1, 0.2});
  s.v = pt({1, 0});
  s.w = pt({0, 1});
  s.ricci = 1.5;
  s.weighted.push_back({2.0, WeightedRicci{-0.5, 1.5, 0, 0, false}});
  std::ostringstream os;
  write_csv_header(os, 2, {2.0});
  write_csv_row(os, s);
  const std::string text = os.str();
  CHECK(text.find("x1,x2,v1,v2") != std::string::npos);
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);
  CHECK(text.find("1.5") != std::string::npos);
}
