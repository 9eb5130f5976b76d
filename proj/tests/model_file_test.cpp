#include <doctest.h>

#include "finslerlab/model_file.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace finsler;

namespace {

Point pt(std::initializer_list<double> xs) {
  Point p(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) p[i++] = x;
  return p;
}

std::string error_of(const std::string& text) {
  try {
    parse_model(text);
  } catch (const ModelFileError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("boxes") {
  const ChartBox b = parse_box("[0.1, 3.04] x [-pi, pi]");
  REQUIRE(b.size() == 2);
  CHECK(b[0].lo == doctest::Approx(0.1));
  CHECK(b[1].hi == doctest::Approx(std::numbers::pi));
  CHECK_THROWS(parse_box("[1, 0]"));
  CHECK_THROWS(parse_box("[0, 1] x"));
  CHECK_THROWS(parse_box("(0, 1)"));
}

TEST_CASE("Riemannian model with parameters and comments") {
  const ModelFile f = parse_model(R"m([chart]
dim = 2
box = [-1, 1] x [-1, 1]   ; square
[params]
c = 2
[norm]
kind = riemannian
g11 = "c"
g22 = "1 + x1^2"   # grows in x1
)m",
                                  "demo");
  CHECK(f.name == "demo");
  CHECK(f.params.at("c") == 2.0);
  CHECK(f.model.kind() == NormKind::Riemannian);
  CHECK(f.model.evaluate_norm(pt({1.0, 0.0}), pt({1.0, 1.0})) == doctest::Approx(2.0));
  CHECK(f.hash != 0);
}

TEST_CASE("Minkowski, Randers and measures") {
  const ModelFile q = oracle::load("quartic");
  CHECK(q.model.kind() == NormKind::Minkowski);
  CHECK(q.name == "quartic");
  const ModelFile r = oracle::load("randers");
  CHECK(r.model.kind() == NormKind::Randers);
  CHECK(r.params.at("k") == doctest::Approx(0.1));
  CHECK(r.model.evaluate_norm(pt({0.5, 0.0}), pt({0.0, 1.0})) == doctest::Approx(1.05));
  const ModelFile w = parse_model(R"m([chart]
dim = 1
box = [0, 1]
[norm]
kind = minkowski
F2 = "v1^2"
[measure]
density = "exp(x1)"
)m");
  REQUIRE(w.model.weight().has_value());
  CHECK(evaluate(*w.model.weight(), {{Symbol::position(0), 0.25}}) == doctest::Approx(-0.25));
}

TEST_CASE("product models") {
  const ModelFile p = oracle::load("product");
  CHECK(p.model.kind() == NormKind::Product);
  CHECK(p.model.dim() == 3);
  REQUIRE(p.model.product().has_value());
  CHECK(p.model.product()->flat_dim == 1);
  CHECK(p.model.product()->factors.size() == 1);
  CHECK(p.model.product()->factors[0].box()[0].lo == doctest::Approx(0.1));
}

TEST_CASE("hashes follow the bytes") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  const std::string text = "[chart]\ndim = 1\nbox = [0, 1]\n[norm]\nkind = minkowski\nF = \"sqrt(v1^2)\"\n";
  CHECK(parse_model(text).hash == fnv1a(text));
  CHECK(parse_model(text + " ").hash != parse_model(text).hash);
}

TEST_CASE("malformed files name the problem") {
  CHECK(error_of("[norm]\nkind = riemannian\n").find("chart") != std::string::npos);
  CHECK(error_of("[chart]\ndim = 2\nbox = [0,1]\n[norm]\nkind = minkowski\nF = \"v1\"\n").find("box") !=
        std::string::npos);
  CHECK(error_of("[chart]\ndim = 1\nbox = [0,1]\n[norm]\nkind = spline\n").find("spline") != std::string::npos);
  CHECK(error_of("[chart]\ndim = 1\nbox = [0,1]\n[norm]\nkind = minkowski\nF = \"v1 +\"\n").find("F") !=
        std::string::npos);
  CHECK(error_of("[chart]\ndim = 1\nbox = [0,1]\n[norm]\nkind = minkowski\nF = \"q*v1\"\n").find("q") !=
        std::string::npos);
  CHECK_FALSE(error_of("[chart\n").empty());
  CHECK_THROWS_AS(load_model("/nonexistent/model.model"), ModelFileError);
}

TEST_CASE("every gallery model loads") {
  for (const char* name : {"flat", "sphere", "hyperbolic", "quartic", "product", "product-riemannian", "randers"}) {
    INFO(name);
    CHECK_NOTHROW(oracle::load(name));
  }
}
