#include <doctest.h>

#include "finslerlab/expr.hpp"
#include "finslerlab/sampling.hpp"

#include <cmath>
#include <functional>

using namespace finsler;

namespace {

Bindings chart_point(double x1, double x2, double v1, double v2) {
  return {{Symbol::position(0), x1}, {Symbol::position(1), x2}, {Symbol::fiber(0), v1}, {Symbol::fiber(1), v2}};
}

// Random smooth expression in x1, x2, v1, v2 whose domain includes the
// box [0.5, 1.5]^4: log and sqrt only see arguments bounded away from 0.
Expression random_expression(CounterRng& rng, int depth) {
  const auto leaf = [&] {
    const int k = static_cast<int>(rng.uniform() * 5);
    if (k == 4) return Expression(std::round(rng.uniform(-3, 3) * 4) / 4);
    return k < 2 ? Expression::x(k) : Expression::v(k - 2);
  };
  if (depth == 0) return leaf();
  const Expression a = random_expression(rng, depth - 1);
  const Expression b = random_expression(rng, depth - 1);
  switch (static_cast<int>(rng.uniform() * 9)) {
    case 0: return a + b;
    case 1: return a - b;
    case 2: return a * b;
    case 3: return a / (2.5 + sin(b));
    case 4: return pow(a, 2) + pow(b, 3);
    case 5: return exp(0.3 * sin(a));
    case 6: return log(1.5 + cos(a)) * b;
    case 7: return sqrt(1.0 + a * a);
    default: return cos(a) - tan(0.2 * sin(b));
  }
}

double fd(const Expression& e, Bindings at, const Symbol& s, double h = 1e-5) {
  const double c = at[s];
  at[s] = c + h;
  const double p = evaluate(e, at);
  at[s] = c - h;
  const double m = evaluate(e, at);
  return (p - m) / (2 * h);
}

}  // namespace

TEST_CASE("parser precedence and printing") {
  CHECK(parse_expression("x1*x2 + sin(v1)^2", 2).to_string() == "x1*x2 + sin(v1)^2");
  CHECK(parse_expression("-x1^2", 1).to_string() == "-x1^2");
  CHECK(parse_expression("x1 - (x2 - v1)", 2).to_string() == "x1 - (x2 - v1)");
  CHECK(parse_expression("x1^-1", 1).to_string() == "x1^(-1)");
  // Exponentiation associates to the left like the other binary operators.
  CHECK(parse_expression("2^3^2", 0).constant_value() == doctest::Approx(64.0));
  CHECK(parse_expression("pi", 0).constant_value() == doctest::Approx(std::numbers::pi));
  const Bindings at = chart_point(0.7, 0.0, 0.0, 0.0);
  CHECK(evaluate(parse_expression("-x1^2", 1), at) == doctest::Approx(-0.49));
}

TEST_CASE("folding and identities") {
  CHECK(parse_expression("0*x1 + 1*v2", 2).to_string() == "v2");
  CHECK(parse_expression("-(-(x1))", 1).to_string() == "x1");
  CHECK(parse_expression("x1^1 + 0", 1) == Expression::x(0));
  CHECK(parse_expression("x1^0", 1).is_constant(1.0));
  CHECK(parse_expression("2*3 + 4", 0).is_constant(10.0));
}

TEST_CASE("structurally equal expressions share a node") {
  const Expression a = parse_expression("sin(x1)*v2 + x2", 2);
  const Expression b = parse_expression("sin(x1) * v2 + x2", 2);
  CHECK(a == b);
  CHECK(a.ptr().get() == b.ptr().get());
}

TEST_CASE("parse errors carry offsets and tokens") {
  auto offending = [](const char* text) {
    try {
      parse_expression(text, 2);
    } catch (const ParseError& e) {
      return e.diagnostic();
    }
    FAIL("expected a parse error for " << text);
    return ParseDiagnostic{};
  };
  CHECK(offending("x3").token == "x3");
  CHECK(offending("v0").token == "v0");
  CHECK(offending("abs(x1)").token == "abs");
  CHECK(offending("x1 +").offset == 4);
  CHECK(offending("(x1").message.find("')'") != std::string::npos);
  CHECK(offending("x1 $ 2").offset == 3);
  CHECK(offending("foo").message.find("unknown") != std::string::npos);
  CHECK(offending("1..2").token == "1..2");
}

TEST_CASE("slots and parameters") {
  ParseOptions o;
  o.flat_slots = 1;
  o.factor_slots = 2;
  o.parameters = {"k"};
  const Expression e = parse_expression("a1^2 + s1*s2 + k", o);
  const auto syms = e.free_symbols();
  CHECK(syms.size() == 4);
  CHECK_THROWS_AS(parse_expression("s3", o), ParseError);
  CHECK_THROWS_AS(parse_expression("x1", o), ParseError);
  const Expression bound = substitute(e, {{Symbol::parameter("k"), Expression(2.0)}});
  CHECK(evaluate(bound, {{Symbol::flat_slot(0), 1.0}, {Symbol::factor_slot(0), 2.0}, {Symbol::factor_slot(1), 3.0}}) ==
        doctest::Approx(9.0));
}

TEST_CASE("evaluation errors") {
  const Expression e = parse_expression("log(x1)", 1);
  CHECK_THROWS_WITH_AS(evaluate(e, {{Symbol::position(0), -1.0}}), doctest::Contains("log(x1)"), EvalError);
  CHECK_THROWS_WITH_AS(evaluate(e, {}), doctest::Contains("unbound variable x1"), EvalError);
  CHECK_THROWS_AS(evaluate(parse_expression("1/x1", 1), {{Symbol::position(0), 0.0}}), EvalError);
  CHECK_THROWS_AS(evaluate(parse_expression("x1^(1/2)", 1), {{Symbol::position(0), -4.0}}), EvalError);
  CHECK(evaluate(parse_expression("x1^3", 1), {{Symbol::position(0), -2.0}}) == doctest::Approx(-8.0));
}

TEST_CASE("hand derivatives") {
  const Expression e = parse_expression("x1^3*sin(x2)", 2);
  CHECK(differentiate(e, Symbol::position(0)).to_string() == "3*x1^2*sin(x2)");
  const Expression q = parse_expression("(v1^4 + v2^4)^(1/2)", 2);
  const Expression d2 = differentiate(differentiate(q, Symbol::fiber(0)), Symbol::fiber(0));
  CHECK(evaluate(d2, chart_point(0, 0, 1, 0)) == doctest::Approx(2.0));
  CHECK(differentiate(e, Symbol::fiber(0)).is_constant(0.0));
}

TEST_CASE("even powers of a square root substitute smoothly") {
  const Expression g = parse_expression("a1^2 + s1^2 + (a1^4 + s1^4)^(1/2)", ParseOptions{0, 1, 1, {}});
  const Expression q = parse_expression("v1^2 + v2^2", 2);
  const Expression composed =
      substitute(g, {{Symbol::flat_slot(0), Expression::x(0)}, {Symbol::factor_slot(0), sqrt(q)}},
                 {{Symbol::factor_slot(0), q}});
  // No sqrt(q) survives, so the composition stays differentiable at q = 0.
  CHECK(composed.to_string().find("sqrt") == std::string::npos);
  const Expression d = differentiate(composed, Symbol::fiber(0));
  CHECK(evaluate(d, chart_point(1, 0, 0, 0)) == doctest::Approx(0.0));
}

TEST_CASE("property: symbolic derivatives match finite differences") {
  CounterRng rng(11, 0);
  const Symbol vars[] = {Symbol::position(0), Symbol::position(1), Symbol::fiber(0), Symbol::fiber(1)};
  for (int trial = 0; trial < 200; ++trial) {
    const Expression e = random_expression(rng, 3);
    const Bindings at = chart_point(rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5),
                                    rng.uniform(0.5, 1.5));
    for (const Symbol& s : vars) {
      const double sym = evaluate(differentiate(e, s), at);
      const double num = fd(e, at, s);
      INFO(e.to_string() << " d/d" << s.to_string());
      CHECK(std::abs(sym - num) <= 1e-6 * std::max(1.0, std::abs(sym)));
    }
  }
}

TEST_CASE("property: mixed partial derivatives commute") {
  CounterRng rng(12, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const Expression e = random_expression(rng, 3);
    const Bindings at = chart_point(rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5),
                                    rng.uniform(0.5, 1.5));
    const Expression xy = differentiate(differentiate(e, Symbol::position(0)), Symbol::fiber(1));
    const Expression yx = differentiate(differentiate(e, Symbol::fiber(1)), Symbol::position(0));
    const double a = evaluate(xy, at);
    const double b = evaluate(yx, at);
    CHECK(std::abs(a - b) <= 1e-10 * std::max(1.0, std::abs(a)));
  }
}

TEST_CASE("property: printing then parsing is the identity") {
  CounterRng rng(13, 0);
  for (int trial = 0; trial < 300; ++trial) {
    const Expression e = random_expression(rng, 4);
    const std::string text = e.to_string();
    const Expression back = parse_expression(text, 2);
    INFO(text);
    CHECK(back.to_string() == text);
    const Bindings at = chart_point(0.9, 1.1, 0.8, 1.3);
    CHECK(evaluate(back, at) == doctest::Approx(evaluate(e, at)).epsilon(1e-12));
  }
}

TEST_CASE("property: compiled programs agree with tree evaluation") {
  CounterRng rng(14, 0);
  std::vector<Expression> outs;
  for (int k = 0; k < 40; ++k) outs.push_back(random_expression(rng, 3));
  const Program prog(outs, VariableLayout::chart(2));
  const std::vector<double> in = {0.9, 1.1, 0.8, 1.3};
  const std::vector<double> got = prog.run(in);
  const Bindings at = chart_point(0.9, 1.1, 0.8, 1.3);
  for (std::size_t k = 0; k < outs.size(); ++k) CHECK(got[k] == doctest::Approx(evaluate(outs[k], at)).epsilon(1e-13));
  std::size_t separate = 0;
  for (const Expression& e : outs) separate += e.dag_size();
  CHECK(prog.tape_size() <= separate);
}

TEST_CASE("program errors name the failing subexpression") {
  const std::vector<Expression> outs = {parse_expression("x1 + sqrt(x2)", 2)};
  const Program prog(outs, VariableLayout::chart(2));
  CHECK_THROWS_WITH_AS(prog.run(std::vector<double>{1.0, -1.0, 0.0, 0.0}), doctest::Contains("sqrt(x2)"), EvalError);
  VariableLayout only_x;
  only_x.add(Symbol::position(0));
  const std::vector<Expression> needs_v = {parse_expression("x1*v1", 1)};
  CHECK_THROWS_WITH_AS(Program(needs_v, only_x), doctest::Contains("unbound variable v1"), EvalError);
}
