#include "finslerlab/norms.hpp"

#include "finslerlab/sampling.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace finsler {

namespace {

std::string format_vector(const Eigen::VectorXd& v) {
  std::ostringstream os;
  os.precision(6);
  os << '(';
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << ')';
  return os.str();
}

bool has_kind(const Expression& e, SymbolKind kind) {
  for (const Symbol& s : e.free_symbols()) {
    if (s.kind == kind) return true;
  }
  return false;
}

ExprMatrix half_fiber_hessian(const Expression& f2, int n) {
  ExprMatrix g(n, std::vector<Expression>(n));
  for (int i = 0; i < n; ++i) {
    const Expression di = differentiate(f2, Symbol::fiber(i));
    for (int j = i; j < n; ++j) {
      g[i][j] = 0.5 * differentiate(di, Symbol::fiber(j));
      g[j][i] = g[i][j];
    }
  }
  return g;
}

Expression quadratic_form(const ExprMatrix& m) {
  const int n = static_cast<int>(m.size());
  Expression q;
  for (int i = 0; i < n; ++i) {
    q += m[i][i] * pow(Expression::v(i), 2.0);
    for (int j = i + 1; j < n; ++j) q += 2.0 * m[i][j] * Expression::v(i) * Expression::v(j);
  }
  return q;
}

ExprMatrix symmetrized(ExprMatrix m) {
  const std::size_t n = m.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (m[i].size() != n) throw GeometryError("metric matrix must be square");
    for (std::size_t j = 0; j < i; ++j) m[i][j] = m[j][i];
  }
  return m;
}

std::vector<double> chart_inputs(const Point& x, const Vector& v) {
  std::vector<double> in(static_cast<std::size_t>(x.size() + v.size()));
  std::copy(x.data(), x.data() + x.size(), in.begin());
  std::copy(v.data(), v.data() + v.size(), in.begin() + x.size());
  return in;
}

}  // namespace

Point random_point(const ChartBox& box, CounterRng& rng) {
  Point x(static_cast<Eigen::Index>(box.size()));
  for (std::size_t i = 0; i < box.size(); ++i) x[static_cast<Eigen::Index>(i)] = rng.uniform(box[i].lo, box[i].hi);
  return x;
}

std::string to_string(NormKind kind) {
  switch (kind) {
    case NormKind::Riemannian: return "riemannian";
    case NormKind::Minkowski: return "minkowski";
    case NormKind::Randers: return "randers";
    case NormKind::Product: return "product";
    case NormKind::Raw: return "raw";
  }
  return "raw";
}

void FinslerModel::compile() {
  if (static_cast<int>(box_.size()) != dim_) throw GeometryError("chart box dimension does not match model");
  for (const Interval& iv : box_) {
    if (!(iv.lo < iv.hi)) throw GeometryError("chart box intervals must satisfy lo < hi");
  }
  const VariableLayout layout = VariableLayout::chart(dim_);
  auto c = std::make_shared<Compiled>();
  const Expression norms[] = {f_, f2_};
  c->norm = Program(norms, layout);
  std::vector<Expression> entries;
  for (const auto& row : g_) entries.insert(entries.end(), row.begin(), row.end());
  c->tensor = Program(entries, layout);
  compiled_ = std::move(c);
}

FinslerModel FinslerModel::riemannian(ExprMatrix metric, ChartBox box) {
  FinslerModel m;
  m.dim_ = static_cast<int>(metric.size());
  m.kind_ = NormKind::Riemannian;
  m.box_ = std::move(box);
  m.g_ = symmetrized(std::move(metric));
  for (const auto& row : m.g_) {
    for (const Expression& e : row) {
      if (has_kind(e, SymbolKind::Fiber)) throw GeometryError("Riemannian metric entries may not depend on v");
    }
  }
  m.f2_ = quadratic_form(m.g_);
  m.f_ = sqrt(m.f2_);
  m.compile();
  return m;
}

FinslerModel FinslerModel::minkowski(int dim, Expression f, ChartBox box, bool squared) {
  if (has_kind(f, SymbolKind::Position)) throw GeometryError("Minkowski norm may not depend on x");
  FinslerModel m = raw(dim, std::move(f), std::move(box), squared);
  m.kind_ = NormKind::Minkowski;
  return m;
}

FinslerModel FinslerModel::raw(int dim, Expression f, ChartBox box, bool squared) {
  if (dim < 1) throw GeometryError("dimension must be positive");
  FinslerModel m;
  m.dim_ = dim;
  m.kind_ = NormKind::Raw;
  m.box_ = std::move(box);
  if (squared) {
    m.f2_ = std::move(f);
    m.f_ = sqrt(m.f2_);
  } else {
    m.f_ = std::move(f);
    m.f2_ = m.f_ * m.f_;
  }
  m.g_ = half_fiber_hessian(m.f2_, dim);
  m.compile();
  return m;
}

FinslerModel FinslerModel::randers(ExprMatrix alpha, std::vector<Expression> beta, ChartBox box) {
  const int n = static_cast<int>(alpha.size());
  if (static_cast<int>(beta.size()) != n) throw GeometryError("Randers 1-form has wrong length");
  alpha = symmetrized(std::move(alpha));

  // sup |beta|_alpha over the box, on a grid; shrink until below 0.99.
  std::vector<Expression> outs;
  for (const auto& row : alpha) outs.insert(outs.end(), row.begin(), row.end());
  outs.insert(outs.end(), beta.begin(), beta.end());
  const Program probe(outs, VariableLayout::chart(n));
  auto sup_beta = [&](const ChartBox& b) {
    const int per_axis = n <= 3 ? 9 : 3;
    std::size_t total = 1;
    for (int i = 0; i < n; ++i) total *= static_cast<std::size_t>(per_axis);
    double sup = 0.0;
    std::vector<double> in(2 * static_cast<std::size_t>(n), 0.0);
    for (std::size_t k = 0; k < total; ++k) {
      std::size_t r = k;
      for (int i = 0; i < n; ++i) {
        const double t = static_cast<double>(r % per_axis) / (per_axis - 1);
        r /= per_axis;
        in[static_cast<std::size_t>(i)] = b[i].lo + t * b[i].width();
      }
      const std::vector<double> vals = probe.run(in);
      Matrix a(n, n);
      Vector bv(n);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) a(i, j) = vals[static_cast<std::size_t>(i * n + j)];
        bv[i] = vals[static_cast<std::size_t>(n * n + i)];
      }
      sup = std::max(sup, std::sqrt(std::max(0.0, bv.dot(a.ldlt().solve(bv)))));
    }
    return sup;
  };
  int shrinks = 0;
  while (sup_beta(box) >= 0.99) {
    if (++shrinks > 60) throw GeometryError("Randers 1-form is too large everywhere near the box centre");
    for (Interval& iv : box) {
      const double c = 0.5 * (iv.lo + iv.hi);
      const double h = 0.45 * iv.width();
      iv = {c - h, c + h};
    }
  }

  FinslerModel m;
  m.dim_ = n;
  m.kind_ = NormKind::Randers;
  m.box_ = std::move(box);
  m.alpha_ = alpha;
  m.beta_ = beta;
  Expression b;
  for (int i = 0; i < n; ++i) b += beta[static_cast<std::size_t>(i)] * Expression::v(i);
  m.f_ = sqrt(quadratic_form(alpha)) + b;
  m.f2_ = m.f_ * m.f_;
  m.g_ = half_fiber_hessian(m.f2_, n);
  m.compile();
  return m;
}

bool FinslerModel::contains(const Point& x) const {
  if (x.size() != dim_) return false;
  for (int i = 0; i < dim_; ++i) {
    if (x[i] < box_[static_cast<std::size_t>(i)].lo || x[i] > box_[static_cast<std::size_t>(i)].hi) return false;
  }
  return true;
}

Point FinslerModel::box_center() const {
  Point c(dim_);
  for (int i = 0; i < dim_; ++i) c[i] = 0.5 * (box_[static_cast<std::size_t>(i)].lo + box_[static_cast<std::size_t>(i)].hi);
  return c;
}

const ExprMatrix& FinslerModel::metric() const {
  if (kind_ != NormKind::Riemannian) throw GeometryError("model is not Riemannian");
  return g_;
}

FinslerModel FinslerModel::with_weight(Expression psi) const {
  if (has_kind(psi, SymbolKind::Fiber)) throw GeometryError("measure weight may only depend on x");
  FinslerModel m = *this;
  m.weight_ = std::move(psi);
  return m;
}

FinslerModel FinslerModel::with_density(const Expression& rho) const { return with_weight(-log(rho)); }

FinslerModel FinslerModel::scaled(double factor) const {
  if (!(factor > 0.0)) throw GeometryError("scale factor must be positive");
  FinslerModel m = *this;
  const double c2 = factor * factor;
  m.f_ = factor * f_;
  m.f2_ = c2 * f2_;
  for (auto& row : m.g_) {
    for (Expression& e : row) e = c2 * e;
  }
  for (auto& row : m.alpha_) {
    for (Expression& e : row) e = c2 * e;
  }
  for (Expression& e : m.beta_) e = factor * e;
  if (m.product_) m.product_->g = (m.product_->g_is_squared ? c2 : factor) * m.product_->g;
  m.compile();
  return m;
}

double FinslerModel::evaluate_norm(const Point& x, const Vector& v) const {
  const std::vector<double> out = compiled_->norm.run(chart_inputs(x, v));
  return out[0];
}

Matrix FinslerModel::evaluate_fundamental_tensor(const Point& x, const Vector& v) const {
  const std::vector<double> out = compiled_->tensor.run(chart_inputs(x, v));
  Matrix g(dim_, dim_);
  for (int i = 0; i < dim_; ++i) {
    for (int j = 0; j < dim_; ++j) g(i, j) = out[static_cast<std::size_t>(i * dim_ + j)];
  }
  return g;
}

Expression FinslerModel::shift_chart(const Expression& e, int offset) {
  if (offset == 0) return e;
  std::map<Symbol, Expression> repl;
  for (const Symbol& s : e.free_symbols()) {
    if (s.kind == SymbolKind::Position) repl[s] = Expression::x(s.index + offset);
    if (s.kind == SymbolKind::Fiber) repl[s] = Expression::v(s.index + offset);
  }
  return substitute(e, repl);
}

FundamentalTensorSample fundamental_tensor(const FinslerModel& model, const Point& x, const Vector& v) {
  if (v.size() != model.dim() || x.size() != model.dim()) throw GeometryError("point/vector dimension mismatch");
  if (v.isZero(0.0)) throw GeometryError("fundamental tensor is undefined on the zero section");
  FundamentalTensorSample s;
  s.x = x;
  s.v = v;
  s.g = model.evaluate_fundamental_tensor(x, v);
  s.min_eigenvalue = Eigen::SelfAdjointEigenSolver<Matrix>(s.g, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  return s;
}

ConvexityReport strong_convexity_check(const FinslerModel& model, int samples, std::uint64_t seed) {
  if (samples < 1) throw GeometryError("samples must be >= 1");
  ConvexityReport report;
  report.min_eigenvalue = std::numeric_limits<double>::infinity();
  CounterRng rng(seed, 0x5c0);
  for (int k = 0; k < samples; ++k) {
    const Point x = random_point(model.box(), rng);
    const Vector u = rng.unit_vector(model.dim());
    for (const Vector& v : {u, Vector(-u)}) {
      double eig = 0.0;
      try {
        eig = fundamental_tensor(model, x, v).min_eigenvalue;
      } catch (const EvalError& e) {
        throw EvalError(std::string(e.what()) + " at x=" + format_vector(x) + ", v=" + format_vector(v));
      }
      if (eig < report.min_eigenvalue) {
        report.min_eigenvalue = eig;
        report.witness_x = x;
        report.witness_v = v;
      }
    }
  }
  report.pass = report.min_eigenvalue > report.tolerance;
  return report;
}

HomogeneityReport homogeneity_check(const FinslerModel& model, int samples, std::uint64_t seed) {
  if (samples < 1) throw GeometryError("samples must be >= 1");
  HomogeneityReport report;
  CounterRng rng(seed, 0x409);
  for (int k = 0; k < samples; ++k) {
    const Point x = random_point(model.box(), rng);
    const Vector u = rng.unit_vector(model.dim());
    for (const Vector& v : {u, Vector(-u)}) {
      try {
        const double base = model.evaluate_norm(x, v);
        for (double lambda : {0.5, 2.0, 7.0}) {
          const double scaled = model.evaluate_norm(x, lambda * v);
          const double dev = std::abs(scaled - lambda * base) / std::max(std::abs(lambda * base), 1e-300);
          if (dev > report.max_deviation || report.witness_x.size() == 0) {
            report.max_deviation = dev;
            report.witness_x = x;
            report.witness_v = v;
            report.witness_lambda = lambda;
          }
        }
      } catch (const EvalError& e) {
        throw EvalError(std::string(e.what()) + " at x=" + format_vector(x) + ", v=" + format_vector(v));
      }
    }
  }
  report.pass = report.max_deviation <= report.tolerance;
  return report;
}

FinslerModel make_product_norm(const Expression& g, int flat_dim, std::vector<FinslerModel> factors,
                               ChartBox flat_box, bool g_is_squared) {
  const int m = static_cast<int>(factors.size());
  if (flat_dim < 0) throw GeometryError("flat dimension must be non-negative");
  if (static_cast<int>(flat_box.size()) != flat_dim) throw GeometryError("flat box has wrong dimension");
  for (const Symbol& s : g.free_symbols()) {
    const bool ok = (s.kind == SymbolKind::FlatSlot && s.index < flat_dim) ||
                    (s.kind == SymbolKind::FactorSlot && s.index < m);
    if (!ok) throw GeometryError("product G may only use slots a1..a" + std::to_string(flat_dim) + ", s1..s" + std::to_string(m));
  }

  // Sampled validation of G: evenness in each s_j and positive homogeneity.
  VariableLayout slots;
  for (int i = 0; i < flat_dim; ++i) slots.add(Symbol::flat_slot(i));
  for (int j = 0; j < m; ++j) slots.add(Symbol::factor_slot(j));
  const Expression outs[] = {g};
  const Program gp(outs, slots);
  CounterRng rng(0x9a, 0);
  const double degree = g_is_squared ? 2.0 : 1.0;
  for (int k = 0; k < 64; ++k) {
    std::vector<double> in(static_cast<std::size_t>(flat_dim + m));
    for (double& c : in) c = rng.normal();
    for (int j = 0; j < m; ++j) in[static_cast<std::size_t>(flat_dim + j)] = std::abs(in[static_cast<std::size_t>(flat_dim + j)]);
    const double base = gp.run(in)[0];
    for (int j = 0; j < m; ++j) {
      std::vector<double> flipped = in;
      flipped[static_cast<std::size_t>(flat_dim + j)] *= -1.0;
      if (std::abs(gp.run(flipped)[0] - base) > 1e-10 * (1.0 + std::abs(base))) {
        throw GeometryError("G is not symmetric under s" + std::to_string(j + 1) + " -> -s" + std::to_string(j + 1));
      }
    }
    std::vector<double> doubled = in;
    for (double& c : doubled) c *= 2.0;
    if (std::abs(gp.run(doubled)[0] - std::pow(2.0, degree) * base) > 1e-10 * (1.0 + std::abs(base))) {
      throw GeometryError(g_is_squared ? "G^2 is not positively 2-homogeneous" : "G is not positively 1-homogeneous");
    }
  }

  ProductStructure ps;
  ps.g = g;
  ps.g_is_squared = g_is_squared;
  ps.flat_dim = flat_dim;
  std::map<Symbol, Expression> repl;
  std::map<Symbol, Expression> squared;
  for (int i = 0; i < flat_dim; ++i) repl[Symbol::flat_slot(i)] = Expression::v(i);
  ChartBox box = std::move(flat_box);
  int offset = flat_dim;
  for (int j = 0; j < m; ++j) {
    const FinslerModel& factor = factors[static_cast<std::size_t>(j)];
    ps.factor_offsets.push_back(offset);
    const Expression q = FinslerModel::shift_chart(factor.norm_squared(), offset);
    repl[Symbol::factor_slot(j)] = sqrt(q);
    squared[Symbol::factor_slot(j)] = q;
    box.insert(box.end(), factor.box().begin(), factor.box().end());
    offset += factor.dim();
  }
  ps.factors = std::move(factors);

  FinslerModel model;
  model.dim_ = offset;
  model.kind_ = NormKind::Product;
  model.box_ = std::move(box);
  const Expression composed = substitute(g, repl, squared);
  if (g_is_squared) {
    model.f2_ = composed;
    model.f_ = sqrt(composed);
  } else {
    model.f_ = composed;
    model.f2_ = composed * composed;
  }
  model.g_ = half_fiber_hessian(model.f2_, model.dim_);
  model.product_ = std::move(ps);
  model.compile();
  return model;
}

double unit_ball_volume(int n) {
  return std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
}

DensityEstimate bh_density(const FinslerModel& model, const Point& x, std::size_t samples, std::uint64_t seed) {
  if (samples == 0) throw GeometryError("samples must be positive");
  const int n = model.dim();

  // Bounding radius of the unit ball from sampled directions.
  CounterRng dirs(seed, 0xb0);
  double max_radius = 0.0;
  for (int k = 0; k < 4096; ++k) {
    const Vector u = dirs.unit_vector(n);
    const double f = model.evaluate_norm(x, u);
    if (!(f > 1e-12)) throw GeometryError("degenerate norm: F is not positive in direction " + format_vector(u));
    max_radius = std::max(max_radius, 1.0 / f);
  }
  const double half = 1.25 * max_radius;

  constexpr std::size_t kChunks = 64;
  std::vector<std::size_t> hits(kChunks, 0);
  parallel_for(kChunks, [&](std::size_t c) {
    CounterRng rng(seed, 0xb1 + c);
    const std::size_t begin = samples * c / kChunks;
    const std::size_t end = samples * (c + 1) / kChunks;
    Vector v(n);
    std::size_t count = 0;
    for (std::size_t s = begin; s < end; ++s) {
      for (int i = 0; i < n; ++i) v[i] = rng.uniform(-half, half);
      if (v.isZero(0.0) || model.evaluate_norm(x, v) < 1.0) ++count;
    }
    hits[c] = count;
  });
  std::size_t inside = 0;
  for (std::size_t h : hits) inside += h;
  if (inside == 0) throw GeometryError("degenerate norm: unit ball volume estimate is zero");

  const double p = static_cast<double>(inside) / static_cast<double>(samples);
  DensityEstimate est;
  est.samples = samples;
  est.ball_volume = std::pow(2.0 * half, n) * p;
  est.value = unit_ball_volume(n) / est.ball_volume;
  est.std_error = est.value * std::sqrt((1.0 - p) / (p * static_cast<double>(samples)));
  return est;
}

double product_distance(const FinslerModel& product, const Vector& flat_from, const Vector& flat_to,
                        const std::vector<double>& factor_distances) {
  const auto& ps = product.product();
  if (!ps) throw GeometryError("product_distance requires a product model");
  if (flat_from.size() != ps->flat_dim || flat_to.size() != ps->flat_dim) {
    throw GeometryError("flat coordinates have wrong dimension");
  }
  if (factor_distances.size() != ps->factors.size()) throw GeometryError("one distance per factor is required");
  Bindings b;
  bool all_zero = true;
  for (int i = 0; i < ps->flat_dim; ++i) {
    b[Symbol::flat_slot(i)] = flat_to[i] - flat_from[i];
    all_zero = all_zero && flat_to[i] == flat_from[i];
  }
  for (std::size_t j = 0; j < factor_distances.size(); ++j) {
    if (factor_distances[j] < 0.0) throw GeometryError("factor distances must be non-negative");
    b[Symbol::factor_slot(static_cast<int>(j))] = factor_distances[j];
    all_zero = all_zero && factor_distances[j] == 0.0;
  }
  // G is a norm, so it vanishes at the origin where its formula may be singular.
  if (all_zero) return 0.0;
  const double g = evaluate(ps->g, b);
  return ps->g_is_squared ? std::sqrt(g) : g;
}

}  // namespace finsler
