#include "finslerlab/connection.hpp"

#include "finslerlab/sampling.hpp"
#include "ode.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <ostream>

namespace finsler {

namespace {

std::vector<double> chart_inputs(const Point& x, const Vector& v) {
  std::vector<double> in(static_cast<std::size_t>(x.size() + v.size()));
  std::copy(x.data(), x.data() + x.size(), in.begin());
  std::copy(v.data(), v.data() + v.size(), in.begin() + x.size());
  return in;
}

// Determinants of square submatrices, memoised on (row mask, column mask).
class MinorTable {
 public:
  explicit MinorTable(const ExprMatrix& m) : m_(m) {}

  Expression det(unsigned rows, unsigned cols) {
    if (rows == 0) return 1.0;
    const auto key = std::make_pair(rows, cols);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    const int r = std::countr_zero(rows);
    Expression sum;
    int sign_pos = 0;
    for (int c = 0; c < static_cast<int>(m_.size()); ++c) {
      if (!(cols & (1u << c))) continue;
      const Expression& entry = m_[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      if (!entry.is_constant(0.0)) {
        const Expression term = entry * det(rows & ~(1u << r), cols & ~(1u << c));
        sum = (sign_pos % 2 == 0) ? sum + term : sum - term;
      }
      ++sign_pos;
    }
    memo_.emplace(key, sum);
    return sum;
  }

 private:
  const ExprMatrix& m_;
  std::map<std::pair<unsigned, unsigned>, Expression> memo_;
};

}  // namespace

struct ConnectionField::Symbolic {
  std::vector<Expression> spray;
  std::vector<Expression> nonlinear;  // row-major N^i_k
  Program spray_program;
  Program nonlinear_program;
};

struct ConnectionField::Lazy {
  std::once_flag coefficients_once;
  std::once_flag derivatives_once;
  std::once_flag berwald_once;
  std::vector<Expression> gamma;  // (k, i, j) row-major
  Program gamma_program;
  Program derivative_program;
  BerwaldReport berwald;
};

ConnectionField::ConnectionField(FinslerModel model)
    : model_(std::move(model)), sym_(std::make_shared<Symbolic>()), lazy_(std::make_shared<Lazy>()) {
  const int n = model_.dim();
  if (n > 8) throw GeometryError("symbolic spray supports charts of dimension <= 8");
  const Expression& e = model_.norm_squared();
  const ExprMatrix& g = model_.fundamental_tensor_expressions();

  // A_l = (d^2 E / dx^k dv^l) v^k - dE/dx^l
  std::vector<Expression> a(static_cast<std::size_t>(n));
  std::vector<Expression> dx(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) dx[static_cast<std::size_t>(k)] = differentiate(e, Symbol::position(k));
  for (int l = 0; l < n; ++l) {
    Expression acc = -dx[static_cast<std::size_t>(l)];
    for (int k = 0; k < n; ++k) {
      acc += differentiate(dx[static_cast<std::size_t>(k)], Symbol::fiber(l)) * Expression::v(k);
    }
    a[static_cast<std::size_t>(l)] = acc;
  }

  // g^{-1} = adj(g) / det(g)
  MinorTable minors(g);
  const unsigned all = (1u << n) - 1u;
  const Expression det = minors.det(all, all);
  sym_->spray.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Expression acc;
    for (int l = 0; l < n; ++l) {
      // adj(g)_{il} = (-1)^{i+l} det(g without row l, column i)
      Expression cof = minors.det(all & ~(1u << l), all & ~(1u << i));
      if ((i + l) % 2) cof = -cof;
      acc += cof * a[static_cast<std::size_t>(l)];
    }
    sym_->spray[static_cast<std::size_t>(i)] = acc / (4.0 * det);
  }
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      sym_->nonlinear.push_back(differentiate(sym_->spray[static_cast<std::size_t>(i)], Symbol::fiber(k)));
    }
  }
  const VariableLayout layout = VariableLayout::chart(n);
  sym_->spray_program = Program(sym_->spray, layout);
  sym_->nonlinear_program = Program(sym_->nonlinear, layout);
}

void ConnectionField::ensure_coefficients() const {
  std::call_once(lazy_->coefficients_once, [this] {
    const int n = dim();
    lazy_->gamma.assign(static_cast<std::size_t>(n * n * n), Expression());
    for (int k = 0; k < n; ++k) {
      for (int i = 0; i < n; ++i) {
        const Expression& nik = sym_->nonlinear[static_cast<std::size_t>(k * n + i)];
        for (int j = i; j < n; ++j) {
          const Expression gij = differentiate(nik, Symbol::fiber(j));
          lazy_->gamma[static_cast<std::size_t>((k * n + i) * n + j)] = gij;
          lazy_->gamma[static_cast<std::size_t>((k * n + j) * n + i)] = gij;
        }
      }
    }
    lazy_->gamma_program = Program(lazy_->gamma, VariableLayout::chart(n));
  });
}

void ConnectionField::ensure_derivatives() const {
  ensure_coefficients();
  std::call_once(lazy_->derivatives_once, [this] {
    const int n = dim();
    std::vector<Expression> outs(static_cast<std::size_t>(n * n * n * n));
    for (int l = 0; l < n; ++l) {
      for (int k = 0; k < n; ++k) {
        for (int i = 0; i < n; ++i) {
          for (int j = i; j < n; ++j) {
            const Expression d =
                differentiate(lazy_->gamma[static_cast<std::size_t>((k * n + i) * n + j)], Symbol::position(l));
            outs[static_cast<std::size_t>(((l * n + k) * n + i) * n + j)] = d;
            outs[static_cast<std::size_t>(((l * n + k) * n + j) * n + i)] = d;
          }
        }
      }
    }
    lazy_->derivative_program = Program(outs, VariableLayout::chart(n));
  });
}

Vector ConnectionField::spray(const Point& x, const Vector& v) const {
  const std::vector<double> out = sym_->spray_program.run(chart_inputs(x, v));
  return Eigen::Map<const Vector>(out.data(), dim());
}

Matrix ConnectionField::nonlinear_connection(const Point& x, const Vector& v) const {
  const std::vector<double> out = sym_->nonlinear_program.run(chart_inputs(x, v));
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(out.data(), dim(),
                                                                                                   dim());
}

Tensor3 ConnectionField::coefficients(const Point& x, const Vector& v) const {
  ensure_coefficients();
  Tensor3 t(dim());
  lazy_->gamma_program.run(chart_inputs(x, v), t.data());
  return t;
}

Tensor4 ConnectionField::coefficient_derivatives(const Point& x, const Vector& v) const {
  ensure_derivatives();
  Tensor4 t(dim());
  lazy_->derivative_program.run(chart_inputs(x, v), t.data());
  return t;
}

const BerwaldReport& ConnectionField::berwald() const {
  std::call_once(lazy_->berwald_once, [this] { lazy_->berwald = berwald_test(*this, 8, 6, 0); });
  return lazy_->berwald;
}

std::size_t ConnectionField::spray_tape_size() const { return sym_->spray_program.tape_size(); }

Vector spray_coefficients(const ConnectionField& c, const Point& x, const Vector& v) {
  if (v.isZero(0.0)) throw GeometryError("spray is evaluated at nonzero vectors only");
  return c.spray(x, v);
}

Tensor3 berwald_coefficients(const ConnectionField& c, const Point& x, const Vector& v) {
  if (v.isZero(0.0)) throw GeometryError("Berwald coefficients need a nonzero reference vector");
  return c.coefficients(x, v);
}

BerwaldReport berwald_test(const ConnectionField& c, int probe_points, int probe_vectors, std::uint64_t seed) {
  if (probe_points < 1 || probe_vectors < 2) throw GeometryError("berwald_test needs >= 1 point and >= 2 vectors");
  const int n = c.dim();
  BerwaldReport report;
  CounterRng rng(seed, 0xbe);
  for (int p = 0; p < probe_points; ++p) {
    const Point x = random_point(c.model().box(), rng);
    std::vector<double> lo;
    std::vector<double> hi;
    for (int q = 0; q < probe_vectors; ++q) {
      const Vector v = rng.unit_vector(n);
      const Tensor3 t = berwald_coefficients(c, x, v);
      const std::vector<double>& gamma = t.data();
      if (lo.empty()) {
        lo = gamma;
        hi = gamma;
      }
      for (std::size_t e = 0; e < gamma.size(); ++e) {
        lo[e] = std::min(lo[e], gamma[e]);
        hi[e] = std::max(hi[e], gamma[e]);
      }
    }
    for (std::size_t e = 0; e < lo.size(); ++e) {
      if (hi[e] - lo[e] > report.max_deviation || report.witness_x.size() == 0) {
        report.max_deviation = std::max(report.max_deviation, hi[e] - lo[e]);
        report.witness_x = x;
      }
    }
  }
  report.is_berwald = report.max_deviation <= report.tolerance;
  return report;
}

Tensor3 christoffel_from_metric(const Matrix& g, const Tensor3& dg) {
  const int n = static_cast<int>(g.rows());
  Eigen::FullPivLU<Matrix> lu(g);
  if (!lu.isInvertible()) throw GeometryError("singular metric");
  const Matrix inv = lu.inverse();
  Tensor3 gamma(n);
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) {
        double acc = 0.0;
        for (int m = 0; m < n; ++m) acc += inv(k, m) * (dg(j, m, i) + dg(i, m, j) - dg(m, i, j));
        gamma(k, i, j) = 0.5 * acc;
        gamma(k, j, i) = 0.5 * acc;
      }
    }
  }
  return gamma;
}

Tensor3 christoffel(const FinslerModel& riemannian, const Point& x) {
  const ExprMatrix& g = riemannian.metric();
  const int n = riemannian.dim();
  std::vector<Expression> outs;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) outs.push_back(g[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
  }
  for (int l = 0; l < n; ++l) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        outs.push_back(differentiate(g[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], Symbol::position(l)));
      }
    }
  }
  VariableLayout layout;
  for (int i = 0; i < n; ++i) layout.add(Symbol::position(i));
  const Program prog(outs, layout);
  const std::vector<double> vals = prog.run(std::vector<double>(x.data(), x.data() + n));
  Matrix gm(n, n);
  Tensor3 dg(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) gm(i, j) = vals[static_cast<std::size_t>(i * n + j)];
  }
  std::copy(vals.begin() + n * n, vals.end(), dg.data().begin());
  return christoffel_from_metric(gm, dg);
}

Vector covariant_derivative(const ConnectionField& c, const std::vector<Expression>& field, const Vector& v,
                           const Point& x) {
  const int n = c.dim();
  if (static_cast<int>(field.size()) != n) throw GeometryError("vector field has wrong number of components");
  std::vector<Expression> outs(field.begin(), field.end());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) outs.push_back(differentiate(field[static_cast<std::size_t>(i)], Symbol::position(j)));
  }
  const Program prog(outs, VariableLayout::chart(n));
  const std::vector<double> vals = prog.run(chart_inputs(x, v));
  Vector out = Vector::Zero(n);
  if (v.isZero(0.0)) return out;
  const Tensor3 gamma = c.coefficients(x, v);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j) {
      acc += v[j] * vals[static_cast<std::size_t>(n + i * n + j)];
      for (int k = 0; k < n; ++k) acc += gamma(i, j, k) * v[j] * vals[static_cast<std::size_t>(k)];
    }
    out[i] = acc;
  }
  return out;
}

CurveRecord integrate_geodesic(const ConnectionField& c, const Point& x0, const Vector& v0, double duration,
                               const StepControl& control) {
  const int n = c.dim();
  if (v0.isZero(0.0)) throw GeometryError("geodesic needs a nonzero initial velocity");
  if (!c.model().contains(x0)) throw GeometryError("initial point lies outside the chart box");
  if (!(duration > 0.0)) throw GeometryError("duration must be positive");
  CurveRecord rec;
  auto record = [&](double t, const Point& x, const Vector& v) {
    rec.t.push_back(t);
    rec.positions.push_back(x);
    rec.velocities.push_back(v);
    rec.speeds.push_back(c.model().evaluate_norm(x, v));
  };
  record(0.0, x0, v0);
  Eigen::VectorXd y(2 * n);
  y << x0, v0;
  auto rhs = [&](double, const Eigen::VectorXd& s, Eigen::VectorXd& ds) {
    ds.head(n) = s.tail(n);
    ds.tail(n) = -2.0 * c.spray(s.head(n), s.tail(n));
  };
  auto accept = [&](double t, const Eigen::VectorXd& s) {
    if (!c.model().contains(s.head(n))) {
      rec.exited_chart = true;
      return false;
    }
    record(t, s.head(n), s.tail(n));
    return true;
  };
  detail::OdeStats stats;
  detail::integrate_dopri5(rhs, 0.0, duration, y, control, accept, stats);
  rec.steps = stats.steps;
  rec.rejected = stats.rejected;
  rec.max_error_estimate = stats.max_error;
  return rec;
}

CurveRecord sample_curve(const FinslerModel& model, const std::function<void(double, Point&, Vector&)>& curve,
                         double t0, double t1, std::size_t segments) {
  if (segments < 1 || !(t1 > t0)) throw GeometryError("curve needs t1 > t0 and at least one segment");
  CurveRecord rec;
  for (std::size_t i = 0; i <= segments; ++i) {
    const double t = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(segments);
    Point x(model.dim());
    Vector v(model.dim());
    curve(t, x, v);
    rec.t.push_back(t);
    rec.positions.push_back(x);
    rec.velocities.push_back(v);
    rec.speeds.push_back(v.isZero(0.0) ? 0.0 : model.evaluate_norm(x, v));
    if (!model.contains(x)) rec.exited_chart = true;
  }
  return rec;
}

CurveRecord coordinate_segment(const FinslerModel& model, const Point& a, const Point& b, std::size_t segments) {
  const Vector d = b - a;
  return sample_curve(
      model,
      [&](double t, Point& x, Vector& v) {
        x = a + t * d;
        v = d;
      },
      0.0, 1.0, segments);
}

CurveRecord concatenate(const std::vector<CurveRecord>& parts) {
  CurveRecord out;
  for (const CurveRecord& p : parts) {
    if (p.t.empty()) continue;
    const double shift = out.t.empty() ? 0.0 : out.t.back() - p.t.front();
    const std::size_t first = out.t.empty() ? 0 : 1;
    for (std::size_t i = first; i < p.t.size(); ++i) {
      out.t.push_back(p.t[i] + shift);
      out.positions.push_back(p.positions[i]);
      out.velocities.push_back(p.velocities[i]);
      out.speeds.push_back(p.speeds[i]);
    }
    out.steps += p.steps;
    out.rejected += p.rejected;
    out.max_error_estimate = std::max(out.max_error_estimate, p.max_error_estimate);
    out.exited_chart = out.exited_chart || p.exited_chart;
  }
  return out;
}

namespace {

// Transports the columns of `frame` along the curve.
Matrix transport_columns(const ConnectionField& c, const CurveRecord& curve, Matrix frame, const StepControl& control,
                         std::vector<double>* norms) {
  const int n = c.dim();
  if (curve.t.size() < 2) throw GeometryError("curve has fewer than two samples");
  if (curve.exited_chart) throw GeometryError("cannot transport along a curve that left the chart");
  const Eigen::Index m = frame.cols();
  auto record_norm = [&](std::size_t i) {
    if (norms) norms->push_back(c.model().evaluate_norm(curve.positions[i], frame.col(0)));
  };
  record_norm(0);
  for (std::size_t s = 0; s + 1 < curve.t.size(); ++s) {
    const double ta = curve.t[s];
    const double h = curve.t[s + 1] - ta;
    if (!(h > 0.0)) throw GeometryError("curve time grid must be strictly increasing");
    const Point& pa = curve.positions[s];
    const Point& pb = curve.positions[s + 1];
    const Vector ua = h * curve.velocities[s];
    const Vector ub = h * curve.velocities[s + 1];
    auto rhs = [&](double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
      const double u = (t - ta) / h;
      const double u2 = u * u;
      const double u3 = u2 * u;
      const Point p = (2 * u3 - 3 * u2 + 1) * pa + (u3 - 2 * u2 + u) * ua + (-2 * u3 + 3 * u2) * pb + (u3 - u2) * ub;
      const Vector w =
          ((6 * u2 - 6 * u) * pa + (3 * u2 - 4 * u + 1) * ua + (-6 * u2 + 6 * u) * pb + (3 * u2 - 2 * u) * ub) / h;
      if (w.squaredNorm() < 1e-300) {
        dy.setZero();
        return;
      }
      const Matrix nl = c.nonlinear_connection(p, w);
      Eigen::Map<const Matrix> ym(y.data(), n, m);
      Eigen::Map<Matrix> dym(dy.data(), n, m);
      dym = -nl * ym;
    };
    StepControl ctl = control;
    ctl.initial_step = std::min(control.initial_step, 0.5 * h);
    ctl.max_step = std::min(control.max_step, h);
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(frame.data(), n * m);
    detail::OdeStats stats;
    y = detail::integrate_dopri5(rhs, ta, ta + h, y, ctl, [](double, const Eigen::VectorXd&) { return true; },
                                 stats);
    frame = Eigen::Map<const Matrix>(y.data(), n, m);
    record_norm(s + 1);
  }
  return frame;
}

}  // namespace

TransportResult parallel_transport(const ConnectionField& c, const CurveRecord& curve, const Vector& x0,
                                   const StepControl& control) {
  TransportResult out;
  const Matrix frame = transport_columns(c, curve, Matrix(x0), control, &out.norms);
  out.final_vector = frame.col(0);
  return out;
}

Matrix transport_matrix(const ConnectionField& c, const CurveRecord& curve, const StepControl& control) {
  return transport_columns(c, curve, Matrix::Identity(c.dim(), c.dim()), control, nullptr);
}

AgreementReport connections_agree(const ConnectionField& a, const ConnectionField& b, int probes, std::uint64_t seed) {
  if (a.dim() != b.dim()) throw GeometryError("connections live on charts of different dimension");
  if (probes < 1) throw GeometryError("probes must be >= 1");
  ChartBox box;
  for (int i = 0; i < a.dim(); ++i) {
    const Interval& ia = a.model().box()[static_cast<std::size_t>(i)];
    const Interval& ib = b.model().box()[static_cast<std::size_t>(i)];
    const Interval both{std::max(ia.lo, ib.lo), std::min(ia.hi, ib.hi)};
    if (!(both.lo < both.hi)) throw GeometryError("chart boxes do not overlap");
    box.push_back(both);
  }
  AgreementReport report;
  CounterRng rng(seed, 0xa9);
  for (int p = 0; p < probes; ++p) {
    const Point x = random_point(box, rng);
    const Vector v = rng.unit_vector(a.dim());
    const Tensor3 ga = a.coefficients(x, v);
    const Tensor3 gb = b.coefficients(x, v);
    for (std::size_t e = 0; e < ga.data().size(); ++e) {
      const double d = std::abs(ga.data()[e] - gb.data()[e]);
      if (d > report.max_deviation || report.witness_x.size() == 0) {
        report.max_deviation = std::max(d, report.max_deviation);
        report.witness_x = x;
      }
    }
  }
  report.agree = report.max_deviation <= report.tolerance;
  return report;
}

void write_csv(std::ostream& os, const CurveRecord& curve) {
  const std::size_t n = curve.positions.empty() ? 0 : static_cast<std::size_t>(curve.positions.front().size());
  os << "t";
  for (std::size_t i = 1; i <= n; ++i) os << ",x" << i;
  for (std::size_t i = 1; i <= n; ++i) os << ",v" << i;
  os << ",F\n";
  const auto old_precision = os.precision(17);
  for (std::size_t k = 0; k < curve.t.size(); ++k) {
    os << curve.t[k];
    for (std::size_t i = 0; i < n; ++i) os << ',' << curve.positions[k][static_cast<Eigen::Index>(i)];
    for (std::size_t i = 0; i < n; ++i) os << ',' << curve.velocities[k][static_cast<Eigen::Index>(i)];
    os << ',' << curve.speeds[k] << '\n';
  }
  os.precision(old_precision);
}

}  // namespace finsler
