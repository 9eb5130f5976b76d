#include "finslerlab/curvature.hpp"

#include "finslerlab/sampling.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <ostream>

namespace finsler {

namespace {

void require_nonzero(const Vector& v, const char* what) {
  if (v.isZero(0.0)) throw GeometryError(std::string(what) + " must be nonzero");
}

void require_berwald(const ConnectionField& c, const char* op) {
  const BerwaldReport& b = c.berwald();
  if (!b.is_berwald) {
    throw GeometryError(std::string(op) + " needs a Berwald model (connection deviation " +
                        std::to_string(b.max_deviation) + ")");
  }
}

void require_agreement(const ConnectionField& a, const ConnectionField& b, int probes, std::uint64_t seed) {
  const AgreementReport ag = connections_agree(a, b, std::max(probes, 8), seed);
  if (!ag.agree) {
    throw GeometryError("models do not share a connection (deviation " + std::to_string(ag.max_deviation) + ")");
  }
}

Matrix ricci_matrix(const Tensor4& r) {
  const int n = r.dim();
  Matrix m = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) m(j, k) += r(i, j, i, k);
    }
  }
  return m;
}

// Unit vector for F at x in a uniformly random Euclidean direction.
Vector random_unit(const FinslerModel& m, const Point& x, CounterRng& rng) {
  const Vector u = rng.unit_vector(m.dim());
  return u / m.evaluate_norm(x, u);
}

}  // namespace

Tensor4 curvature_tensor(const ConnectionField& c, const Point& x, const Vector& v) {
  require_nonzero(v, "reference vector");
  const int n = c.dim();
  const Tensor3 g = c.coefficients(x, v);
  const Tensor4 d = c.coefficient_derivatives(x, v);
  Tensor4 r(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        for (int l = k + 1; l < n; ++l) {
          double acc = d(k, i, l, j) - d(l, i, k, j);
          for (int m = 0; m < n; ++m) acc += g(i, k, m) * g(m, l, j) - g(i, l, m) * g(m, k, j);
          r(i, j, k, l) = acc;
          r(i, j, l, k) = -acc;
        }
      }
    }
  }
  return r;
}

double antisymmetry_defect(const Tensor4& r) {
  const int n = r.dim();
  double worst = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) worst = std::max(worst, std::abs(r(i, j, k, l) + r(i, j, l, k)));
  return worst;
}

double bianchi_defect(const Tensor4& r) {
  const int n = r.dim();
  double worst = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          worst = std::max(worst, std::abs(r(i, j, k, l) + r(i, k, l, j) + r(i, l, j, k)));
  return worst;
}

Vector apply_curvature(const Tensor4& r, const Vector& v, const Vector& w, const Vector& z) {
  const int n = r.dim();
  Vector out = Vector::Zero(n);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) acc += r(i, j, k, l) * z[j] * v[k] * w[l];
    out[i] = acc;
  }
  return out;
}

double sectional_curvature(const Tensor4& r, const Matrix& g, const Vector& v, const Vector& w) {
  const double vv = v.dot(g * v);
  const double ww = w.dot(g * w);
  const double vw = v.dot(g * w);
  const double den = vv * ww - vw * vw;
  if (!(den > 1e-14)) throw GeometryError("flag vectors are linearly dependent");
  return v.dot(g * apply_curvature(r, v, w, w)) / den;
}

double sectional_curvature(const ConnectionField& riemannian, const Point& x, const Vector& v, const Vector& w) {
  if (riemannian.model().kind() != NormKind::Riemannian) {
    throw GeometryError("sectional curvature needs a Riemannian model; use flag curvature");
  }
  require_nonzero(v, "v");
  const Tensor4 r = curvature_tensor(riemannian, x, v);
  return sectional_curvature(r, riemannian.model().evaluate_fundamental_tensor(x, v), v, w);
}

double flag_curvature(const ConnectionField& c, const Point& x, const Vector& v, const Vector& w) {
  require_nonzero(v, "flag pole");
  require_berwald(c, "flag curvature");
  const Tensor4 r = curvature_tensor(c, x, v);
  return sectional_curvature(r, c.model().evaluate_fundamental_tensor(x, v), v, w);
}

double ricci(const ConnectionField& c, const Point& x, const Vector& v) {
  require_nonzero(v, "v");
  const Tensor4 r = curvature_tensor(c, x, v);
  return v.dot(ricci_matrix(r) * v);
}

InvarianceReport ricci_invariance_check(const ConnectionField& a, const ConnectionField& b, int probes,
                                        std::uint64_t seed) {
  if (probes < 1) throw GeometryError("probes must be >= 1");
  require_agreement(a, b, probes, seed);
  InvarianceReport rep;
  rep.tolerance = kRicciInvarianceTolerance;
  rep.probes = probes;
  CounterRng rng(seed, 0x71);
  ChartBox box;
  for (int i = 0; i < a.dim(); ++i) {
    const Interval& ia = a.model().box()[static_cast<std::size_t>(i)];
    const Interval& ib = b.model().box()[static_cast<std::size_t>(i)];
    box.push_back({std::max(ia.lo, ib.lo), std::min(ia.hi, ib.hi)});
  }
  for (int p = 0; p < probes; ++p) {
    const Point x = random_point(box, rng);
    const Vector v = rng.unit_vector(a.dim());
    const double d = std::abs(ricci(a, x, v) - ricci(b, x, v));
    if (d > rep.max_deviation || rep.witness_x.size() == 0) {
      rep.max_deviation = std::max(d, rep.max_deviation);
      rep.witness_x = x;
      rep.witness_v = v;
    }
  }
  rep.pass = rep.max_deviation <= rep.tolerance;
  return rep;
}

WeightedRicci weighted_ricci(const ConnectionField& c, const WeightSpec& w, const Point& x, const Vector& v) {
  require_nonzero(v, "v");
  const int n = c.dim();
  const double big_n = w.n_param;
  if (std::isnan(big_n) || big_n < n - 1e-12) {
    throw GeometryError("dimension parameter N must satisfy N >= n = " + std::to_string(n));
  }
  std::vector<Expression> outs;
  std::vector<Expression> grad;
  for (int i = 0; i < n; ++i) grad.push_back(differentiate(w.psi, Symbol::position(i)));
  outs = grad;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) outs.push_back(differentiate(grad[static_cast<std::size_t>(i)], Symbol::position(j)));
  const Program prog(outs, VariableLayout::chart(n));
  std::vector<double> in(static_cast<std::size_t>(2 * n));
  for (int i = 0; i < n; ++i) {
    in[static_cast<std::size_t>(i)] = x[i];
    in[static_cast<std::size_t>(n + i)] = v[i];
  }
  const std::vector<double> vals = prog.run(in);
  const Vector spray = c.spray(x, v);

  WeightedRicci out;
  out.ricci = ricci(c, x, v);
  for (int i = 0; i < n; ++i) {
    const double gi = vals[static_cast<std::size_t>(i)];
    out.first += gi * v[i];
    out.second -= 2.0 * gi * spray[i];
    for (int j = 0; j < n; ++j) out.second += vals[static_cast<std::size_t>(n + i * n + j)] * v[i] * v[j];
  }
  if (std::isinf(big_n)) {
    out.value = out.ricci + out.second;
  } else if (big_n - n <= 1e-12) {
    if (std::abs(out.first) > kWeightFirstDerivativeTolerance) {
      out.minus_infinity = true;
      out.value = -std::numeric_limits<double>::infinity();
    } else {
      out.value = out.ricci + out.second;
    }
  } else {
    out.value = out.ricci + out.second + out.first * out.first / (big_n - n);
  }
  return out;
}

std::string to_string(EinsteinVerdict v) {
  switch (v) {
    case EinsteinVerdict::Einstein: return "einstein";
    case EinsteinVerdict::RicciFlat: return "ricci-flat";
    case EinsteinVerdict::NotEinstein: return "not-einstein";
  }
  return "unknown";
}

EinsteinReport einstein_check(const ConnectionField& c, int points, std::uint64_t seed) {
  if (points < 1) throw GeometryError("points must be >= 1");
  require_berwald(c, "einstein check");
  const int n = c.dim();
  const int dirs = std::max(4 * n, 16);
  const FinslerModel& m = c.model();
  EinsteinReport rep;
  CounterRng rng(seed, 0xe1);
  double lo = 0.0;
  double hi = 0.0;
  CompensatedSum lambda_sum;
  for (int p = 0; p < points; ++p) {
    EinsteinPoint pt;
    pt.x = random_point(m.box(), rng);
    std::vector<Vector> vs;
    for (int q = 0; q < dirs; ++q) vs.push_back(random_unit(m, pt.x, rng));
    const Matrix rc = ricci_matrix(curvature_tensor(c, pt.x, vs.front()));
    std::vector<double> ric;
    CompensatedSum acc;
    for (const Vector& v : vs) {
      ric.push_back(v.dot(rc * v));
      acc.add(ric.back());
    }
    // F(v) = 1, so the least-squares lambda is the mean.
    pt.lambda = acc.value() / dirs;
    for (double r : ric) pt.residual = std::max(pt.residual, std::abs(r - pt.lambda) / std::max(1.0, std::abs(pt.lambda)));
    const Matrix g0 = m.evaluate_fundamental_tensor(pt.x, vs.front());
    for (const Vector& v : vs) {
      const double dev = (m.evaluate_fundamental_tensor(pt.x, v) - g0).cwiseAbs().maxCoeff();
      if (dev > 1e-8 * std::max(1.0, g0.cwiseAbs().maxCoeff())) rep.non_riemannian = true;
    }
    lo = p == 0 ? pt.lambda : std::min(lo, pt.lambda);
    hi = p == 0 ? pt.lambda : std::max(hi, pt.lambda);
    lambda_sum.add(pt.lambda);
    rep.max_residual = std::max(rep.max_residual, pt.residual);
    rep.points.push_back(std::move(pt));
  }
  rep.lambda = lambda_sum.value() / points;
  rep.lambda_spread = hi - lo;
  if (rep.max_residual <= rep.tolerance && rep.lambda_spread <= rep.tolerance) {
    rep.verdict = std::abs(rep.lambda) <= rep.tolerance ? EinsteinVerdict::RicciFlat : EinsteinVerdict::Einstein;
  }
  rep.rigidity_warning = rep.verdict == EinsteinVerdict::Einstein && rep.non_riemannian;
  return rep;
}

InvarianceReport weighted_invariance_check(const ConnectionField& a, const ConnectionField& b, const Expression& psi,
                                           int probes, std::uint64_t seed) {
  if (probes < 1) throw GeometryError("probes must be >= 1");
  require_agreement(a, b, probes, seed);
  const int n = a.dim();
  const double ns[] = {static_cast<double>(n), static_cast<double>(n + 1), kInfiniteN};
  InvarianceReport rep;
  rep.tolerance = kWeightedInvarianceTolerance;
  rep.probes = probes;
  CounterRng rng(seed, 0x77);
  ChartBox box;
  for (int i = 0; i < n; ++i) {
    const Interval& ia = a.model().box()[static_cast<std::size_t>(i)];
    const Interval& ib = b.model().box()[static_cast<std::size_t>(i)];
    box.push_back({std::max(ia.lo, ib.lo), std::min(ia.hi, ib.hi)});
  }
  for (int p = 0; p < probes; ++p) {
    const Point x = random_point(box, rng);
    const Vector v = rng.unit_vector(n);
    for (double big_n : ns) {
      const WeightedRicci ra = weighted_ricci(a, {psi, big_n}, x, v);
      const WeightedRicci rb = weighted_ricci(b, {psi, big_n}, x, v);
      double d = 0.0;
      if (ra.minus_infinity != rb.minus_infinity) {
        d = std::numeric_limits<double>::infinity();
      } else if (!ra.minus_infinity) {
        d = std::abs(ra.value - rb.value);
      }
      if (d > rep.max_deviation || rep.witness_x.size() == 0) {
        rep.max_deviation = std::max(d, rep.max_deviation);
        rep.witness_x = x;
        rep.witness_v = v;
      }
    }
  }
  rep.pass = rep.max_deviation <= rep.tolerance;
  return rep;
}

void write_csv_header(std::ostream& os, int dim, const std::vector<double>& n_values) {
  for (int i = 1; i <= dim; ++i) os << 'x' << i << ',';
  for (int i = 1; i <= dim; ++i) os << 'v' << i << ',';
  os << "K,flag,Ric";
  for (double nv : n_values) {
    os << ",Ric_";
    if (std::isinf(nv)) {
      os << "inf";
    } else {
      os << nv;
    }
  }
  os << '\n';
}

void write_csv_row(std::ostream& os, const CurvatureSample& s) {
  const auto old = os.precision(17);
  auto opt = [&](const std::optional<double>& d) {
    if (d) os << *d;
  };
  for (Eigen::Index i = 0; i < s.x.size(); ++i) os << s.x[i] << ',';
  for (Eigen::Index i = 0; i < s.x.size(); ++i) {
    if (s.v) os << (*s.v)[i];
    os << ',';
  }
  opt(s.sectional);
  os << ',';
  opt(s.flag);
  os << ',';
  opt(s.ricci);
  for (const auto& [nv, wr] : s.weighted) {
    os << ',';
    if (wr.minus_infinity) {
      os << "-inf";
    } else {
      os << wr.value;
    }
  }
  os << '\n';
  os.precision(old);
}

}  // namespace finsler
