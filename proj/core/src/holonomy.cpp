#include "finslerlab/holonomy.hpp"

#include "finslerlab/sampling.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace finsler {

namespace {

CurveRecord reversed(const CurveRecord& c) {
  CurveRecord out = c;
  const double t_end = c.t.back();
  const std::size_t m = c.t.size();
  for (std::size_t i = 0; i < m; ++i) {
    out.t[i] = t_end - c.t[m - 1 - i];
    out.positions[i] = c.positions[m - 1 - i];
    out.velocities[i] = -c.velocities[m - 1 - i];
    out.speeds[i] = c.speeds[m - 1 - i];
  }
  return out;
}

// Gauss-Legendre nodes and weights on [-1, 1] (Golub-Welsch).
void gauss_legendre(int m, std::vector<double>& nodes, std::vector<double>& weights) {
  Matrix jac = Matrix::Zero(m, m);
  for (int k = 1; k < m; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    jac(k, k - 1) = b;
    jac(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(jac);
  nodes.resize(static_cast<std::size_t>(m));
  weights.resize(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) {
    nodes[static_cast<std::size_t>(k)] = es.eigenvalues()[k];
    weights[static_cast<std::size_t>(k)] = 2.0 * es.eigenvectors()(0, k) * es.eigenvectors()(0, k);
  }
}

Matrix h_orthonormal_basis(const Matrix& h) {
  const Eigen::LLT<Matrix> llt(h);
  if (llt.info() != Eigen::Success) throw GeometryError("metric is not positive definite");
  const Matrix u = llt.matrixU();
  return u.triangularView<Eigen::Upper>().solve(Matrix::Identity(h.rows(), h.cols()));
}

}  // namespace

double chart_radius(const ChartBox& box, const Point& x) {
  double r = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < box.size(); ++i) {
    const double xi = x[static_cast<Eigen::Index>(i)];
    r = std::min({r, xi - box[i].lo, box[i].hi - xi});
  }
  return r;
}

CurveRecord geodesic_between(const ConnectionField& c, const Point& a, const Point& b) {
  const int n = c.dim();
  Vector w = b - a;
  if (w.norm() == 0.0) throw GeometryError("geodesic endpoints coincide");
  auto shoot = [&](const Vector& v, CurveRecord* keep) {
    CurveRecord rec = integrate_geodesic(c, a, v, 1.0);
    if (rec.exited_chart) throw IntegrationError("shooting geodesic left the chart");
    Vector end = rec.positions.back();
    if (keep) *keep = std::move(rec);
    return end;
  };
  CurveRecord best;
  Vector miss = shoot(w, &best) - b;
  for (int iter = 0; iter < 25 && miss.norm() > 1e-11; ++iter) {
    Matrix jac(n, n);
    const double step = 1e-7 * std::max(1.0, w.norm());
    for (int k = 0; k < n; ++k) {
      Vector wp = w;
      wp[k] += step;
      Vector wm = w;
      wm[k] -= step;
      jac.col(k) = (shoot(wp, nullptr) - shoot(wm, nullptr)) / (2.0 * step);
    }
    const Vector dw = jac.fullPivLu().solve(miss);
    CurveRecord trial;
    const Vector trial_w = w - dw;
    const Vector trial_miss = shoot(trial_w, &trial) - b;
    if (!(trial_miss.norm() < miss.norm())) break;
    w = trial_w;
    miss = trial_miss;
    best = std::move(trial);
  }
  if (miss.norm() > 1e-8 * std::max(1.0, (b - a).norm())) {
    throw IntegrationError("geodesic shooting did not converge (miss " + std::to_string(miss.norm()) + ")");
  }
  return best;
}

void add_loop(HolonomyBundle& bundle, const ConnectionField& c, const CurveRecord& loop, std::string kind) {
  if (loop.positions.empty() || (loop.positions.front() - bundle.x).norm() > 1e-9 ||
      (loop.positions.back() - bundle.x).norm() > 1e-9) {
    throw GeometryError("loop does not start and end at the base point");
  }
  const Matrix p = transport_matrix(c, loop);
  if (std::abs(p.determinant()) <= 1e-10) throw GeometryError("transport matrix is singular");
  LoopSpec spec;
  spec.kind = std::move(kind);
  spec.vertices = {loop.positions.front()};
  bundle.loops.push_back(std::move(spec));
  bundle.matrices.push_back(p);
}

HolonomyBundle holonomy_samples(const ConnectionField& c, const Point& x, int loop_count, std::uint64_t seed,
                                const std::vector<double>& scales) {
  if (loop_count < 1) throw GeometryError("loop_count must be >= 1");
  if (scales.empty()) throw GeometryError("no loop scales given");
  if (!c.model().contains(x)) throw GeometryError("base point lies outside the chart box");
  const int n = c.dim();
  if (n < 2) throw GeometryError("holonomy needs dimension >= 2");
  const double radius = chart_radius(c.model().box(), x);
  HolonomyBundle bundle;
  bundle.x = x;
  bundle.scales = scales;
  std::vector<Matrix> mats(static_cast<std::size_t>(loop_count));
  std::vector<LoopSpec> specs(static_cast<std::size_t>(loop_count));
  parallel_for(static_cast<std::size_t>(loop_count), [&](std::size_t k) {
    const double scale = scales[k % scales.size()];
    const double len = scale * radius;
    CounterRng rng(seed, 0x401000 + k);
    for (int attempt = 0;; ++attempt) {
      if (attempt == 32) throw IntegrationError("could not build a geodesic triangle inside the chart");
      const Vector u1 = rng.unit_vector(n);
      const Vector u2 = rng.unit_vector(n);
      if (std::abs(u1.dot(u2)) > 0.9) continue;
      try {
        const CurveRecord e1 = integrate_geodesic(c, x, len * u1, 1.0);
        const CurveRecord e3 = integrate_geodesic(c, x, len * u2, 1.0);
        if (e1.exited_chart || e3.exited_chart) continue;
        const CurveRecord e2 = geodesic_between(c, e1.positions.back(), e3.positions.back());
        const CurveRecord loop = concatenate({e1, e2, reversed(e3)});
        const Matrix p = transport_matrix(c, loop);
        if (std::abs(p.determinant()) <= 1e-10) throw GeometryError("transport matrix is singular");
        mats[k] = p;
        specs[k] = LoopSpec{"geodesic-triangle", scale, {x, e1.positions.back(), e3.positions.back()}, -1, -1};
        return;
      } catch (const IntegrationError&) {
        continue;
      }
    }
  });
  bundle.matrices = mats;
  bundle.loops = specs;
  if (loop_count > 1) {
    for (int k = 0; k < loop_count; ++k) {
      const int j = (k + 1) % loop_count;
      if (loop_count == 2 && k == 1) break;
      bundle.matrices.push_back(mats[static_cast<std::size_t>(k)] * mats[static_cast<std::size_t>(j)]);
      bundle.loops.push_back(LoopSpec{"product", 0.0, {}, k, j});
    }
  }
  return bundle;
}

double rotation_angle(const Matrix& p, const Matrix& g) {
  if (p.rows() != 2 || g.rows() != 2) throw GeometryError("rotation angle is defined for 2x2 matrices");
  const Eigen::LLT<Matrix> llt(g);
  if (llt.info() != Eigen::Success) throw GeometryError("metric is not positive definite");
  const Matrix u = llt.matrixU();
  const Matrix q = u * p * h_orthonormal_basis(g);
  return std::atan2(q(1, 0), q(0, 0));
}

NormPreservationReport norm_preservation(const FinslerModel& m, const HolonomyBundle& h, int vectors,
                                         std::uint64_t seed) {
  NormPreservationReport rep;
  CounterRng rng(seed, 0x9e);
  std::vector<Vector> vs;
  for (int i = 0; i < vectors; ++i) vs.push_back(rng.unit_vector(m.dim()));
  for (std::size_t k = 0; k < h.matrices.size(); ++k) {
    for (const Vector& v : vs) {
      const double f0 = m.evaluate_norm(h.x, v);
      const double rel = std::abs(m.evaluate_norm(h.x, h.matrices[k] * v) - f0) / f0;
      if (rel > rep.max_relative_change || rep.loop < 0) {
        rep.max_relative_change = std::max(rel, rep.max_relative_change);
        rep.loop = static_cast<int>(k);
        rep.witness_v = v;
      }
    }
  }
  rep.pass = rep.max_relative_change <= rep.tolerance;
  return rep;
}

SzaboMetric::Rule SzaboMetric::make_rule(int dim, int resolution, std::uint64_t seed) {
  Rule r;
  if (dim == 1) {
    r.dirs = {Vector::Constant(1, 1.0), Vector::Constant(1, -1.0)};
    r.weights = {1.0, 1.0};
  } else if (dim == 2) {
    for (int k = 0; k < resolution; ++k) {
      const double th = 2.0 * std::numbers::pi * k / resolution;
      Vector d(2);
      d << std::cos(th), std::sin(th);
      r.dirs.push_back(d);
      r.weights.push_back(2.0 * std::numbers::pi / resolution);
    }
  } else if (dim == 3) {
    std::vector<double> nodes;
    std::vector<double> weights;
    gauss_legendre(std::max(2, resolution / 2), nodes, weights);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double t = nodes[i];
      const double s = std::sqrt(1.0 - t * t);
      for (int k = 0; k < resolution; ++k) {
        const double ph = 2.0 * std::numbers::pi * k / resolution;
        Vector d(3);
        d << s * std::cos(ph), s * std::sin(ph), t;
        r.dirs.push_back(d);
        r.weights.push_back(weights[i] * 2.0 * std::numbers::pi / resolution);
      }
    }
  } else {
    CounterRng rng(seed, 0x5a);
    const int count = resolution * resolution;
    for (int k = 0; k < count; ++k) {
      r.dirs.push_back(rng.unit_vector(dim));
      r.weights.push_back(1.0);
    }
  }
  return r;
}

SzaboMetric::SzaboMetric(FinslerModel model, int resolution, std::uint64_t seed)
    : model_(std::move(model)), resolution_(resolution) {
  if (resolution < 4) throw GeometryError("quadrature resolution must be >= 4");
  const int n = model_.dim();
  rule_ = make_rule(n, resolution, seed);
  coarse_ = make_rule(n, resolution / 2, seed + 1);
  std::vector<Expression> outs;
  const Expression& f = model_.norm();
  const ExprMatrix& g = model_.fundamental_tensor_expressions();
  outs.push_back(f);
  for (int l = 0; l < n; ++l) outs.push_back(differentiate(f, Symbol::position(l)));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) outs.push_back(g[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        outs.push_back(differentiate(g[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], Symbol::position(l)));
  program_ = Program(outs, VariableLayout::chart(n));
}

void SzaboMetric::average(const Rule& rule, const Point& x, Matrix& h, Tensor3* dh) const {
  const int n = model_.dim();
  const std::size_t nn = static_cast<std::size_t>(n);
  std::vector<double> in(2 * nn);
  std::copy(x.data(), x.data() + n, in.begin());
  std::vector<double> out(program_.output_count());
  std::vector<CompensatedSum> sg(nn * nn);
  std::vector<CompensatedSum> sdg(nn * nn * nn);
  std::vector<CompensatedSum> sdw(nn);
  CompensatedSum sw;
  // The cone-measure average does not depend on how directions are
  // parametrized, so the rule is laid out in a frame orthonormal for the
  // mean of g over the coordinate axes; this keeps the integrand tame on
  // strongly anisotropic charts.
  Matrix g0 = Matrix::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    std::fill(in.begin() + n, in.end(), 0.0);
    in[nn + static_cast<std::size_t>(k)] = 1.0;
    program_.run(in, out);
    g0 += Eigen::Map<const Matrix>(out.data() + 1 + n, n, n);
  }
  const Matrix frame = h_orthonormal_basis(0.5 * (g0 + g0.transpose()) / n);
  for (std::size_t q = 0; q < rule.dirs.size(); ++q) {
    const Vector u = frame * rule.dirs[q];
    std::copy(u.data(), u.data() + n, in.begin() + n);
    program_.run(in, out);
    const double f = out[0];
    const double w = rule.weights[q] * std::pow(f, -n);
    sw.add(w);
    const double* gq = out.data() + 1 + n;
    for (std::size_t e = 0; e < nn * nn; ++e) sg[e].add(w * gq[e]);
    if (!dh) continue;
    const double* dgq = gq + nn * nn;
    for (std::size_t l = 0; l < nn; ++l) {
      const double dw = -n * w / f * out[1 + l];
      sdw[l].add(dw);
      for (std::size_t e = 0; e < nn * nn; ++e) sdg[l * nn * nn + e].add(dw * gq[e] + w * dgq[l * nn * nn + e]);
    }
  }
  const double total = sw.value();
  h.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) h(i, j) = sg[static_cast<std::size_t>(i * n + j)].value() / total;
  h = 0.5 * (h + h.transpose()).eval();
  if (!dh) return;
  *dh = Tensor3(n);
  for (int l = 0; l < n; ++l) {
    const double dwl = sdw[static_cast<std::size_t>(l)].value();
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        (*dh)(l, i, j) = (sdg[static_cast<std::size_t>((l * n + i) * n + j)].value() - h(i, j) * dwl) / total;
      }
    }
  }
}

Matrix SzaboMetric::metric(const Point& x) const {
  Matrix h;
  average(rule_, x, h, nullptr);
  return h;
}

Tensor3 SzaboMetric::derivative(const Point& x) const {
  Matrix h;
  Tensor3 dh;
  average(rule_, x, h, &dh);
  return dh;
}

Tensor3 SzaboMetric::christoffel(const Point& x) const {
  Matrix h;
  Tensor3 dh;
  average(rule_, x, h, &dh);
  return christoffel_from_metric(h, dh);
}

double SzaboMetric::quadrature_error(const Point& x) const {
  Matrix coarse;
  average(coarse_, x, coarse, nullptr);
  return (metric(x) - coarse).cwiseAbs().maxCoeff();
}

SzaboMetric szabo_metrize(const ConnectionField& c, int resolution, std::uint64_t seed) {
  const BerwaldReport& b = c.berwald();
  if (!b.is_berwald) {
    throw GeometryError("metrization needs a Berwald model (connection deviation " + std::to_string(b.max_deviation) +
                        ")");
  }
  return SzaboMetric(c.model(), resolution, seed);
}

MetrizationReport metrization_check(const ConnectionField& c, const SzaboMetric& h, int probes, std::uint64_t seed) {
  MetrizationReport rep;
  rep.min_eigenvalue = std::numeric_limits<double>::infinity();
  CounterRng rng(seed, 0x3c);
  for (int p = 0; p < probes; ++p) {
    const Point x = random_point(c.model().box(), rng);
    const Vector v = rng.unit_vector(c.dim());
    const Tensor3 a = h.christoffel(x);
    const Tensor3 b = c.coefficients(x, v);
    double dev = 0.0;
    for (std::size_t e = 0; e < a.data().size(); ++e) dev = std::max(dev, std::abs(a.data()[e] - b.data()[e]));
    if (dev > rep.max_deviation || rep.witness_x.size() == 0) {
      rep.max_deviation = std::max(dev, rep.max_deviation);
      rep.witness_x = x;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(h.metric(x));
    rep.min_eigenvalue = std::min(rep.min_eigenvalue, es.eigenvalues().minCoeff());
  }
  rep.pass = rep.max_deviation <= rep.tolerance && rep.min_eigenvalue > 0.0;
  return rep;
}

SplitResult de_rham_split(const HolonomyBundle& bundle, const Matrix& h, std::uint64_t seed) {
  if (bundle.matrices.size() < 10) throw GeometryError("splitting needs at least 10 holonomy samples");
  const int n = static_cast<int>(h.rows());
  const Matrix hinv = h.inverse();
  std::vector<Matrix> sym;
  for (int a = 0; a < n; ++a) {
    for (int b = a; b < n; ++b) {
      Matrix e = Matrix::Zero(n, n);
      e(a, b) = 1.0;
      e(b, a) = 1.0;
      sym.push_back(e);
    }
  }
  const Eigen::Index d = static_cast<Eigen::Index>(sym.size());
  const Eigen::Index rows = static_cast<Eigen::Index>(bundle.matrices.size()) * n * n;
  Matrix sys(rows, d);
  for (Eigen::Index col = 0; col < d; ++col) {
    const Matrix a = hinv * sym[static_cast<std::size_t>(col)];
    Eigen::Index row = 0;
    for (const Matrix& p : bundle.matrices) {
      const Matrix r = a * p - p * a;
      sys.block(row, col, n * n, 1) = Eigen::Map<const Vector>(r.data(), n * n);
      row += n * n;
    }
  }
  Eigen::JacobiSVD<Matrix> svd(sys, Eigen::ComputeFullV);
  const Vector sv = svd.singularValues();
  const double smax = sv.size() ? sv[0] : 0.0;
  const double tau = 1e-6 * std::max(1.0, smax);
  std::vector<Eigen::Index> null_cols;
  double smallest_live = smax;
  for (Eigen::Index k = 0; k < d; ++k) {
    if (sv[k] <= tau) {
      null_cols.push_back(k);
    } else {
      smallest_live = sv[k];
      if (sv[k] < 1e2 * tau) {
        throw GeometryError("ill-conditioned commutant (condition number " + std::to_string(smax / sv[k]) + ")");
      }
    }
  }
  SplitResult res;
  res.h = h;
  res.commutant_dim = static_cast<int>(null_cols.size());
  res.condition_number = smallest_live > 0.0 ? smax / smallest_live : 1.0;

  // Pick the commutant element whose spectrum separates the most clusters.
  std::vector<std::vector<int>> best_clusters;
  Matrix best_vectors;
  Matrix best_op = Matrix::Identity(n, n);
  double best_gap = -1.0;
  CounterRng rng(seed, 0xd5);
  const int tries = null_cols.size() > 1 ? 8 : 1;
  for (int t = 0; t < tries; ++t) {
    Matrix s = Matrix::Zero(n, n);
    if (null_cols.size() <= 1) {
      s = h;
    } else {
      for (Eigen::Index k : null_cols) {
        const double coef = rng.normal();
        for (Eigen::Index e = 0; e < d; ++e) s += coef * svd.matrixV()(e, k) * sym[static_cast<std::size_t>(e)];
      }
    }
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(s, h);
    const Vector lam = es.eigenvalues();
    // A spread at roundoff level relative to the eigenvalues is one cluster.
    const double scale = lam.cwiseAbs().maxCoeff();
    double spread = lam.maxCoeff() - lam.minCoeff();
    if (spread <= 1e-9 * scale) spread = 0.0;
    const double tol = 1e-5 * spread;
    std::vector<std::vector<int>> clusters{{0}};
    double min_gap = std::numeric_limits<double>::infinity();
    for (int k = 1; k < n; ++k) {
      const double gap = lam[k] - lam[k - 1];
      if (spread > 0.0 && gap > tol) {
        clusters.push_back({k});
        min_gap = std::min(min_gap, gap / spread);
      } else {
        clusters.back().push_back(k);
      }
    }
    if (clusters.size() > best_clusters.size() ||
        (clusters.size() == best_clusters.size() && min_gap > best_gap)) {
      best_clusters = clusters;
      best_vectors = es.eigenvectors();
      best_gap = min_gap;
      best_op = hinv * s / (spread > 0.0 ? spread : 1.0);
    }
  }

  struct Piece {
    Matrix basis;
    bool flat;
  };
  std::vector<Piece> pieces;
  for (const auto& cl : best_clusters) {
    Matrix basis(n, static_cast<Eigen::Index>(cl.size()));
    for (std::size_t k = 0; k < cl.size(); ++k) basis.col(static_cast<Eigen::Index>(k)) = best_vectors.col(cl[k]);
    if (best_clusters.size() == 1) basis = h_orthonormal_basis(h);
    bool flat = true;
    for (const Matrix& p : bundle.matrices) {
      const Matrix restricted = basis.transpose() * h * p * basis;
      const Matrix id = Matrix::Identity(restricted.rows(), restricted.cols());
      if ((restricted - id).cwiseAbs().maxCoeff() > kFlatTolerance) {
        flat = false;
        break;
      }
    }
    pieces.push_back({basis, flat});
  }
  std::stable_partition(pieces.begin(), pieces.end(), [](const Piece& p) { return p.flat; });
  // The flat factor is the whole fixed subspace, not a sum of lines.
  while (pieces.size() > 1 && pieces[0].flat && pieces[1].flat) {
    Matrix merged(n, pieces[0].basis.cols() + pieces[1].basis.cols());
    merged << pieces[0].basis, pieces[1].basis;
    pieces[0].basis = merged;
    pieces.erase(pieces.begin() + 1);
  }
  Matrix full(n, n);
  Eigen::Index col = 0;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> ranges;
  for (const Piece& p : pieces) {
    res.subspaces.push_back(p.basis);
    res.flat.push_back(p.flat);
    full.block(0, col, n, p.basis.cols()) = p.basis;
    ranges.emplace_back(col, p.basis.cols());
    col += p.basis.cols();
  }
  for (const Matrix& p : bundle.matrices) {
    res.commutator_residual =
        std::max(res.commutator_residual, (best_op * p - p * best_op).cwiseAbs().maxCoeff());
    Matrix q = full.transpose() * h * p * full;
    for (const auto& [start, len] : ranges) q.block(start, start, len, len).setZero();
    res.block_residual = std::max(res.block_residual, q.cwiseAbs().maxCoeff());
  }
  return res;
}

double principal_angle(const Matrix& a, const Matrix& b) {
  const Matrix qa = Eigen::HouseholderQR<Matrix>(a).householderQ() * Matrix::Identity(a.rows(), a.cols());
  const Matrix qb = Eigen::HouseholderQR<Matrix>(b).householderQ() * Matrix::Identity(b.rows(), b.cols());
  const Matrix& small = a.cols() <= b.cols() ? qa : qb;
  const Matrix& large = a.cols() <= b.cols() ? qb : qa;
  const Matrix resid = small - large * (large.transpose() * small);
  const double s = Eigen::JacobiSVD<Matrix>(resid).singularValues()[0];
  return std::asin(std::min(1.0, s));
}

InvariantFunctionReport invariant_function_test(const Expression& gfun, const FinslerModel& m,
                                                const HolonomyBundle& bundle, int samples, std::uint64_t seed) {
  const int n = m.dim();
  for (const Symbol& s : gfun.free_symbols()) {
    if (s.kind != SymbolKind::Fiber) throw GeometryError("function must depend on fiber variables only: " + s.name);
  }
  const Program prog(std::span<const Expression>(&gfun, 1), VariableLayout::chart(n));
  std::vector<double> in(static_cast<std::size_t>(2 * n), 0.0);
  std::copy(bundle.x.data(), bundle.x.data() + n, in.begin());
  auto eval = [&](const Vector& v) {
    std::copy(v.data(), v.data() + n, in.begin() + n);
    return prog.run(in)[0];
  };
  InvariantFunctionReport rep;
  CounterRng rng(seed, 0x1f);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int s = 0; s < samples; ++s) {
    const Vector u = rng.unit_vector(n);
    const Vector v = u / m.evaluate_norm(bundle.x, u);
    const double g0 = eval(v);
    lo = std::min(lo, g0);
    hi = std::max(hi, g0);
    for (std::size_t k = 0; k < bundle.matrices.size(); ++k) {
      const double d = std::abs(eval(bundle.matrices[k] * v) - g0);
      if (d > rep.max_change || rep.witness_loop < 0) {
        rep.max_change = std::max(d, rep.max_change);
        rep.witness_loop = static_cast<int>(k);
        rep.witness_v = v;
      }
    }
  }
  rep.level_spread = hi - lo;
  rep.invariant = rep.max_change <= rep.tolerance;
  rep.radial = rep.invariant && rep.level_spread <= rep.tolerance;
  return rep;
}

}  // namespace finsler
