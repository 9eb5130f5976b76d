#include "cli.hpp"

#include "finslerlab/curvature.hpp"
#include "finslerlab/holonomy.hpp"
#include "finslerlab/model_file.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

namespace finsler::cli {

namespace {

using nlohmann::json;

struct Options {
  std::string model;
  std::string against;
  std::uint64_t seed = 0;
  int probes = 0;
  std::optional<double> tol;
  std::string csv;
  std::string json_path;
  bool timing = false;
  std::string point;
  std::string vector;
  std::string edge;
  std::string carried;
  std::string via;
  std::string psi;
  std::string function;
  std::string expect;
  std::string n_list = "n,n+1,inf";
  std::string from;
  std::string to;
  std::string factor_distances;
  double duration = 1.0;
  int loops = 30;
  int resolution = kDefaultSzaboResolution;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Report {
 public:
  Report(const Options& opts, std::ostream& out) : opts_(opts), out_(out) {}

  // Passes when value <= tolerance.
  void upper(const std::string& name, double value, double tolerance) {
    const double tol = opts_.tol.value_or(tolerance);
    add(name, value, tol, value <= tol);
  }
  // Passes when value > tolerance.
  void lower(const std::string& name, double value, double tolerance) {
    const double tol = opts_.tol.value_or(tolerance);
    add(name, value, tol, value > tol);
  }
  void flag(const std::string& name, bool ok) { add(name, ok ? 1.0 : 0.0, 1.0, ok); }

  json& results() { return results_; }
  bool passed() const {
    return std::all_of(checks_.begin(), checks_.end(), [](const json& c) { return c["pass"].get<bool>(); });
  }
  const json& checks() const { return checks_; }

 private:
  void add(const std::string& name, double value, double tol, bool pass) {
    checks_.push_back({{"name", name}, {"value", number(value)}, {"tolerance", number(tol)}, {"pass", pass}});
    out_ << "  check " << name << ": " << value << " (tolerance " << tol << ") " << (pass ? "PASS" : "FAIL") << '\n';
  }

 public:
  static json number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
  }

 private:
  const Options& opts_;
  std::ostream& out_;
  json checks_ = json::array();
  json results_ = json::object();
};

json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(Report::number(m(i, j)));
    rows.push_back(row);
  }
  return rows;
}

json to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(Report::number(v[i]));
  return out;
}

std::string show(const Eigen::VectorXd& v) {
  std::ostringstream os;
  os.precision(10);
  os << '(';
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << ')';
  return os.str();
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  return parts;
}

double constant(const std::string& text) {
  const Expression e = parse_expression(text, 0);
  return evaluate(e, {});
}

Eigen::VectorXd parse_vector(const std::string& text, int dim, const char* what) {
  const auto parts = split(text, ',');
  if (static_cast<int>(parts.size()) != dim) {
    throw UsageError(std::string(what) + " needs " + std::to_string(dim) + " comma-separated components");
  }
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = constant(parts[static_cast<std::size_t>(i)]);
  return v;
}

Point point_or_center(const Options& o, const FinslerModel& m) {
  return o.point.empty() ? m.box_center() : parse_vector(o.point, m.dim(), "--point");
}

Vector vector_or_first_axis(const Options& o, const FinslerModel& m) {
  if (!o.vector.empty()) return parse_vector(o.vector, m.dim(), "--vector");
  Vector v = Vector::Zero(m.dim());
  v[0] = 1.0;
  return v;
}

int probes_or(const Options& o, int fallback) { return o.probes > 0 ? o.probes : fallback; }

void with_csv(const Options& o, const std::function<void(std::ostream&)>& fn) {
  if (o.csv.empty()) return;
  std::ofstream f(o.csv);
  if (!f) throw UsageError("cannot write " + o.csv);
  fn(f);
}

ModelFile load_against(const Options& o) {
  if (o.against.empty()) throw UsageError("--against is required");
  return load_model(o.against);
}

using Handler = std::function<void(const Options&, const ModelFile&, Report&, std::ostream&)>;

void cmd_validate(const Options& o, const ModelFile& mf, Report& r, std::ostream& out) {
  const int n = probes_or(o, 64);
  const HomogeneityReport h = homogeneity_check(mf.model, n, o.seed);
  const ConvexityReport c = strong_convexity_check(mf.model, n, o.seed);
  out << "validate: " << n << " samples, kind " << to_string(mf.model.kind()) << '\n';
  r.results()["homogeneity_witness_x"] = to_json(h.witness_x);
  r.results()["convexity_witness_x"] = to_json(c.witness_x);
  r.upper("homogeneity", h.max_deviation, h.tolerance);
  r.lower("strong_convexity_min_eigenvalue", c.min_eigenvalue, c.tolerance);
}

void cmd_berwald(const Options& o, const ModelFile& mf, Report& r, std::ostream& out) {
  const ConnectionField c(mf.model);
  const BerwaldReport b = berwald_test(c, probes_or(o, 8), 6, o.seed);
  const double tol = o.tol.value_or(b.tolerance);
  out << "berwald: " << (b.max_deviation <= tol ? "Berwald" : "not Berwald") << ", deviation " << b.max_deviation
      << " at x = " << show(b.witness_x) << '\n';
  r.results()["witness_x"] = to_json(b.witness_x);
  r.upper("berwald_deviation", b.max_deviation, b.tolerance);
}

void cmd_geodesic(const Options& o, const ModelFile& mf, Report& r, std::ostream& out) {
  const ConnectionField c(mf.model);
  const CurveRecord rec = integrate_geodesic(c, point_or_center(o, mf.model), vector_or_first_axis(o, mf.model),
                                             o.duration);
  double drift = 0.0;
  for (double s : rec.speeds) drift = std::max(drift, std::abs(s - rec.speeds.front()) / rec.speeds.front());
  out << "geodesic: " << rec.t.size() << " samples, " << rec.steps << " steps (" << rec.rejected
      << " rejected), end " << show(rec.positions.back()) << " at t = " << rec.t.back() << '\n';
  json& res = r.results();
  res["end_point"] = to_json(rec.positions.back());
  res["end_velocity"] = to_json(rec.velocities.back());
  res["end_time"] = rec.t.back();
  res["steps"] = rec.steps;
  res["rejected"] = rec.rejected;
  res["samples"] = rec.t.size();
  with_csv(o, [&](std::ostream& f) { write_csv(f, rec); });
  r.flag("stayed_in_chart", !rec.exited_chart);
  r.upper("speed_drift", drift, 1e-7);
}

void cmd_transport(const Options& o, const ModelFile& mf, Report& r, std::ostream& out) {
  const ConnectionField c(mf.model);
  const Point x = point_or_center(o, mf.model);
  CurveRecord curve;
  if (!o.via.empty()) {
    std::vector<Point> pts{x};
    for (const std::string& p : split(o.via, ';')) pts.push_back(parse_vector(p, mf.model.dim(), "--via"));
    pts.push_back(x);
    std::vector<CurveRecord> parts;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) parts.push_back(coordinate_segment(mf.model, pts[k], pts[k + 1], 32));
    curve = concatenate(parts);
  } else {
    curve = integrate_geodesic(c, x, vector_or_first_axis(o, mf.model), o.duration);
    if (curve.exited_chart) throw GeometryError("geodesic left the chart before t = " + std::to_string(o.duration));
  }
  const Vector x0 = o.carried.empty() ? vector_or_first_axis(o, mf.model)
                                      : parse_vector(o.carried, mf.model.dim(), "--carry");
  const TransportResult t = parallel_transport(c, curve, x0);
  double drift = 0.0;
  for (double f : t.norms) drift = std::max(drift, std::abs(f - t.norms.front()) / t.norms.front());
  out << "transport: X(0) = " << show(x0) << " -> X(T) = " << show(t.final_vector) << '\n';
  json& res = r.results();
  res["final_vector"] = to_json(t.final_vector);
  res["norm_drift"] = Report::number(drift);
  if (!o.via.empty()) res["loop_matrix"] = to_json(transport_matrix(c, curve));
  with_csv(o, [&](std::ostream& f) { write_csv(f, curve); });
  if (c.berwald().is_berwald) {
    r.upper("norm_drift", drift, 1e-7);
  } else {
    out << "  model is not Berwald; norm drift " << drift << " is not checked\n";
  }
}

void cmd_curvature(const Options& o, const ModelFile& mf, Report& r, std::ostream& out) {
  const ConnectionField c(mf.model);
  const Point x = point_or_center(o, mf.model);
  const Tensor4 t = curvature_tensor(c, x, vector_or_first_axis(o, mf.model));
  const int n = t.dim();
  json comps = json::array();
  out << "curvature: R^i_jkl at x = " << show(x) << '\n';
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          const double v = t(i, j, k, l);
          comps.push_back(Report::number(v));
          if (std::abs(v) > 1e-12) out << "  R^" << i + 1 << "_" << j + 1 << k + 1 << l + 1 << " = " << v << '\n';
        }
  r.results()["tensor"] = comps;
  with_csv(o, [&](std::ostream& f) {
    f.precision(17);
    f << "i,j,k,l,R\n";
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) f << i + 1 << ',' << j + 1 << ',' << k + 1 << ',' << l + 1 << ',' << t(i, j, k, l) << '\n';
  });
  r.upper("antisymmetry", antisymmetry_defect(t), 1e-10);
  r.upper("first_bianchi", bianchi_defect(t), 1e-9);
}

void cmd_ricci(const Options& o, const ModelFile& mf, Report& r, std::ostream& out) {
  const ConnectionField c(mf.model);
  const Point x = point_or_center(o, mf.model);
  const Vector v = vector_or_first_axis(o, mf.model);
  const double ric = ricci(c, x, v);
  const double f = mf.model.evaluate_norm(x, v);
  out << "ricci: Ric = " << ric << ", F = " << f << ", Ric/F^2 = " << ric / (f * f) << '\n';
  r.results()["ricci"] = Report::number(ric);
  r.results()["norm"] = Report::number(f);
  if (!o.against.empty()) {
    const ModelFile other = load_against(o);
    const InvarianceReport inv = ricci_invariance_check(c, ConnectionField(other.model), probes_or(o, 100), o.seed);
    out << "  against " << other.name << ": max |dRic| = " << inv.max_deviation << " over " << inv.probes
        << " probes\n";
    r.results()["against"] = other.name;
    r.upper("ricci_invariance", inv.max_deviation, inv.tolerance);
  }
  with_csv(o, [&](std::ostream& f) {
    write_csv_header(f, mf.model.dim(), {});
    CurvatureSample s;
    s.x = x;
    s.v = v;
    s.ricci = ric;
    write_csv_row(f, s);
  });
}

void cmd_flag(const Options& o, const ModelFile& mf, Report& r, std::ostream& out) {
  if (o.edge.empty()) throw UsageError("--edge is required");
  const ConnectionField c(mf.model);
  const Point x = point_or_center(o, mf.model);
  const Vector v = vector_or_first_axis(o, mf.model);
  const Vector w = parse_vector(o.edge, mf.model.dim(), "--edge");
  const double k = flag_curvature(c, x, v, w);
  out << "flag: K(v; w) = " << k << '\n';
  r.results()["flag_curvature"] = Report::number(k);
  std::optional<double> sec;
  if (mf.model.kind() == NormKind::Riemannian) {
    sec = sectional_curvature(c, x, v, w);
    r.results()["sectional_curvature"] = Report::number(*sec);
    r.upper("flag_minus_sectional", std::abs(k - *sec), 1e-9);
  }
  with_csv(o, [&](std::ostream& f) {
    write_csv_header(f, mf.model.dim(), {});
    CurvatureSample s;
    s.x = x;
    s.v = v;
    s.w = w;
    s.flag = k;
    s.sectional = sec;
    write_csv_row(f, s);
  });
}

std::vector<double> parse_n_list(const std::string& text, int n) {
  std::vector<double> out;
  for (std::string p : split(text, ',')) {
    p.erase(std::remove_if(p.begin(), p.end(), ::isspace), p.end());
    if (p == "inf") {
      out.push_back(kInfiniteN);
    } else if (p == "n") {
      out.push_back(n);
    } else if (p.rfind("n+", 0) == 0) {
      out.push_back(n + constant(p.substr(2)));
    } else {
      out.push_back(constant(p));
    }
  }
  return out;
}

void cmd_weighted_ricci(const Options& o, const ModelFile& mf, Report& r, std::ostream& out) {
  const ConnectionField c(mf.model);
  const int n = mf.model.dim();
  const Point x = point_or_center(o, mf.model);
  const Vector v = vector_or_first_axis(o, mf.model);
  Expression psi = 0.0;
  if (!o.psi.empty()) {
    psi = parse_expression(o.psi, n);
  } else if (mf.model.weight()) {
    psi = *mf.model.weight();
  }
  CurvatureSample s;
  s.x = x;
  s.v = v;
  const std::vector<double> ns = parse_n_list(o.n_list, n);
  json vals = json::array();
  for (double big_n : ns) {
    const WeightedRicci w = weighted_ricci(c, {psi, big_n}, x, v);
    s.ricci = w.ricci;
    s.weighted.emplace_back(big_n, w);
    out << "weighted-ricci: N = " << big_n << ": Ric_N = " << w.value << " (Ric " << w.ricci << ", d1 " << w.first
        << ", d2 " << w.second << ")\n";
    vals.push_back({{"N", Report::number(big_n)}, {"value", Report::number(w.value)}, {"ricci", Report::number(w.ricci)},
                    {"first", Report::number(w.first)}, {"second", Report::number(w.second)}});
  }
  r.results()["psi"] = psi.to_string();
  r.results()["values"] = vals;
  if (!o.against.empty()) {
    const ModelFile other = load_against(o);
    const InvarianceReport inv =
        weighted_invariance_check(c, ConnectionField(other.model), psi, probes_or(o, 50), o.seed);
    out << "  against " << other.name << ": max |dRic_N| = " << inv.max_deviation << '\n';
    r.results()["against"] = other.name;
    r.upper("weighted_ricci_invariance", inv.max_deviation, inv.tolerance);
  }
  with_csv(o, [&](std::ostream& f) {
    write_csv_header(f, n, ns);
    write_csv_row(f, s);
  });
}

void cmd_einstein(const Options& o, const ModelFile& mf, Report& r, std::ostream& out) {
  const ConnectionField c(mf.model);
  const EinsteinReport e = einstein_check(c, probes_or(o, 8), o.seed);
  out << "einstein: " << to_string(e.verdict) << ", lambda " << e.lambda << " (spread " << e.lambda_spread
      << ", residual " << e.max_residual << ")" << (e.non_riemannian ? ", non-Riemannian" : "") << '\n';
  json& res = r.results();
  res["verdict"] = to_string(e.verdict);
  res["lambda"] = Report::number(e.lambda);
  res["lambda_spread"] = Report::number(e.lambda_spread);
  res["max_residual"] = Report::number(e.max_residual);
  res["non_riemannian"] = e.non_riemannian;
  json pts = json::array();
  for (const EinsteinPoint& p : e.points) {
    pts.push_back({{"x", to_json(p.x)}, {"lambda", Report::number(p.lambda)}, {"residual", Report::number(p.residual)}});
  }
  res["points"] = pts;
  r.flag("rigidity_consistent", !e.rigidity_warning);
}

void cmd_metrize(const Options& o, const ModelFile& mf, Report& r, std::ostream& out) {
  const ConnectionField c(mf.model);
  const SzaboMetric h = szabo_metrize(c, o.resolution, o.seed);
  const MetrizationReport m = metrization_check(c, h, probes_or(o, 10), o.seed);
  const Point x = point_or_center(o, mf.model);
  const Matrix hx = h.metric(x);
  out << "metrize: h(x) at x = " << show(x) << ":\n" << hx << "\n";
  json& res = r.results();
  res["metric_at_point"] = to_json(hx);
  res["quadrature_error"] = Report::number(h.quadrature_error(x));
  res["witness_x"] = to_json(m.witness_x);
  r.upper("christoffel_deviation", m.max_deviation, m.tolerance);
  r.lower("min_eigenvalue", m.min_eigenvalue, 0.0);
}

HolonomyBundle sample_bundle(const Options& o, const ConnectionField& c, const Point& x) {
  return holonomy_samples(c, x, o.loops, o.seed);
}

void cmd_split(const Options& o, const ModelFile& mf, Report& r, std::ostream& out) {
  const ConnectionField c(mf.model);
  const Point x = point_or_center(o, mf.model);
  const HolonomyBundle b = sample_bundle(o, c, x);
  const Matrix h = szabo_metrize(c, o.resolution, o.seed).metric(x);
  const NormPreservationReport np = norm_preservation(mf.model, b, 50, o.seed);
  const SplitResult s = de_rham_split(b, h, o.seed);
  out << "split: " << b.matrices.size() << " holonomy samples, " << s.subspaces.size() << " subspaces\n";
  json subs = json::array();
  Eigen::Index total = 0;
  for (std::size_t k = 0; k < s.subspaces.size(); ++k) {
    out << "  subspace " << k + 1 << ": dim " << s.subspaces[k].cols() << (s.flat[k] ? ", flat" : "") << '\n';
    subs.push_back({{"dim", s.subspaces[k].cols()}, {"flat", static_cast<bool>(s.flat[k])}, {"basis", to_json(s.subspaces[k])}});
    total += s.subspaces[k].cols();
  }
  json& res = r.results();
  res["subspaces"] = subs;
  res["commutant_dim"] = s.commutant_dim;
  res["condition_number"] = Report::number(s.condition_number);
  res["commutator_residual"] = Report::number(s.commutator_residual);
  res["metric"] = to_json(h);
  with_csv(o, [&](std::ostream& f) {
    f.precision(17);
    f << "loop,kind,row,col,value\n";
    for (std::size_t k = 0; k < b.matrices.size(); ++k)
      for (Eigen::Index i = 0; i < b.matrices[k].rows(); ++i)
        for (Eigen::Index j = 0; j < b.matrices[k].cols(); ++j)
          f << k << ',' << b.loops[k].kind << ',' << i + 1 << ',' << j + 1 << ',' << b.matrices[k](i, j) << '\n';
  });
  r.upper("norm_preservation", np.max_relative_change, np.tolerance);
  r.upper("block_residual", s.block_residual, kFlatTolerance);
  r.flag("dimensions_sum_to_n", total == mf.model.dim());
}

void cmd_invariance(const Options& o, const ModelFile& mf, Report& r, std::ostream& out) {
  if (o.function.empty()) throw UsageError("--function is required");
  const ConnectionField c(mf.model);
  const Point x = point_or_center(o, mf.model);
  const Expression g = parse_expression(o.function, mf.model.dim());
  const HolonomyBundle b = sample_bundle(o, c, x);
  const InvariantFunctionReport rep = invariant_function_test(g, mf.model, b, probes_or(o, 20), o.seed);
  out << "invariance: " << (rep.invariant ? "invariant" : "not invariant") << ", "
      << (rep.radial ? "radial" : "not radial") << " (max change " << rep.max_change << ", level spread "
      << rep.level_spread << ")\n";
  if (!rep.invariant) out << "  witness loop " << rep.witness_loop << ", v = " << show(rep.witness_v) << '\n';
  json& res = r.results();
  res["invariant"] = rep.invariant;
  res["radial"] = rep.radial;
  res["max_change"] = Report::number(rep.max_change);
  res["level_spread"] = Report::number(rep.level_spread);
  res["witness_loop"] = rep.witness_loop;
  if (!o.expect.empty()) {
    const std::string got = rep.radial ? "radial" : rep.invariant ? "invariant" : "not-invariant";
    if (o.expect != "radial" && o.expect != "invariant" && o.expect != "not-invariant") {
      throw UsageError("--expect must be radial, invariant or not-invariant");
    }
    r.flag("expected_" + o.expect, got == o.expect);
  }
}

void cmd_distance(const Options& o, const ModelFile& mf, Report& r, std::ostream& out) {
  const auto& p = mf.model.product();
  if (!p) throw UsageError("distance needs a product model");
  const int k = p->flat_dim;
  const Vector from = k ? parse_vector(o.from, k, "--from") : Vector();
  const Vector to = k ? parse_vector(o.to, k, "--to") : Vector();
  std::vector<double> d;
  for (const std::string& s : split(o.factor_distances, ',')) d.push_back(constant(s));
  const double dist = product_distance(mf.model, from, to, d);
  out << "distance: " << dist << '\n';
  r.results()["distance"] = Report::number(dist);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Finsler and Berwald geometry on coordinate models", "finslerlab"};
  app.require_subcommand(1);
  const std::vector<std::pair<std::string, std::pair<std::string, Handler>>> commands = {
      {"validate", {"homogeneity and strong convexity of the norm", cmd_validate}},
      {"berwald", {"test whether connection coefficients depend on the reference vector", cmd_berwald}},
      {"geodesic", {"integrate a geodesic", cmd_geodesic}},
      {"transport", {"parallel transport along a geodesic or a coordinate polygon", cmd_transport}},
      {"curvature", {"curvature tensor at a point", cmd_curvature}},
      {"ricci", {"Ricci curvature, optionally compared with another model", cmd_ricci}},
      {"flag", {"flag curvature", cmd_flag}},
      {"weighted-ricci", {"weighted Ricci curvature Ric_N", cmd_weighted_ricci}},
      {"einstein", {"fit Ric = lambda F^2", cmd_einstein}},
      {"metrize", {"averaged Riemannian metric and its Christoffel symbols", cmd_metrize}},
      {"split", {"holonomy-invariant splitting of the tangent space", cmd_split}},
      {"invariance", {"holonomy invariance of a function of v", cmd_invariance}},
      {"distance", {"product distance from factor distances", cmd_distance}},
  };
  std::map<const CLI::App*, Handler> handlers;
  for (const auto& [name, spec] : commands) {
    CLI::App* sub = app.add_subcommand(name, spec.first);
    sub->add_option("model", o.model, "model file")->required();
    sub->add_option("--seed", o.seed, "random seed")->capture_default_str();
    sub->add_option("--probes", o.probes, "number of probes or samples");
    sub->add_option("--tol", o.tol, "override check tolerances");
    sub->add_option("--csv", o.csv, "write CSV data here");
    sub->add_option("--json", o.json_path, "write the JSON run report here");
    sub->add_flag("--timing", o.timing, "include wall time in the JSON report");
    sub->add_option("--point", o.point, "base point x1,...,xn (default: box centre)");
    sub->add_option("--vector", o.vector, "tangent vector v1,...,vn");
    sub->add_option("--against", o.against, "second model file for comparisons");
    if (name == "flag") sub->add_option("--edge", o.edge, "second flag vector");
    if (name == "geodesic" || name == "transport") sub->add_option("--duration", o.duration, "curve duration");
    if (name == "transport") {
      sub->add_option("--carry", o.carried, "vector to transport (default: --vector)");
      sub->add_option("--via", o.via, "polygon vertices 'a,b;c,d;...' for a closed coordinate loop");
    }
    if (name == "weighted-ricci") {
      sub->add_option("--psi", o.psi, "log-density of the measure (default: model [measure] or 0)");
      sub->add_option("--N", o.n_list, "dimension parameters, e.g. n,n+1,inf")->capture_default_str();
    }
    if (name == "metrize" || name == "split") {
      sub->add_option("--resolution", o.resolution, "quadrature resolution")->capture_default_str();
    }
    if (name == "split" || name == "invariance") {
      sub->add_option("--loops", o.loops, "number of geodesic loops")->capture_default_str();
    }
    if (name == "invariance") {
      sub->add_option("--function", o.function, "function of v1..vn");
      sub->add_option("--expect", o.expect, "radial | invariant | not-invariant");
    }
    if (name == "distance") {
      sub->add_option("--from", o.from, "flat coordinates of the first point");
      sub->add_option("--to", o.to, "flat coordinates of the second point");
      sub->add_option("--factor-distances", o.factor_distances, "distances in each factor d1,...,dm")->required();
    }
    handlers[sub] = spec.second;
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  const CLI::App* chosen = app.get_subcommands().front();
  const auto start = std::chrono::steady_clock::now();
  const auto old_precision = out.precision(10);
  Report report(o, out);
  json doc;
  doc["command"] = chosen->get_name();
  doc["seed"] = o.seed;
  int code = 0;
  try {
    const ModelFile mf = load_model(o.model);
    std::ostringstream hash;
    hash << std::hex << mf.hash;
    doc["model"] = mf.name;
    doc["model_hash"] = hash.str();
    out << "model " << mf.name << " (" << to_string(mf.model.kind()) << ", dim " << mf.model.dim() << ", hash "
        << hash.str() << ")\n";
    handlers.at(chosen)(o, mf, report, out);
    code = report.passed() ? 0 : 1;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    code = 2;
  } catch (const ModelFileError& e) {
    err << "error: " << e.what() << '\n';
    code = 2;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    code = 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    doc["error"] = e.what();
    code = 1;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  doc["checks"] = report.checks();
  doc["results"] = report.results();
  doc["exit_code"] = code;
  if (o.timing) doc["wall_time_s"] = wall;
  if (code != 2) out << (code == 0 ? "PASS" : "FAIL") << " in " << wall << " s\n";
  out.precision(old_precision);
  if (!o.json_path.empty()) {
    std::ofstream f(o.json_path);
    if (!f) {
      err << "error: cannot write " << o.json_path << '\n';
      return 2;
    }
    f << doc.dump(2) << '\n';
  }
  return code;
}

}  // namespace finsler::cli
