#pragma once

// Geodesic spray, Berwald connection coefficients, Christoffel symbols,
// covariant derivatives, geodesic integration and parallel transport.

#include "finslerlab/norms.hpp"
#include "finslerlab/tensor.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>

namespace finsler {

/// Integrator failure (step-size underflow, step budget exhausted).
class IntegrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kBerwaldTolerance = 1e-8;

struct BerwaldReport {
  double max_deviation = 0.0;
  Point witness_x;
  double tolerance = kBerwaldTolerance;
  bool is_berwald = false;
};

/// Connection induced by a Finsler model through its geodesic spray
///   G^i = 1/4 g^{il} (d^2F^2/dv^l dx^k v^k - dF^2/dx^l),
/// with Berwald coefficients Gamma^k_ij = d^2 G^k / dv^i dv^j. All
/// coefficients are symbolic; Gamma is symmetric in (i, j) by construction.
class ConnectionField {
 public:
  explicit ConnectionField(FinslerModel model);

  int dim() const { return model_.dim(); }
  const FinslerModel& model() const { return model_; }

  Vector spray(const Point& x, const Vector& v) const;
  /// N^i_k = dG^i/dv^k (= Gamma^i_jk v^j).
  Matrix nonlinear_connection(const Point& x, const Vector& v) const;
  /// Gamma(k, i, j) = Gamma^k_ij at reference vector v.
  Tensor3 coefficients(const Point& x, const Vector& v) const;
  /// D(l, k, i, j) = d/dx^l Gamma^k_ij at fixed reference vector v.
  Tensor4 coefficient_derivatives(const Point& x, const Vector& v) const;

  /// Berwald verdict from default probes (cached on first use).
  const BerwaldReport& berwald() const;

  std::size_t spray_tape_size() const;

 private:
  struct Symbolic;
  struct Lazy;
  void ensure_coefficients() const;
  void ensure_derivatives() const;

  FinslerModel model_;
  std::shared_ptr<Symbolic> sym_;
  std::shared_ptr<Lazy> lazy_;
};

Vector spray_coefficients(const ConnectionField& c, const Point& x, const Vector& v);
Tensor3 berwald_coefficients(const ConnectionField& c, const Point& x, const Vector& v);

BerwaldReport berwald_test(const ConnectionField& c, int probe_points, int probe_vectors, std::uint64_t seed);

/// Levi-Civita coefficients of a Riemannian model from the Christoffel formula.
Tensor3 christoffel(const FinslerModel& riemannian, const Point& x);
/// Christoffel formula from numeric metric values g and derivatives
/// dg(l, i, j) = d g_ij / dx^l.
Tensor3 christoffel_from_metric(const Matrix& g, const Tensor3& dg);

/// (D_V X)^i = v^j d_j X^i + Gamma^i_jk v^j X^k for a vector field X(x).
Vector covariant_derivative(const ConnectionField& c, const std::vector<Expression>& field, const Vector& v,
                            const Point& x);

struct StepControl {
  double rtol = 1e-10;
  double atol = 1e-12;
  double initial_step = 1e-2;
  double min_step = 1e-14;
  double max_step = 0.25;
  std::size_t max_steps = 200000;
};

struct CurveRecord {
  std::vector<double> t;
  std::vector<Point> positions;
  std::vector<Vector> velocities;
  std::vector<double> speeds;  // F(gamma'(t))
  std::size_t steps = 0;
  std::size_t rejected = 0;
  double max_error_estimate = 0.0;
  bool exited_chart = false;

  double duration() const { return t.empty() ? 0.0 : t.back() - t.front(); }
};

/// Integrates x'' = -2 G(x, x') with an adaptive Dormand-Prince 5(4) pair.
/// Leaving the chart box ends the curve early with `exited_chart` set.
CurveRecord integrate_geodesic(const ConnectionField& c, const Point& x0, const Vector& v0, double duration,
                               const StepControl& control = {});

/// Samples an explicit curve t -> (x(t), x'(t)) on a uniform grid.
CurveRecord sample_curve(const FinslerModel& model, const std::function<void(double, Point&, Vector&)>& curve,
                         double t0, double t1, std::size_t segments);

/// Coordinate-straight segment from a to b over unit time.
CurveRecord coordinate_segment(const FinslerModel& model, const Point& a, const Point& b, std::size_t segments = 8);

/// Joins curves end to start; times are shifted to be continuous.
CurveRecord concatenate(const std::vector<CurveRecord>& parts);

struct TransportResult {
  Vector final_vector;
  std::vector<double> norms;  // F(gamma(t_i), X(t_i)) on the curve grid
};

/// Solves X' + Gamma(gamma, gamma')(gamma', X) = 0 along a stored curve,
/// using cubic Hermite interpolation of the curve between grid points.
TransportResult parallel_transport(const ConnectionField& c, const CurveRecord& curve, const Vector& x0,
                                   const StepControl& control = {});

/// The linear transport map T_{gamma(0)} -> T_{gamma(1)} as a matrix.
Matrix transport_matrix(const ConnectionField& c, const CurveRecord& curve, const StepControl& control = {});

struct AgreementReport {
  double max_deviation = 0.0;
  Point witness_x;
  double tolerance = kBerwaldTolerance;
  bool agree = false;
};

/// Compares connection coefficients of two models on the intersection of
/// their chart boxes.
AgreementReport connections_agree(const ConnectionField& a, const ConnectionField& b, int probes, std::uint64_t seed);

/// CSV with header t,x1..xn,v1..vn,F
void write_csv(std::ostream& os, const CurveRecord& curve);

}  // namespace finsler
