#pragma once

// Curvature tensor of a connection and the scalar curvatures built from it:
// sectional, flag, Ricci and weighted Ricci, plus Einstein and
// affine-invariance checks.

#include "finslerlab/connection.hpp"

#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace finsler {

/// R(i, j, k, l) = R^i_jkl, with R(d_k, d_l) d_j = R^i_jkl d_i:
///   R^i_jkl = d_k G^i_lj - d_l G^i_kj + G^i_km G^m_lj - G^i_lm G^m_kj.
/// The connection coefficients are taken at reference vector v.
Tensor4 curvature_tensor(const ConnectionField& c, const Point& x, const Vector& v);

/// max |R^i_jkl + R^i_jlk|
double antisymmetry_defect(const Tensor4& r);
/// max |R^i_jkl + R^i_klj + R^i_ljk|
double bianchi_defect(const Tensor4& r);

/// (R(v, w) z)^i = R^i_jkl z^j v^k w^l
Vector apply_curvature(const Tensor4& r, const Vector& v, const Vector& w, const Vector& z);

/// g(R(v,w)w, v) / (g(v,v) g(w,w) - g(v,w)^2) for a given inner product g.
double sectional_curvature(const Tensor4& r, const Matrix& g, const Vector& v, const Vector& w);
/// Sectional curvature of a Riemannian model.
double sectional_curvature(const ConnectionField& riemannian, const Point& x, const Vector& v, const Vector& w);

/// Flag curvature with flag pole v, measured with g_v throughout. Refuses
/// models that fail the Berwald test.
double flag_curvature(const ConnectionField& c, const Point& x, const Vector& v, const Vector& w);

/// Ric(v) = R^i_jik v^j v^k.
double ricci(const ConnectionField& c, const Point& x, const Vector& v);

struct InvarianceReport {
  double max_deviation = 0.0;
  Point witness_x;
  Vector witness_v;
  int probes = 0;
  double tolerance = 0.0;
  bool pass = false;
};

inline constexpr double kRicciInvarianceTolerance = 1e-8;
inline constexpr double kWeightedInvarianceTolerance = 1e-7;

/// Compares Ric of two models at random (x, v). Refuses when the two
/// connections disagree.
InvarianceReport ricci_invariance_check(const ConnectionField& a, const ConnectionField& b, int probes,
                                        std::uint64_t seed);

inline constexpr double kInfiniteN = std::numeric_limits<double>::infinity();

/// Reference measure m = exp(-psi) vol_F and dimension parameter N
/// (N >= n, or kInfiniteN).
struct WeightSpec {
  Expression psi;
  double n_param = kInfiniteN;
};

struct WeightedRicci {
  double value = 0.0;        // -infinity for the degenerate N = n branch
  double ricci = 0.0;
  double first = 0.0;        // (psi o eta)'(0)
  double second = 0.0;       // (psi o eta)''(0)
  bool minus_infinity = false;
};

inline constexpr double kWeightFirstDerivativeTolerance = 1e-10;

WeightedRicci weighted_ricci(const ConnectionField& c, const WeightSpec& w, const Point& x, const Vector& v);

enum class EinsteinVerdict { Einstein, RicciFlat, NotEinstein };
std::string to_string(EinsteinVerdict v);

struct EinsteinPoint {
  Point x;
  double lambda = 0.0;
  double residual = 0.0;  // max |Ric(v) - lambda F(v)^2| / max(1, |lambda|)
};

struct EinsteinReport {
  std::vector<EinsteinPoint> points;
  double lambda = 0.0;         // mean of the per-point fits
  double lambda_spread = 0.0;  // max - min over points
  double max_residual = 0.0;
  double tolerance = 1e-7;
  EinsteinVerdict verdict = EinsteinVerdict::NotEinstein;
  bool non_riemannian = false;  // fundamental tensor depends on v
  bool rigidity_warning = false;
};

/// Least-squares fit of Ric(v) = lambda(x) F(v)^2 over >= 4n unit vectors
/// per point. Refuses non-Berwald models.
EinsteinReport einstein_check(const ConnectionField& c, int points, std::uint64_t seed);

/// Compares Ric_N for N in {n, n + 1, infinity} between two models sharing
/// a connection, under the same weight psi.
InvarianceReport weighted_invariance_check(const ConnectionField& a, const ConnectionField& b, const Expression& psi,
                                           int probes, std::uint64_t seed);

struct CurvatureSample {
  Point x;
  Tensor4 tensor;
  std::optional<Vector> v;
  std::optional<Vector> w;
  std::optional<double> sectional;
  std::optional<double> flag;
  std::optional<double> ricci;
  std::vector<std::pair<double, WeightedRicci>> weighted;  // (N, value)
};

/// CSV header and row: x1..xn, v1..vn, K, flag, Ric, Ric_N...
void write_csv_header(std::ostream& os, int dim, const std::vector<double>& n_values);
void write_csv_row(std::ostream& os, const CurvatureSample& s);

}  // namespace finsler
