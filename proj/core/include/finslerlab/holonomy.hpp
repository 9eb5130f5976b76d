#pragma once

// Holonomy sampling at a base point, the averaged Riemannian metric of a
// Berwald model, holonomy-invariant splitting of the tangent space and
// invariance tests for functions on the tangent space.

#include "finslerlab/connection.hpp"

#include <string>
#include <vector>

namespace finsler {

struct LoopSpec {
  std::string kind;  // "geodesic-triangle", "product", "custom"
  double scale = 0.0;
  std::vector<Point> vertices;
  int left = -1;   // factors of a product sample
  int right = -1;
};

struct HolonomyBundle {
  Point x;
  std::vector<LoopSpec> loops;
  std::vector<Matrix> matrices;  // P_gamma, same order as loops
  std::vector<double> scales;
};

inline const std::vector<double> kDefaultLoopScales = {0.1, 0.3, 0.6};

/// Distance from x to the boundary of the chart box.
double chart_radius(const ChartBox& box, const Point& x);

/// Transports around `loop_count` geodesic triangles anchored at x, with
/// edges of coordinate length scale * chart_radius cycling through `scales`,
/// then appends the products of consecutive samples.
HolonomyBundle holonomy_samples(const ConnectionField& c, const Point& x, int loop_count, std::uint64_t seed,
                                const std::vector<double>& scales = kDefaultLoopScales);

/// Appends the transport matrix of a caller-built closed curve.
void add_loop(HolonomyBundle& bundle, const ConnectionField& c, const CurveRecord& loop, std::string kind = "custom");

/// Geodesic from a to b by Newton shooting on the initial velocity.
CurveRecord geodesic_between(const ConnectionField& c, const Point& a, const Point& b);

/// Rotation angle in (-pi, pi] of a 2x2 transport matrix measured in a
/// g-orthonormal frame.
double rotation_angle(const Matrix& p, const Matrix& g);

struct NormPreservationReport {
  double max_relative_change = 0.0;
  int loop = -1;
  Vector witness_v;
  double tolerance = 1e-6;
  bool pass = false;
};

/// max |F_x(P v) - F_x(v)| / F_x(v) over the bundle and random v.
NormPreservationReport norm_preservation(const FinslerModel& m, const HolonomyBundle& h, int vectors,
                                         std::uint64_t seed);

/// Riemannian metric h_ij(x) = average of g_ij(x, u) over the indicatrix,
/// weighted by the normalized cone measure.
class SzaboMetric {
 public:
  SzaboMetric(FinslerModel model, int resolution, std::uint64_t seed);

  const FinslerModel& model() const { return model_; }
  int resolution() const { return resolution_; }

  Matrix metric(const Point& x) const;
  /// dh(l, i, j) = d h_ij / dx^l
  Tensor3 derivative(const Point& x) const;
  Tensor3 christoffel(const Point& x) const;
  /// |h - h at half resolution|_max at x.
  double quadrature_error(const Point& x) const;

 private:
  struct Rule {
    std::vector<Vector> dirs;
    std::vector<double> weights;
  };
  static Rule make_rule(int dim, int resolution, std::uint64_t seed);
  void average(const Rule& rule, const Point& x, Matrix& h, Tensor3* dh) const;

  FinslerModel model_;
  int resolution_;
  Rule rule_;
  Rule coarse_;
  Program program_;  // F, dF/dx, g, dg/dx
};

inline constexpr int kDefaultSzaboResolution = 64;

/// Refuses non-Berwald models.
SzaboMetric szabo_metrize(const ConnectionField& c, int resolution = kDefaultSzaboResolution, std::uint64_t seed = 0);

struct MetrizationReport {
  double max_deviation = 0.0;  // |Christoffel(h) - Gamma|
  Point witness_x;
  double min_eigenvalue = 0.0;
  double tolerance = 1e-6;
  bool pass = false;
};

MetrizationReport metrization_check(const ConnectionField& c, const SzaboMetric& h, int probes, std::uint64_t seed);

struct SplitResult {
  std::vector<Matrix> subspaces;  // columns h-orthonormal
  std::vector<bool> flat;
  double commutator_residual = 0.0;
  double block_residual = 0.0;  // off-diagonal blocks in the split basis
  double condition_number = 0.0;
  int commutant_dim = 0;
  Matrix h;
};

inline constexpr double kFlatTolerance = 1e-6;

/// Invariant subspaces from the commutant of the sampled holonomy among
/// h-symmetric operators.
SplitResult de_rham_split(const HolonomyBundle& bundle, const Matrix& h, std::uint64_t seed = 0);

/// Largest principal angle between the column spans of a and b.
double principal_angle(const Matrix& a, const Matrix& b);

struct InvariantFunctionReport {
  bool invariant = false;
  bool radial = false;
  double max_change = 0.0;
  double level_spread = 0.0;
  int witness_loop = -1;
  Vector witness_v;
  double tolerance = 1e-6;
};

/// Tests G(P v) = G(v) over the bundle and whether G is constant on the
/// indicatrix. G is an expression in the fiber variables v1..vn.
InvariantFunctionReport invariant_function_test(const Expression& gfun, const FinslerModel& m,
                                                const HolonomyBundle& bundle, int samples, std::uint64_t seed);

}  // namespace finsler
