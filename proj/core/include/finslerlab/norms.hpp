#pragma once

// Finsler norm constructions on coordinate charts, the fundamental tensor,
// structural checks (homogeneity, strong convexity), Busemann-Hausdorff
// density and product norms G(v0, F1(v1), ..., Fm(vm)).

#include "finslerlab/expr.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace finsler {

using Point = Eigen::VectorXd;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ExprMatrix = std::vector<std::vector<Expression>>;

/// Violated geometric precondition (zero vector, degenerate norm, refused
/// theorem hypothesis, ...).
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
};
using ChartBox = std::vector<Interval>;

enum class NormKind { Riemannian, Minkowski, Randers, Product, Raw };

std::string to_string(NormKind kind);

class FinslerModel;
class CounterRng;

/// Uniform point in a chart box.
Point random_point(const ChartBox& box, CounterRng& rng);

struct ProductStructure {
  Expression g;          // in slots a1..ak, s1..sm
  bool g_is_squared = false;
  int flat_dim = 0;
  std::vector<FinslerModel> factors;
  std::vector<int> factor_offsets;  // first chart index of each factor
};

class FinslerModel {
 public:
  /// Metric entries g_ij(x); only the upper triangle is read and mirrored.
  static FinslerModel riemannian(ExprMatrix metric, ChartBox box);
  /// Fiber-only norm given either as F or as F^2.
  static FinslerModel minkowski(int dim, Expression f, ChartBox box, bool squared = false);
  /// F = sqrt(a_ij v^i v^j) + b_i v^i. The box is shrunk about its centre
  /// until sup |b|_a < 0.99 so that F stays positive.
  static FinslerModel randers(ExprMatrix alpha, std::vector<Expression> beta, ChartBox box);
  static FinslerModel raw(int dim, Expression f, ChartBox box, bool squared = false);

  int dim() const { return dim_; }
  NormKind kind() const { return kind_; }
  const ChartBox& box() const { return box_; }
  bool contains(const Point& x) const;
  Point box_center() const;

  /// F(x, v) and F^2(x, v) as expressions in x1..xn, v1..vn.
  const Expression& norm() const { return f_; }
  const Expression& norm_squared() const { return f2_; }
  /// (1/2) d^2 F^2 / dv^i dv^j; for Riemannian models the metric entries.
  const ExprMatrix& fundamental_tensor_expressions() const { return g_; }

  const ExprMatrix& metric() const;  // Riemannian only
  const ExprMatrix& randers_alpha() const { return alpha_; }
  const std::vector<Expression>& randers_beta() const { return beta_; }
  const std::optional<ProductStructure>& product() const { return product_; }

  /// Log-density Psi of the reference measure m = exp(-Psi) vol_F.
  const std::optional<Expression>& weight() const { return weight_; }
  FinslerModel with_weight(Expression psi) const;
  /// m = rho vol_F, i.e. Psi = -log(rho).
  FinslerModel with_density(const Expression& rho) const;
  FinslerModel scaled(double factor) const;

  double evaluate_norm(const Point& x, const Vector& v) const;
  Matrix evaluate_fundamental_tensor(const Point& x, const Vector& v) const;

  /// Replaces x_i -> x_{i+offset}, v_i -> v_{i+offset} in an expression of this chart.
  static Expression shift_chart(const Expression& e, int offset);

 private:
  friend FinslerModel make_product_norm(const Expression&, int, std::vector<FinslerModel>, ChartBox, bool);
  FinslerModel() = default;
  void compile();

  int dim_ = 0;
  NormKind kind_ = NormKind::Raw;
  ChartBox box_;
  Expression f_;
  Expression f2_;
  ExprMatrix g_;
  ExprMatrix alpha_;
  std::vector<Expression> beta_;
  std::optional<ProductStructure> product_;
  std::optional<Expression> weight_;

  struct Compiled {
    Program norm;     // F, F^2
    Program tensor;   // g_ij row-major
  };
  std::shared_ptr<const Compiled> compiled_;
};

struct FundamentalTensorSample {
  Point x;
  Vector v;
  Matrix g;
  double min_eigenvalue = 0.0;
};

FundamentalTensorSample fundamental_tensor(const FinslerModel& model, const Point& x, const Vector& v);

struct ConvexityReport {
  double min_eigenvalue = 0.0;
  Point witness_x;
  Vector witness_v;
  double tolerance = 1e-9;
  bool pass = false;
};

ConvexityReport strong_convexity_check(const FinslerModel& model, int samples, std::uint64_t seed);

struct HomogeneityReport {
  double max_deviation = 0.0;
  Point witness_x;
  Vector witness_v;
  double witness_lambda = 0.0;
  double tolerance = 1e-10;
  bool pass = false;
};

HomogeneityReport homogeneity_check(const FinslerModel& model, int samples, std::uint64_t seed);

/// Product norm F(v0, v1, ..., vm) = G(v0, F1(v1), ..., Fm(vm)) on the chart
/// R^k x chart_1 x ... x chart_m. G is an expression in a1..ak, s1..sm
/// (given as G^2 when `g_is_squared`) and must be even in every s_j.
FinslerModel make_product_norm(const Expression& g, int flat_dim, std::vector<FinslerModel> factors,
                               ChartBox flat_box, bool g_is_squared = false);

struct DensityEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
  double ball_volume = 0.0;
};

inline constexpr std::size_t kDefaultMonteCarloSamples = 200000;

/// Busemann-Hausdorff density sigma_F(x) = vol(Euclidean unit ball) /
/// vol{v : F(x, v) < 1}, by rejection sampling in a bounding box.
DensityEstimate bh_density(const FinslerModel& model, const Point& x,
                           std::size_t samples = kDefaultMonteCarloSamples, std::uint64_t seed = 0);

/// G(y0 - x0, d_1, ..., d_m) for a product model.
double product_distance(const FinslerModel& product, const Vector& flat_from, const Vector& flat_to,
                        const std::vector<double>& factor_distances);

/// Volume of the Euclidean unit ball in R^n.
double unit_ball_volume(int n);

}  // namespace finsler
