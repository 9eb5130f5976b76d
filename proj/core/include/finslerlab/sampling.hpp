#pragma once

// Reproducible random streams, a small worker pool and compensated sums.

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <functional>

namespace finsler {

/// Counter-based generator: draw i of stream s under seed k is a pure
/// function of (k, s, i), so results do not depend on scheduling or platform.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// Uniform direction on the Euclidean unit sphere in R^n.
  Eigen::VectorXd unit_vector(int n);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Worker cap: FINSLERLAB_THREADS when set, else hardware concurrency.
int worker_count();

/// Runs fn(i) for i in [0, n). Exceptions are rethrown for the lowest
/// failing index so error reports are deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

/// Neumaier compensated summation.
class CompensatedSum {
 public:
  void add(double x);
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace finsler
