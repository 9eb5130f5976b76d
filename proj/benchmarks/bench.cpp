#include "finslerlab/curvature.hpp"
#include "finslerlab/holonomy.hpp"
#include "finslerlab/model_file.hpp"

#include <benchmark/benchmark.h>

#include <string>

using namespace finsler;

namespace {

FinslerModel load(const std::string& name) {
  return load_model(std::string(FINSLERLAB_MODELS_DIR) + "/" + name + ".model").model;
}

Point product_point() {
  Point x(3);
  x << 0.2, 1.1, 0.4;
  return x;
}

Vector product_vector() {
  Vector v(3);
  v << 0.5, 0.3, -0.6;
  return v;
}

void BM_BuildConnection(benchmark::State& state) {
  const FinslerModel m = load("product");
  for (auto _ : state) benchmark::DoNotOptimize(ConnectionField(m));
}
BENCHMARK(BM_BuildConnection)->Unit(benchmark::kMillisecond);

void BM_Spray(benchmark::State& state) {
  const ConnectionField c(load("product"));
  const Point x = product_point();
  const Vector v = product_vector();
  for (auto _ : state) benchmark::DoNotOptimize(c.spray(x, v));
}
BENCHMARK(BM_Spray);

void BM_BerwaldCoefficients(benchmark::State& state) {
  const ConnectionField c(load("product"));
  const Point x = product_point();
  const Vector v = product_vector();
  for (auto _ : state) benchmark::DoNotOptimize(berwald_coefficients(c, x, v));
}
BENCHMARK(BM_BerwaldCoefficients);

void BM_CurvatureTensor(benchmark::State& state) {
  const ConnectionField c(load("product"));
  const Point x = product_point();
  const Vector v = product_vector();
  curvature_tensor(c, x, v);
  for (auto _ : state) benchmark::DoNotOptimize(curvature_tensor(c, x, v));
}
BENCHMARK(BM_CurvatureTensor);

void BM_Geodesic(benchmark::State& state) {
  const ConnectionField c(load("product"));
  for (auto _ : state) {
    benchmark::DoNotOptimize(integrate_geodesic(c, product_point(), product_vector(), static_cast<double>(state.range(0))));
  }
}
BENCHMARK(BM_Geodesic)->Arg(1)->Arg(3)->Unit(benchmark::kMicrosecond);

void BM_Transport(benchmark::State& state) {
  const ConnectionField c(load("product"));
  const CurveRecord g = integrate_geodesic(c, product_point(), product_vector(), 2.0);
  for (auto _ : state) benchmark::DoNotOptimize(transport_matrix(c, g));
}
BENCHMARK(BM_Transport)->Unit(benchmark::kMicrosecond);

void BM_HolonomySamples(benchmark::State& state) {
  const ConnectionField c(load("product"));
  Point x(3);
  x << 0.0, 1.5707963267948966, 0.0;
  for (auto _ : state) benchmark::DoNotOptimize(holonomy_samples(c, x, static_cast<int>(state.range(0)), 0));
}
BENCHMARK(BM_HolonomySamples)->Arg(10)->Arg(30)->Unit(benchmark::kMillisecond);

void BM_SzaboMetric(benchmark::State& state) {
  const ConnectionField c(load("product"));
  const SzaboMetric h = szabo_metrize(c, static_cast<int>(state.range(0)));
  const Point x = product_point();
  for (auto _ : state) benchmark::DoNotOptimize(h.christoffel(x));
}
BENCHMARK(BM_SzaboMetric)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
