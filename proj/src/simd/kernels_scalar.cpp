#include <cmath>
#include <cstddef>

#include "alt/simd/kernels.hpp"

namespace alt::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double* y, const double* x, double a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_scalar(double* y, double a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] *= a;
}

double sum_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double sumsq_diff_scalar(const double* x, double mu, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - mu;
    acc += d * d;
  }
  return acc;
}

double abs_diff_sum_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::fabs(a[i] - b[i]);
  return acc;
}

double sq_diff_sum_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

void adam_step_scalar(double* p, const double* g, double* m, double* v,
                      std::size_t n, double lr, double b1, double b2,
                      double eps, double c1, double c2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
    p[i] -= lr * (c1 * m[i]) / (std::sqrt(c2 * v[i]) + eps);
  }
}

}  // namespace

const Kernels& scalar_kernels() {
  static const Kernels k = {
      Backend::kScalar, dot_scalar,          axpy_scalar,
      scale_scalar,     sum_scalar,          sumsq_diff_scalar,
      abs_diff_sum_scalar, sq_diff_sum_scalar, adam_step_scalar,
  };
  return k;
}

}  // namespace alt::simd
