#pragma once

#include <cstddef>
#include <string>
#include <vector>

// Double-precision inner-loop kernels for the neural engine and metrics.
// Each kernel has a scalar reference implementation and, where the build
// host supports it, an AVX2/FMA or NEON variant. The active variant is
// picked once at runtime from CPU capabilities; tests can force a backend
// to check scalar/vector equivalence.

namespace alt::simd {

enum class Backend { kScalar, kAvx2, kNeon };

const char* backend_name(Backend b);

struct Kernels {
  Backend backend;

  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += a * x[i]
  void (*axpy)(double* y, const double* x, double a, std::size_t n);
  // y[i] *= a
  void (*scale)(double* y, double a, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  // sum of (x[i] - mu)^2
  double (*sumsq_diff)(const double* x, double mu, std::size_t n);
  // sum of |a[i] - b[i]|
  double (*abs_diff_sum)(const double* a, const double* b, std::size_t n);
  // sum of (a[i] - b[i])^2
  double (*sq_diff_sum)(const double* a, const double* b, std::size_t n);
  // Adam update with precomputed bias corrections c1 = 1/(1-b1^t),
  // c2 = 1/(1-b2^t):
  //   m = b1*m + (1-b1)*g; v = b2*v + (1-b2)*g^2
  //   p -= lr * (c1*m) / (sqrt(c2*v) + eps)
  void (*adam_step)(double* p, const double* g, double* m, double* v,
                    std::size_t n, double lr, double b1, double b2, double eps,
                    double c1, double c2);
};

// Kernel tables. scalar_kernels() always exists; the others are present
// only when compiled in AND usable on the running CPU.
const Kernels& scalar_kernels();
std::vector<const Kernels*> available_kernels();

// Active table (runtime-selected, widest available by default).
const Kernels& active();
// Test hook; throws ConfigError if the backend is unavailable.
void force_backend(Backend b);
void reset_backend();

// Convenience wrappers through the active table.
inline double dot(const double* a, const double* b, std::size_t n) {
  return active().dot(a, b, n);
}
inline void axpy(double* y, const double* x, double a, std::size_t n) {
  active().axpy(y, x, a, n);
}
inline void scale(double* y, double a, std::size_t n) {
  active().scale(y, a, n);
}
inline double sum(const double* x, std::size_t n) { return active().sum(x, n); }
inline double sumsq_diff(const double* x, double mu, std::size_t n) {
  return active().sumsq_diff(x, mu, n);
}
inline double abs_diff_sum(const double* a, const double* b, std::size_t n) {
  return active().abs_diff_sum(a, b, n);
}
inline double sq_diff_sum(const double* a, const double* b, std::size_t n) {
  return active().sq_diff_sum(a, b, n);
}
inline void adam_step(double* p, const double* g, double* m, double* v,
                      std::size_t n, double lr, double b1, double b2,
                      double eps, double c1, double c2) {
  active().adam_step(p, g, m, v, n, lr, b1, b2, eps, c1, c2);
}

}  // namespace alt::simd
