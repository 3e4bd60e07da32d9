// NEON kernel variants for aarch64, where float64x2 is baseline.

#if defined(__aarch64__)

#include <arm_neon.h>

#include <cmath>
#include <cstddef>

#include "alt/simd/kernels.hpp"

namespace alt::simd {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double acc = vaddvq_f64(acc0) + vaddvq_f64(acc1);
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_neon(double* y, const double* x, double a, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

void scale_neon(double* y, double a, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(y + i, vmulq_f64(va, vld1q_f64(y + i)));
  for (; i < n; ++i) y[i] *= a;
}

double sum_neon(const double* x, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(x + i));
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

double sumsq_diff_neon(const double* x, double mu, std::size_t n) {
  const float64x2_t vmu = vdupq_n_f64(mu);
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t d = vsubq_f64(vld1q_f64(x + i), vmu);
    acc = vfmaq_f64(acc, d, d);
  }
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) {
    const double d = x[i] - mu;
    s += d * d;
  }
  return s;
}

double abs_diff_sum_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    acc = vaddq_f64(acc, vabdq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += std::fabs(a[i] - b[i]);
  return s;
}

double sq_diff_sum_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t d = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
    acc = vfmaq_f64(acc, d, d);
  }
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void adam_step_neon(double* p, const double* g, double* m, double* v,
                    std::size_t n, double lr, double b1, double b2, double eps,
                    double c1, double c2) {
  const float64x2_t vb1 = vdupq_n_f64(b1);
  const float64x2_t vb2 = vdupq_n_f64(b2);
  const float64x2_t vomb1 = vdupq_n_f64(1.0 - b1);
  const float64x2_t vomb2 = vdupq_n_f64(1.0 - b2);
  const float64x2_t vlr = vdupq_n_f64(lr);
  const float64x2_t veps = vdupq_n_f64(eps);
  const float64x2_t vc1 = vdupq_n_f64(c1);
  const float64x2_t vc2 = vdupq_n_f64(c2);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t vg = vld1q_f64(g + i);
    float64x2_t vm = vld1q_f64(m + i);
    float64x2_t vv = vld1q_f64(v + i);
    vm = vfmaq_f64(vmulq_f64(vomb1, vg), vb1, vm);
    vv = vfmaq_f64(vmulq_f64(vomb2, vmulq_f64(vg, vg)), vb2, vv);
    vst1q_f64(m + i, vm);
    vst1q_f64(v + i, vv);
    const float64x2_t mhat = vmulq_f64(vc1, vm);
    const float64x2_t denom = vaddq_f64(vsqrtq_f64(vmulq_f64(vc2, vv)), veps);
    const float64x2_t step = vdivq_f64(vmulq_f64(vlr, mhat), denom);
    vst1q_f64(p + i, vsubq_f64(vld1q_f64(p + i), step));
  }
  for (; i < n; ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
    p[i] -= lr * (c1 * m[i]) / (std::sqrt(c2 * v[i]) + eps);
  }
}

}  // namespace

const Kernels& neon_kernels() {
  static const Kernels k = {
      Backend::kNeon,  dot_neon,          axpy_neon,
      scale_neon,      sum_neon,          sumsq_diff_neon,
      abs_diff_sum_neon, sq_diff_sum_neon, adam_step_neon,
  };
  return k;
}

}  // namespace alt::simd

#endif  // __aarch64__
