#include <cmath>
#include <vector>

#include <doctest.h>

#include "alt/simd/kernels.hpp"
#include "alt/util/errors.hpp"
#include "alt/util/rng.hpp"

using namespace alt;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -2.0,
                               double hi = 2.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace

TEST_SUITE("simd") {

TEST_CASE("every available backend matches the scalar reference") {
  const auto& ref = simd::scalar_kernels();
  Rng rng(0x51d51d);
  // Lengths straddle the 4/8-lane boundaries, including the empty vector.
  const std::size_t lens[] = {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17,
                              31, 33, 64, 100, 257};
  for (const simd::Kernels* k : simd::available_kernels()) {
    CAPTURE(simd::backend_name(k->backend));
    for (std::size_t n : lens) {
      auto a = random_vec(rng, n);
      auto b = random_vec(rng, n);

      CHECK(k->dot(a.data(), b.data(), n) ==
            doctest::Approx(ref.dot(a.data(), b.data(), n)).epsilon(1e-12));
      CHECK(k->sum(a.data(), n) ==
            doctest::Approx(ref.sum(a.data(), n)).epsilon(1e-12));
      CHECK(k->sumsq_diff(a.data(), 0.37, n) ==
            doctest::Approx(ref.sumsq_diff(a.data(), 0.37, n)).epsilon(1e-12));
      CHECK(k->abs_diff_sum(a.data(), b.data(), n) ==
            doctest::Approx(ref.abs_diff_sum(a.data(), b.data(), n))
                .epsilon(1e-12));
      CHECK(k->sq_diff_sum(a.data(), b.data(), n) ==
            doctest::Approx(ref.sq_diff_sum(a.data(), b.data(), n))
                .epsilon(1e-12));

      auto y1 = random_vec(rng, n);
      auto y2 = y1;
      k->axpy(y1.data(), a.data(), 1.7, n);
      ref.axpy(y2.data(), a.data(), 1.7, n);
      for (std::size_t i = 0; i < n; ++i)
        CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-14));

      auto s1 = y1;
      auto s2 = y1;
      k->scale(s1.data(), -0.3, n);
      ref.scale(s2.data(), -0.3, n);
      for (std::size_t i = 0; i < n; ++i)
        CHECK(s1[i] == doctest::Approx(s2[i]).epsilon(1e-14));
    }
  }
}

TEST_CASE("adam_step backends agree and match a hand-stepped update") {
  const auto& ref = simd::scalar_kernels();
  Rng rng(77);
  const std::size_t n = 37;
  const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const int t = 3;
  const double c1 = 1.0 / (1.0 - std::pow(b1, t));
  const double c2 = 1.0 / (1.0 - std::pow(b2, t));

  auto g = random_vec(rng, n);
  auto p0 = random_vec(rng, n);
  auto m0 = random_vec(rng, n, 0.0, 0.1);
  auto v0 = random_vec(rng, n, 0.0, 0.1);

  for (const simd::Kernels* k : simd::available_kernels()) {
    CAPTURE(simd::backend_name(k->backend));
    auto p = p0, m = m0, v = v0;
    k->adam_step(p.data(), g.data(), m.data(), v.data(), n, lr, b1, b2, eps,
                 c1, c2);
    for (std::size_t i = 0; i < n; ++i) {
      const double mi = b1 * m0[i] + (1 - b1) * g[i];
      const double vi = b2 * v0[i] + (1 - b2) * g[i] * g[i];
      const double pi = p0[i] - lr * (c1 * mi) / (std::sqrt(c2 * vi) + eps);
      CHECK(m[i] == doctest::Approx(mi).epsilon(1e-13));
      CHECK(v[i] == doctest::Approx(vi).epsilon(1e-13));
      CHECK(p[i] == doctest::Approx(pi).epsilon(1e-12));
    }
    (void)ref;
  }
}

TEST_CASE("force_backend switches the active table and reset restores it") {
  simd::force_backend(simd::Backend::kScalar);
  CHECK(simd::active().backend == simd::Backend::kScalar);
  simd::reset_backend();
  // Widest available again; on x86-64 with AVX2 that is not scalar.
  const auto avail = simd::available_kernels();
  CHECK(simd::active().backend == avail.back()->backend);
}

TEST_CASE("forcing an unavailable backend throws ConfigError") {
  bool has_neon = false;
  for (const simd::Kernels* k : simd::available_kernels())
    if (k->backend == simd::Backend::kNeon) has_neon = true;
  if (!has_neon)
    CHECK_THROWS_AS(simd::force_backend(simd::Backend::kNeon), ConfigError);
  simd::reset_backend();
}

}  // TEST_SUITE
