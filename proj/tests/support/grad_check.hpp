#pragma once

// Central-difference gradient verification shared by the unit tests and the
// acceptance checks. A scalar objective L = sum_i c_i * y_i with fixed random
// weights c turns any layer or model output into a single differentiable
// number; analytic gradients from backward() are then compared against
// (L(x + eps) - L(x - eps)) / (2 eps) coordinate by coordinate.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "alt/nn/layers.hpp"
#include "alt/nn/model.hpp"
#include "alt/nn/tensor.hpp"
#include "alt/util/rng.hpp"

namespace alt::testsupport {

inline constexpr double kGradEps = 1e-6;
inline constexpr double kGradTol = 1e-5;

// Relative error with a floor so that roundoff noise on near-zero gradients
// is not amplified into spurious failures.
inline double grad_rel_err(double a, double b) {
  const double denom = std::max({0.1, std::fabs(a), std::fabs(b)});
  return std::fabs(a - b) / denom;
}

inline nn::Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng,
                                double lo = -1.0, double hi = 1.0) {
  nn::Tensor t(std::move(shape));
  for (auto& v : t.v) v = rng.uniform(lo, hi);
  return t;
}

// Pushes values away from the listed non-differentiable points so central
// differences never straddle a kink.
inline void avoid_kinks(nn::Tensor& t, const std::vector<double>& kinks,
                        double margin = 1e-3) {
  for (auto& v : t.v)
    for (double k : kinks)
      if (std::fabs(v - k) < margin) v = k + (v >= k ? margin : -margin);
}

struct GradReport {
  double max_rel = 0.0;
  std::size_t coords = 0;

  void note(double analytic, double numeric) {
    max_rel = std::max(max_rel, grad_rel_err(analytic, numeric));
    ++coords;
  }
};

inline double layer_objective(nn::Layer& layer, const nn::Tensor& x,
                              const std::vector<double>& c, bool train) {
  nn::Tensor y = layer.forward(x, train);
  double acc = 0.0;
  for (std::size_t i = 0; i < y.v.size(); ++i) acc += c[i] * y.v[i];
  return acc;
}

// Checks input and parameter gradients of a single layer. The layer must
// already be in a reproducible state (dropout masks frozen, if any).
inline GradReport check_layer_gradients(nn::Layer& layer, nn::Tensor x,
                                        bool train = true,
                                        double eps = kGradEps) {
  nn::Tensor y0 = layer.forward(x, train);
  std::vector<double> c(y0.v.size());
  Rng crng(0xC0EFF5u);
  const double scale = 1.0 / std::sqrt(static_cast<double>(c.size()));
  for (auto& ci : c) ci = crng.uniform(-1.0, 1.0) * scale;

  nn::Tensor y = layer.forward(x, train);
  nn::Tensor gout(y.shape);
  gout.v = c;
  for (auto& p : layer.params()) std::fill(p.grad, p.grad + p.n, 0.0);
  nn::Tensor gx = layer.backward(gout);

  GradReport rep;
  for (std::size_t i = 0; i < x.v.size(); ++i) {
    const double keep = x.v[i];
    x.v[i] = keep + eps;
    const double lp = layer_objective(layer, x, c, train);
    x.v[i] = keep - eps;
    const double lm = layer_objective(layer, x, c, train);
    x.v[i] = keep;
    rep.note(gx.v[i], (lp - lm) / (2.0 * eps));
  }
  for (auto& p : layer.params())
    for (std::size_t i = 0; i < p.n; ++i) {
      const double keep = p.value[i];
      p.value[i] = keep + eps;
      const double lp = layer_objective(layer, x, c, train);
      p.value[i] = keep - eps;
      const double lm = layer_objective(layer, x, c, train);
      p.value[i] = keep;
      rep.note(p.grad[i], (lp - lm) / (2.0 * eps));
    }
  return rep;
}

inline double model_objective(nn::AltModel& m, const nn::Tensor& img,
                              const nn::Tensor& tab, const nn::Tensor& hold,
                              const std::vector<double>& c) {
  nn::Tensor y = m.forward(img, tab, hold, true);
  double acc = 0.0;
  for (std::size_t i = 0; i < y.v.size(); ++i) acc += c[i] * y.v[i];
  return acc;
}

// Checks every trainable parameter of an assembled model plus the gradient
// flowing back to the image input, in train mode with the dropout mask
// frozen by the caller.
inline GradReport check_model_gradients(nn::AltModel& model, nn::Tensor image,
                                        const nn::Tensor& tabular,
                                        const nn::Tensor& holding,
                                        double eps = kGradEps) {
  nn::Tensor y0 = model.forward(image, tabular, holding, true);
  std::vector<double> c(y0.v.size());
  Rng crng(0xC0EFF6u);
  for (auto& ci : c) ci = crng.uniform(-1.0, 1.0);

  nn::Tensor y = model.forward(image, tabular, holding, true);
  nn::Tensor gout(y.shape);
  gout.v = c;
  model.zero_grad();
  nn::Tensor gimg = model.backward(gout);

  GradReport rep;
  for (std::size_t i = 0; i < image.v.size(); ++i) {
    const double keep = image.v[i];
    image.v[i] = keep + eps;
    const double lp = model_objective(model, image, tabular, holding, c);
    image.v[i] = keep - eps;
    const double lm = model_objective(model, image, tabular, holding, c);
    image.v[i] = keep;
    rep.note(gimg.v[i], (lp - lm) / (2.0 * eps));
  }
  for (auto& p : model.params())
    for (std::size_t i = 0; i < p.n; ++i) {
      const double keep = p.value[i];
      p.value[i] = keep + eps;
      const double lp = model_objective(model, image, tabular, holding, c);
      p.value[i] = keep - eps;
      const double lm = model_objective(model, image, tabular, holding, c);
      p.value[i] = keep;
      rep.note(p.grad[i], (lp - lm) / (2.0 * eps));
    }
  return rep;
}

// Small two-branch layout used for whole-model gradient checks: every layer
// kind appears (strided and unit-stride blocks, a repeat with a residual
// connection, expansion 1) while staying cheap enough for finite differences
// over every parameter.
inline nn::ModelConfig tiny_model_config(bool ablate) {
  nn::ModelConfig cfg;
  cfg.image_size = 16;
  cfg.main_stem_channels = 2;
  cfg.main_stages = {{4, 2, 3, 1, 2}, {6, 2, 3, 2, 2}};
  cfg.main_embed = 8;
  cfg.hold_stem_channels = 2;
  cfg.hold_stages = {{4, 2, 3, 1, 1}, {6, 2, 3, 1, 2}};
  cfg.hold_embed = 8;
  cfg.head_dropout = 0.1;
  cfg.ablate_holding = ablate;
  return cfg;
}

}  // namespace alt::testsupport
