#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace alt::nn {

// Dense row-major tensor of doubles. Shapes are (N,C,H,W) for feature maps
// and (N,F) for feature vectors. The grad buffer is allocated on demand and
// always matches the value buffer in length.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> v;
  std::vector<double> grad;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s);

  static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }

  std::size_t numel() const;
  std::size_t dim(std::size_t i) const { return shape[i]; }
  std::size_t rank() const { return shape.size(); }

  void ensure_grad();
  void zero_grad();

  double& at(std::size_t i) { return v[i]; }
  double at(std::size_t i) const { return v[i]; }
};

}  // namespace alt::nn
