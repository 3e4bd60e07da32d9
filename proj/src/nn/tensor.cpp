#include "alt/nn/tensor.hpp"

#include <algorithm>

#include "alt/util/errors.hpp"

namespace alt::nn {

Tensor::Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  v.assign(n, 0.0);
}

std::size_t Tensor::numel() const {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

void Tensor::ensure_grad() {
  if (grad.size() != v.size()) grad.assign(v.size(), 0.0);
}

void Tensor::zero_grad() {
  ensure_grad();
  std::fill(grad.begin(), grad.end(), 0.0);
}

}  // namespace alt::nn
