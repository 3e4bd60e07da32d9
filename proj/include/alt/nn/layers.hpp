#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "alt/nn/tensor.hpp"
#include "alt/util/rng.hpp"

namespace alt::nn {

// Trainable parameter block: value and gradient arrays of equal length.
struct ParamRef {
  double* value;
  double* grad;
  std::size_t n;
};

class Layer {
 public:
  virtual ~Layer() = default;

  // Caches whatever backward needs; train toggles batch-norm statistics
  // and dropout.
  virtual Tensor forward(const Tensor& x, bool train) = 0;
  // grad_out matches the last forward output; returns grad w.r.t. input
  // and accumulates parameter gradients.
  virtual Tensor backward(const Tensor& grad_out) = 0;

  virtual std::vector<ParamRef> params() { return {}; }
  // Full state including non-trainable buffers, in a fixed order.
  virtual void save_state(std::vector<double>& out) const { (void)out; }
  virtual void load_state(const double*& p) { (void)p; }
};

// Standard KxK cross-correlation, same padding (K-1)/2, NCHW.
class Conv2d : public Layer {
 public:
  Conv2d(int cin, int cout, int k, int stride, bool bias, Rng& rng);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& g) override;
  std::vector<ParamRef> params() override;
  void save_state(std::vector<double>& out) const override;
  void load_state(const double*& p) override;

 private:
  int cin_, cout_, k_, stride_, pad_;
  bool bias_;
  std::vector<double> w_, b_, gw_, gb_;
  Tensor x_;
};

// Per-channel KxK convolution (channel multiplier 1), no bias.
class DepthwiseConv2d : public Layer {
 public:
  DepthwiseConv2d(int channels, int k, int stride, Rng& rng);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& g) override;
  std::vector<ParamRef> params() override;
  void save_state(std::vector<double>& out) const override;
  void load_state(const double*& p) override;

 private:
  int c_, k_, stride_, pad_;
  std::vector<double> w_, gw_;
  Tensor x_;
};

// 1x1 channel-mixing convolution, stride 1.
class PointwiseConv2d : public Layer {
 public:
  PointwiseConv2d(int cin, int cout, bool bias, Rng& rng);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& g) override;
  std::vector<ParamRef> params() override;
  void save_state(std::vector<double>& out) const override;
  void load_state(const double*& p) override;

 private:
  int cin_, cout_;
  bool bias_;
  std::vector<double> w_, b_, gw_, gb_;
  Tensor x_;
};

// Batch normalization over (N,H,W) per channel for rank-4 inputs, over N
// per feature for rank-2 inputs. Running statistics use momentum 0.1 and
// the unbiased variance, batch statistics the biased one.
class BatchNorm : public Layer {
 public:
  explicit BatchNorm(int channels, double eps = 1e-5, double momentum = 0.1);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& g) override;
  std::vector<ParamRef> params() override;
  void save_state(std::vector<double>& out) const override;
  void load_state(const double*& p) override;

 private:
  int c_;
  double eps_, momentum_;
  std::vector<double> gamma_, beta_, ggamma_, gbeta_;
  std::vector<double> run_mean_, run_var_;
  std::vector<double> inv_std_;  // per channel, last train batch
  Tensor xhat_;
  bool last_train_ = false;
  std::size_t spatial_ = 1;
};

class Linear : public Layer {
 public:
  Linear(int in, int out, bool bias, Rng& rng);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& g) override;
  std::vector<ParamRef> params() override;
  void save_state(std::vector<double>& out) const override;
  void load_state(const double*& p) override;
  int in_features() const { return in_; }
  int out_features() const { return out_; }

 private:
  int in_, out_;
  bool bias_;
  std::vector<double> w_, b_, gw_, gb_;
  Tensor x_;
};

class LeakyReLU : public Layer {
 public:
  explicit LeakyReLU(double slope = 0.01) : slope_(slope) {}
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& g) override;

 private:
  double slope_;
  Tensor x_;
};

class ReLU6 : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& g) override;

 private:
  Tensor x_;
};

class Sigmoid : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& g) override;

 private:
  Tensor y_;
};

// Inverted dropout; identity in eval mode. freeze_mask keeps the current
// mask for finite-difference gradient checks.
class Dropout : public Layer {
 public:
  Dropout(double rate, Rng& rng) : rate_(rate), rng_(&rng) {}
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& g) override;
  void freeze_mask(bool frozen) { frozen_ = frozen; }

 private:
  double rate_;
  Rng* rng_;
  bool frozen_ = false;
  std::vector<double> mask_;
  bool identity_ = true;
};

class GlobalAvgPool : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& g) override;

 private:
  std::vector<std::size_t> in_shape_;
};

class Sequential : public Layer {
 public:
  Sequential() = default;
  void add(std::unique_ptr<Layer> l) { layers_.push_back(std::move(l)); }
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& g) override;
  std::vector<ParamRef> params() override;
  void save_state(std::vector<double>& out) const override;
  void load_state(const double*& p) override;
  std::size_t size() const { return layers_.size(); }
  Layer* at(std::size_t i) { return layers_[i].get(); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

// MobileNet-style block: pointwise expand -> depthwise -> pointwise
// project, batch norm after every convolution, ReLU6 on all but the
// projection. The residual connection exists only when stride is 1 and
// the channel count is unchanged. expansion == 1 omits the expand stage.
class InvertedResidual : public Layer {
 public:
  InvertedResidual(int cin, int cout, int stride, int expansion, int k,
                   Rng& rng);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& g) override;
  std::vector<ParamRef> params() override;
  void save_state(std::vector<double>& out) const override;
  void load_state(const double*& p) override;
  bool uses_skip() const { return skip_; }

 private:
  bool skip_;
  Sequential inner_;
  Tensor x_;
};

}  // namespace alt::nn
