#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "alt/nn/layers.hpp"
#include "alt/nn/tensor.hpp"

namespace alt::nn {

// ------------------------------------------------------- FLOP accounting

enum class LayerKind { kConv, kDwConv, kPwConv, kSeparable, kInvRes };

struct LayerSpec {
  LayerKind kind = LayerKind::kConv;
  int k = 3;
  int cin = 0;
  int cout = 0;
  int expansion = 6;
};

// Multiply counts on an h x w input map: standard convolution
// h*w*cin*cout*k^2; depthwise-separable h*w*cin*(k^2 + cout); the
// per-primitive kinds cost their respective term. Throws for non-conv
// layers (activations, norms, affine maps are not counted here).
std::int64_t flops(const LayerSpec& spec, int h, int w);

// ------------------------------------------------------ compound scaling

struct ScalingCoefficients {
  double phi = 0.0;
  double alpha = 1.2;
  double beta = 1.1;
  double gamma_r = 1.15;

  void validate() const;
  // alpha * beta^2 * gamma_r^2, constrained to be roughly 2.
  double constraint_product() const {
    return alpha * beta * beta * gamma_r * gamma_r;
  }
};

struct ScaledConfig {
  std::vector<int> depths;
  std::vector<int> widths;
  int resolution = 0;
};

// depths scale by alpha^phi rounded up, widths by beta^phi rounded to the
// nearest multiple of 8, resolution by gamma_r^phi rounded to even.
// phi == 0 returns the base configuration unchanged.
ScaledConfig compound_scale(const ScalingCoefficients& c,
                            const std::vector<int>& base_depths,
                            const std::vector<int>& base_widths,
                            int base_resolution);

// ----------------------------------------------------------------- model

struct StageSpec {
  int cout = 0;
  int stride = 1;
  int k = 3;
  int repeat = 1;
  int expansion = 6;
};

struct ModelConfig {
  int image_size = 64;
  int image_channels = 3;

  int main_stem_channels = 4;
  std::vector<StageSpec> main_stages = {
      {8, 2, 3, 1, 4}, {12, 2, 3, 1, 4}, {16, 2, 3, 1, 4}};
  int main_last_channels = 0;  // optional 1x1 conv before pooling, 0 = none
  int main_embed = 64;

  int hold_stem_channels = 4;
  std::vector<StageSpec> hold_stages = {
      {6, 2, 3, 1, 4}, {8, 2, 5, 1, 4}, {8, 1, 3, 1, 4}};
  int hold_last_channels = 0;
  int hold_embed = 32;

  int tabular_dim = 12;
  int holding_dim = 5;
  double head_dropout = 0.1;
  bool ablate_holding = false;

  static ModelConfig desk();
  // Full-size reference layout; parameter count is reported, not trained
  // in tests.
  static ModelConfig full_scale();

  std::string to_json_text() const;
  static ModelConfig from_json_text(const std::string& text);
};

// Two-branch fusion regressor. The image feeds a main inverted-residual
// backbone (64-d embedding) and, unless ablated, a second MBConv backbone
// whose 32-d embedding joins the 5-d holding vector through the
// featurization heads; tabular features join through their own head. The
// output is calibrated seconds: raw * scale + offset.
class AltModel {
 public:
  AltModel(const ModelConfig& cfg, std::uint64_t seed);

  // image (N,C,H,W), tabular (N,12), holding (N,5) -> (N,1)
  Tensor forward(const Tensor& image, const Tensor& tabular,
                 const Tensor& holding, bool train);
  // grad w.r.t. the (N,1) output; returns grad w.r.t. the image input.
  Tensor backward(const Tensor& grad_pred);

  std::vector<ParamRef> params();
  std::size_t param_count();
  void zero_grad();

  void set_output_calibration(double offset, double scale);
  double output_offset() const { return offset_; }
  double output_scale() const { return scale_; }

  const ModelConfig& config() const { return cfg_; }

  // Full state (weights + norm statistics + calibration) as a flat vector.
  std::vector<double> state() const;
  void set_state(const std::vector<double>& s);

  void save_json(const std::string& path) const;
  static AltModel load_json(const std::string& path);

  // Residual-connection map of the main backbone blocks, for graph checks.
  std::vector<bool> main_skip_map() const { return main_skips_; }
  std::vector<bool> hold_skip_map() const { return hold_skips_; }

  // For dropout-freezing in finite-difference tests.
  Dropout* head_dropout_layer() { return dropout_; }

 private:
  ModelConfig cfg_;
  Rng rng_;
  Sequential main_bb_, tab_mlp_, fuse1_, hold_bb_, n1_, n2_;
  std::unique_ptr<Linear> final_;
  Dropout* dropout_ = nullptr;
  std::vector<bool> main_skips_, hold_skips_;
  double offset_ = 0.0, scale_ = 1.0;

  // forward caches for the hand-wired fusion graph
  std::size_t batch_ = 0;
  bool last_train_ = false;
};

}  // namespace alt::nn
