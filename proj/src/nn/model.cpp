#include "alt/nn/model.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "alt/util/errors.hpp"

namespace alt::nn {
namespace {

using nlohmann::json;

Tensor concat2(const Tensor& a, const Tensor& b) {
  std::size_t n = a.shape[0], da = a.shape[1], db = b.shape[1];
  Tensor out({n, da + db});
  for (std::size_t s = 0; s < n; ++s) {
    std::copy(a.v.begin() + static_cast<std::ptrdiff_t>(s * da),
              a.v.begin() + static_cast<std::ptrdiff_t>((s + 1) * da),
              out.v.begin() + static_cast<std::ptrdiff_t>(s * (da + db)));
    std::copy(b.v.begin() + static_cast<std::ptrdiff_t>(s * db),
              b.v.begin() + static_cast<std::ptrdiff_t>((s + 1) * db),
              out.v.begin() + static_cast<std::ptrdiff_t>(s * (da + db) + da));
  }
  return out;
}

void split2(const Tensor& g, std::size_t da, Tensor& ga, Tensor& gb) {
  std::size_t n = g.shape[0], d = g.shape[1], db = d - da;
  ga = Tensor({n, da});
  gb = Tensor({n, db});
  for (std::size_t s = 0; s < n; ++s) {
    std::copy(g.v.begin() + static_cast<std::ptrdiff_t>(s * d),
              g.v.begin() + static_cast<std::ptrdiff_t>(s * d + da),
              ga.v.begin() + static_cast<std::ptrdiff_t>(s * da));
    std::copy(g.v.begin() + static_cast<std::ptrdiff_t>(s * d + da),
              g.v.begin() + static_cast<std::ptrdiff_t>((s + 1) * d),
              gb.v.begin() + static_cast<std::ptrdiff_t>(s * db));
  }
}

json stages_to_json(const std::vector<StageSpec>& stages) {
  json arr = json::array();
  for (const auto& s : stages)
    arr.push_back({{"cout", s.cout},
                   {"stride", s.stride},
                   {"k", s.k},
                   {"repeat", s.repeat},
                   {"expansion", s.expansion}});
  return arr;
}

std::vector<StageSpec> stages_from_json(const json& arr) {
  std::vector<StageSpec> out;
  for (const auto& j : arr) {
    StageSpec s;
    s.cout = j.at("cout").get<int>();
    s.stride = j.at("stride").get<int>();
    s.k = j.at("k").get<int>();
    s.repeat = j.at("repeat").get<int>();
    s.expansion = j.at("expansion").get<int>();
    out.push_back(s);
  }
  return out;
}

// Backbone: stem conv + inverted-residual stages + optional 1x1 widening +
// global pooling + affine embedding with batch norm. Returns the skip map.
std::vector<bool> build_backbone(Sequential& seq, int in_channels, int stem,
                                 const std::vector<StageSpec>& stages,
                                 int last_channels, int embed, bool embed_bn,
                                 Rng& rng) {
  std::vector<bool> skips;
  seq.add(std::make_unique<Conv2d>(in_channels, stem, 3, 2, false, rng));
  seq.add(std::make_unique<BatchNorm>(stem));
  seq.add(std::make_unique<ReLU6>());
  int c = stem;
  for (const auto& st : stages) {
    for (int r = 0; r < st.repeat; ++r) {
      int cin = c, cout = st.cout, stride = r == 0 ? st.stride : 1;
      auto block = std::make_unique<InvertedResidual>(cin, cout, stride,
                                                      st.expansion, st.k, rng);
      skips.push_back(block->uses_skip());
      seq.add(std::move(block));
      c = cout;
    }
  }
  if (last_channels > 0) {
    seq.add(std::make_unique<PointwiseConv2d>(c, last_channels, false, rng));
    seq.add(std::make_unique<BatchNorm>(last_channels));
    seq.add(std::make_unique<ReLU6>());
    c = last_channels;
  }
  seq.add(std::make_unique<GlobalAvgPool>());
  seq.add(std::make_unique<Linear>(c, embed, true, rng));
  if (embed_bn) seq.add(std::make_unique<BatchNorm>(embed));
  return skips;
}

}  // namespace

std::int64_t flops(const LayerSpec& s, int h, int w) {
  if (h < 1 || w < 1 || s.cin < 1 || s.k < 1)
    throw ConfigError("flops: invalid layer dimensions");
  auto hw = static_cast<std::int64_t>(h) * w;
  auto k2 = static_cast<std::int64_t>(s.k) * s.k;
  switch (s.kind) {
    case LayerKind::kConv:
      if (s.cout < 1) throw ConfigError("flops: conv needs output channels");
      return hw * s.cin * s.cout * k2;
    case LayerKind::kDwConv:
      return hw * s.cin * k2;
    case LayerKind::kPwConv:
      if (s.cout < 1) throw ConfigError("flops: conv needs output channels");
      return hw * s.cin * s.cout;
    case LayerKind::kSeparable:
      if (s.cout < 1) throw ConfigError("flops: conv needs output channels");
      return hw * s.cin * (k2 + s.cout);
    case LayerKind::kInvRes: {
      if (s.cout < 1 || s.expansion < 1)
        throw ConfigError("flops: invalid inverted-residual spec");
      std::int64_t mid = static_cast<std::int64_t>(s.cin) * s.expansion;
      std::int64_t expand = s.expansion > 1 ? hw * s.cin * mid : 0;
      return expand + hw * mid * k2 + hw * mid * s.cout;
    }
  }
  throw ConfigError("flops: not a convolution layer");
}

void ScalingCoefficients::validate() const {
  if (phi < 0.0) throw ConfigError("compound scaling: phi must be >= 0");
  if (alpha < 1.0 || beta < 1.0 || gamma_r < 1.0)
    throw ConfigError("compound scaling: alpha, beta, gamma must be >= 1");
}

ScaledConfig compound_scale(const ScalingCoefficients& c,
                            const std::vector<int>& base_depths,
                            const std::vector<int>& base_widths,
                            int base_resolution) {
  c.validate();
  ScaledConfig out;
  if (c.phi == 0.0) {
    out.depths = base_depths;
    out.widths = base_widths;
    out.resolution = base_resolution;
    return out;
  }
  double dm = std::pow(c.alpha, c.phi);
  double wm = std::pow(c.beta, c.phi);
  double rm = std::pow(c.gamma_r, c.phi);
  for (int d : base_depths)
    out.depths.push_back(static_cast<int>(std::ceil(d * dm)));
  for (int w : base_widths) {
    auto rounded = static_cast<int>(std::llround(w * wm / 8.0)) * 8;
    out.widths.push_back(std::max(8, rounded));
  }
  out.resolution =
      std::max(2, static_cast<int>(2 * std::llround(base_resolution * rm / 2.0)));
  return out;
}

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::full_scale() {
  ModelConfig c;
  c.image_size = 224;
  c.main_stem_channels = 32;
  c.main_stages = {{16, 1, 3, 1, 1},  {24, 2, 3, 2, 6}, {32, 2, 3, 3, 6},
                   {64, 2, 3, 4, 6},  {96, 1, 3, 3, 6}, {160, 2, 3, 3, 6},
                   {320, 1, 3, 1, 6}};
  c.main_last_channels = 1280;
  c.main_embed = 64;
  c.hold_stem_channels = 32;
  c.hold_stages = {{16, 1, 3, 1, 1},  {24, 2, 3, 2, 6}, {40, 2, 5, 2, 6},
                   {80, 2, 3, 3, 6},  {112, 1, 5, 3, 6}, {192, 2, 5, 4, 6},
                   {320, 1, 3, 1, 6}};
  c.hold_last_channels = 1280;
  c.hold_embed = 32;
  return c;
}

std::string ModelConfig::to_json_text() const {
  json j;
  j["image_size"] = image_size;
  j["image_channels"] = image_channels;
  j["main_stem_channels"] = main_stem_channels;
  j["main_stages"] = stages_to_json(main_stages);
  j["main_last_channels"] = main_last_channels;
  j["main_embed"] = main_embed;
  j["hold_stem_channels"] = hold_stem_channels;
  j["hold_stages"] = stages_to_json(hold_stages);
  j["hold_last_channels"] = hold_last_channels;
  j["hold_embed"] = hold_embed;
  j["tabular_dim"] = tabular_dim;
  j["holding_dim"] = holding_dim;
  j["head_dropout"] = head_dropout;
  j["ablate_holding"] = ablate_holding;
  return j.dump(2);
}

ModelConfig ModelConfig::from_json_text(const std::string& text) {
  json j = json::parse(text);
  ModelConfig c;
  c.image_size = j.at("image_size").get<int>();
  c.image_channels = j.at("image_channels").get<int>();
  c.main_stem_channels = j.at("main_stem_channels").get<int>();
  c.main_stages = stages_from_json(j.at("main_stages"));
  c.main_last_channels = j.at("main_last_channels").get<int>();
  c.main_embed = j.at("main_embed").get<int>();
  c.hold_stem_channels = j.at("hold_stem_channels").get<int>();
  c.hold_stages = stages_from_json(j.at("hold_stages"));
  c.hold_last_channels = j.at("hold_last_channels").get<int>();
  c.hold_embed = j.at("hold_embed").get<int>();
  c.tabular_dim = j.at("tabular_dim").get<int>();
  c.holding_dim = j.at("holding_dim").get<int>();
  c.head_dropout = j.at("head_dropout").get<double>();
  c.ablate_holding = j.at("ablate_holding").get<bool>();
  return c;
}

AltModel::AltModel(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), rng_(seed) {
  if (cfg.image_size < 8 || cfg.image_channels < 1)
    throw ConfigError("model: invalid image input spec");
  if (cfg.tabular_dim < 1 || cfg.holding_dim < 1)
    throw ConfigError("model: invalid feature widths");
  if (cfg.main_embed < 1 || cfg.hold_embed < 1)
    throw ConfigError("model: invalid embedding widths");

  main_skips_ =
      build_backbone(main_bb_, cfg.image_channels, cfg.main_stem_channels,
                     cfg.main_stages, cfg.main_last_channels, cfg.main_embed,
                     true, rng_);

  tab_mlp_.add(std::make_unique<Linear>(cfg.tabular_dim, 16, true, rng_));
  tab_mlp_.add(std::make_unique<BatchNorm>(16));
  tab_mlp_.add(std::make_unique<LeakyReLU>());

  fuse1_.add(std::make_unique<Linear>(cfg.main_embed + 16, 64, true, rng_));
  fuse1_.add(std::make_unique<BatchNorm>(64));
  fuse1_.add(std::make_unique<LeakyReLU>());

  if (!cfg.ablate_holding) {
    hold_skips_ =
        build_backbone(hold_bb_, cfg.image_channels, cfg.hold_stem_channels,
                       cfg.hold_stages, cfg.hold_last_channels, cfg.hold_embed,
                       false, rng_);

    n1_.add(std::make_unique<Linear>(cfg.holding_dim, 16, true, rng_));
    n1_.add(std::make_unique<LeakyReLU>());

    n2_.add(std::make_unique<Linear>(cfg.hold_embed + 16, 32, true, rng_));
    n2_.add(std::make_unique<BatchNorm>(32));
    n2_.add(std::make_unique<LeakyReLU>());
    n2_.add(std::make_unique<Linear>(32, 8, true, rng_));
    auto drop = std::make_unique<Dropout>(cfg.head_dropout, rng_);
    dropout_ = drop.get();
    n2_.add(std::move(drop));
    n2_.add(std::make_unique<Sigmoid>());

    final_ = std::make_unique<Linear>(64 + 8, 1, true, rng_);
  } else {
    final_ = std::make_unique<Linear>(64, 1, true, rng_);
  }
}

Tensor AltModel::forward(const Tensor& image, const Tensor& tabular,
                         const Tensor& holding, bool train) {
  batch_ = image.shape[0];
  last_train_ = train;
  Tensor e_main = main_bb_.forward(image, train);
  Tensor e_tab = tab_mlp_.forward(tabular, train);
  Tensor fused = fuse1_.forward(concat2(e_main, e_tab), train);
  Tensor raw;
  if (!cfg_.ablate_holding) {
    Tensor e_hold = hold_bb_.forward(image, train);
    Tensor e_n1 = n1_.forward(holding, train);
    Tensor h8 = n2_.forward(concat2(e_hold, e_n1), train);
    raw = final_->forward(concat2(fused, h8), train);
  } else {
    raw = final_->forward(fused, train);
  }
  Tensor out(raw.shape);
  for (std::size_t i = 0; i < raw.v.size(); ++i)
    out.v[i] = raw.v[i] * scale_ + offset_;
  return out;
}

Tensor AltModel::backward(const Tensor& grad_pred) {
  Tensor graw(grad_pred.shape);
  for (std::size_t i = 0; i < grad_pred.v.size(); ++i)
    graw.v[i] = grad_pred.v[i] * scale_;
  Tensor gf = final_->backward(graw);

  Tensor g_fused, g_img_hold;
  bool has_hold = !cfg_.ablate_holding;
  if (has_hold) {
    Tensor gh8;
    split2(gf, 64, g_fused, gh8);
    Tensor g48 = n2_.backward(gh8);
    Tensor g_eh, g_n1;
    split2(g48, static_cast<std::size_t>(cfg_.hold_embed), g_eh, g_n1);
    n1_.backward(g_n1);
    g_img_hold = hold_bb_.backward(g_eh);
  } else {
    g_fused = gf;
  }

  Tensor g80 = fuse1_.backward(g_fused);
  Tensor g_em, g_tab;
  split2(g80, static_cast<std::size_t>(cfg_.main_embed), g_em, g_tab);
  tab_mlp_.backward(g_tab);
  Tensor g_img = main_bb_.backward(g_em);
  if (has_hold)
    for (std::size_t i = 0; i < g_img.v.size(); ++i)
      g_img.v[i] += g_img_hold.v[i];
  return g_img;
}

std::vector<ParamRef> AltModel::params() {
  std::vector<ParamRef> out;
  for (Sequential* s : {&main_bb_, &tab_mlp_, &fuse1_})
    for (auto& p : s->params()) out.push_back(p);
  if (!cfg_.ablate_holding)
    for (Sequential* s : {&hold_bb_, &n1_, &n2_})
      for (auto& p : s->params()) out.push_back(p);
  for (auto& p : final_->params()) out.push_back(p);
  return out;
}

std::size_t AltModel::param_count() {
  std::size_t n = 0;
  for (const auto& p : params()) n += p.n;
  return n;
}

void AltModel::zero_grad() {
  for (auto& p : params()) std::fill(p.grad, p.grad + p.n, 0.0);
}

void AltModel::set_output_calibration(double offset, double scale) {
  if (!(scale > 0.0)) throw ConfigError("output scale must be positive");
  offset_ = offset;
  scale_ = scale;
}

std::vector<double> AltModel::state() const {
  std::vector<double> out;
  main_bb_.save_state(out);
  tab_mlp_.save_state(out);
  fuse1_.save_state(out);
  if (!cfg_.ablate_holding) {
    hold_bb_.save_state(out);
    n1_.save_state(out);
    n2_.save_state(out);
  }
  final_->save_state(out);
  out.push_back(offset_);
  out.push_back(scale_);
  return out;
}

void AltModel::set_state(const std::vector<double>& s) {
  const double* p = s.data();
  main_bb_.load_state(p);
  tab_mlp_.load_state(p);
  fuse1_.load_state(p);
  if (!cfg_.ablate_holding) {
    hold_bb_.load_state(p);
    n1_.load_state(p);
    n2_.load_state(p);
  }
  final_->load_state(p);
  auto consumed = static_cast<std::size_t>(p - s.data());
  if (consumed + 2 != s.size())
    throw ConfigError("model state size mismatch: expected " +
                      std::to_string(consumed + 2) + " values, got " +
                      std::to_string(s.size()));
  offset_ = s[consumed];
  scale_ = s[consumed + 1];
}

void AltModel::save_json(const std::string& path) const {
  json j;
  j["version"] = 1;
  j["config"] = json::parse(cfg_.to_json_text());
  j["state"] = state();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out << j.dump();
}

AltModel AltModel::load_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  json j = json::parse(in);
  if (j.at("version").get<int>() != 1)
    throw DataError("unsupported checkpoint version");
  ModelConfig cfg = ModelConfig::from_json_text(j.at("config").dump());
  AltModel m(cfg, 0);
  m.set_state(j.at("state").get<std::vector<double>>());
  return m;
}

}  // namespace alt::nn
