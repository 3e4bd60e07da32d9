#include "alt/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "alt/simd/kernels.hpp"
#include "alt/util/errors.hpp"
#include "alt/util/rng.hpp"

namespace alt::nn {
namespace {

// Batch tensors from view positions [from, to).
void make_batch(const DataView& view, std::size_t from, std::size_t to,
                Tensor& image, Tensor& tabular, Tensor& holding,
                std::vector<double>& labels) {
  std::size_t n = to - from;
  const auto& first_img = (*view.images)[view.indices[from]];
  auto h = static_cast<std::size_t>(first_img.height);
  auto w = static_cast<std::size_t>(first_img.width);
  image = Tensor({n, 3, h, w});
  tabular = Tensor({n, static_cast<std::size_t>(dataset::kTabularDim)});
  holding = Tensor({n, static_cast<std::size_t>(dataset::kHoldingDim)});
  labels.resize(n);
  for (std::size_t b = 0; b < n; ++b) {
    std::size_t idx = view.indices[from + b];
    const auto& img = (*view.images)[idx];
    const auto& s = (*view.samples)[idx];
    double* dst = image.v.data() + b * 3 * h * w;
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
          dst[c * h * w + y * w + x] =
              static_cast<double>(img.rgb[(y * w + x) * 3 + c]) / 255.0;
    for (int f = 0; f < dataset::kTabularDim; ++f)
      tabular.v[b * dataset::kTabularDim + static_cast<std::size_t>(f)] =
          s.tabular[static_cast<std::size_t>(f)];
    for (int f = 0; f < dataset::kHoldingDim; ++f)
      holding.v[b * dataset::kHoldingDim + static_cast<std::size_t>(f)] =
          s.holding_vec[static_cast<std::size_t>(f)];
    labels[b] = s.label_seconds;
  }
}

double eval_mae(AltModel& model, const DataView& view, int batch) {
  if (view.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  double abs_sum = 0.0;
  Tensor img, tab, hold;
  std::vector<double> labels;
  for (std::size_t from = 0; from < view.size();
       from += static_cast<std::size_t>(batch)) {
    std::size_t to = std::min(view.size(), from + static_cast<std::size_t>(batch));
    make_batch(view, from, to, img, tab, hold, labels);
    Tensor pred = model.forward(img, tab, hold, false);
    abs_sum += simd::abs_diff_sum(pred.v.data(), labels.data(), labels.size());
  }
  return abs_sum / static_cast<double>(view.size());
}

}  // namespace

Adam::Adam(std::vector<ParamRef> params, double lr, double beta1, double beta2,
           double eps)
    : refs_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
  m_.reserve(refs_.size());
  v_.reserve(refs_.size());
  for (const auto& r : refs_) {
    m_.emplace_back(r.n, 0.0);
    v_.emplace_back(r.n, 0.0);
  }
}

void Adam::step() {
  ++t_;
  double c1 = 1.0 / (1.0 - std::pow(b1_, t_));
  double c2 = 1.0 / (1.0 - std::pow(b2_, t_));
  for (std::size_t i = 0; i < refs_.size(); ++i)
    simd::adam_step(refs_[i].value, refs_[i].grad, m_[i].data(), v_[i].data(),
                    refs_[i].n, lr_, b1_, b2_, eps_, c1, c2);
}

void Adam::zero_grad() {
  for (auto& r : refs_) std::fill(r.grad, r.grad + r.n, 0.0);
}

std::vector<double> labels_of(const DataView& view) {
  std::vector<double> out;
  out.reserve(view.size());
  for (std::size_t idx : view.indices)
    out.push_back((*view.samples)[idx].label_seconds);
  return out;
}

TrainHistory train(AltModel& model, const DataView& train_set,
                   const DataView& val_set, const TrainHyper& hyper) {
  if (train_set.size() == 0 || val_set.size() == 0)
    throw DataError("training needs non-empty train and validation sets");
  if (hyper.batch < 1 || hyper.epochs < 0)
    throw ConfigError("invalid batch size or epoch count");

  if (hyper.calibrate_output) {
    std::vector<double> y = labels_of(train_set);
    double mean = simd::sum(y.data(), y.size()) / static_cast<double>(y.size());
    double var = simd::sumsq_diff(y.data(), mean, y.size()) /
                 static_cast<double>(y.size());
    double sd = std::sqrt(var);
    model.set_output_calibration(mean, sd > 1.0 ? sd : 1.0);
  }

  Adam opt(model.params(), hyper.lr);
  Rng rng(Rng::splitmix(hyper.seed ^ 0x747261696eULL));
  TrainHistory hist;
  std::vector<double> best_state;

  std::vector<std::size_t> order = train_set.indices;
  DataView shuffled = train_set;
  Tensor img, tab, hold;
  std::vector<double> labels;

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    opt.set_lr(hyper.lr * std::pow(hyper.lr_decay, epoch));
    rng.shuffle(order);
    shuffled.indices = order;
    double abs_sum = 0.0;
    for (std::size_t from = 0; from < shuffled.size();
         from += static_cast<std::size_t>(hyper.batch)) {
      std::size_t to =
          std::min(shuffled.size(), from + static_cast<std::size_t>(hyper.batch));
      make_batch(shuffled, from, to, img, tab, hold, labels);
      std::size_t n = to - from;

      opt.zero_grad();
      Tensor pred = model.forward(img, tab, hold, true);
      double batch_abs =
          simd::abs_diff_sum(pred.v.data(), labels.data(), n);
      if (!std::isfinite(batch_abs))
        throw TrainError("training diverged (non-finite loss) at epoch " +
                         std::to_string(epoch));
      abs_sum += batch_abs;

      Tensor grad(pred.shape);
      for (std::size_t i = 0; i < n; ++i) {
        double d = pred.v[i] - labels[i];
        grad.v[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) /
                    static_cast<double>(n);
      }
      model.backward(grad);
      opt.step();
    }
    hist.train_mae.push_back(abs_sum / static_cast<double>(shuffled.size()));
    double vm = eval_mae(model, val_set, hyper.batch);
    hist.val_mae.push_back(vm);
    if (vm < hist.best_val_mae) {
      hist.best_val_mae = vm;
      hist.best_epoch = epoch;
      best_state = model.state();
    }
    if (hyper.verbose)
      std::fprintf(stderr, "epoch %3d  train_mae %.3f  val_mae %.3f\n", epoch,
                   hist.train_mae.back(), vm);
  }
  if (!best_state.empty()) model.set_state(best_state);
  return hist;
}

std::vector<double> predict(AltModel& model, const DataView& view, int batch) {
  std::vector<double> out;
  out.reserve(view.size());
  Tensor img, tab, hold;
  std::vector<double> labels;
  for (std::size_t from = 0; from < view.size();
       from += static_cast<std::size_t>(batch)) {
    std::size_t to = std::min(view.size(), from + static_cast<std::size_t>(batch));
    make_batch(view, from, to, img, tab, hold, labels);
    Tensor pred = model.forward(img, tab, hold, false);
    out.insert(out.end(), pred.v.begin(), pred.v.end());
  }
  return out;
}

void write_history_csv(const TrainHistory& h, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write training log: " + path);
  out << "epoch,train_mae,val_mae\n";
  char buf[96];
  for (std::size_t e = 0; e < h.train_mae.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.6f\n", e, h.train_mae[e],
                  h.val_mae[e]);
    out << buf;
  }
}

}  // namespace alt::nn
