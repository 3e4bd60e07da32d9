#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "alt/dataset.hpp"
#include "alt/nn/model.hpp"
#include "alt/raster.hpp"

namespace alt::nn {

// Adam with bias correction over the model's parameter blocks.
class Adam {
 public:
  explicit Adam(std::vector<ParamRef> params, double lr = 0.001,
                double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step();
  void zero_grad();
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  int steps_taken() const { return t_; }

 private:
  std::vector<ParamRef> refs_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, b1_, b2_, eps_;
  int t_ = 0;
};

// Non-owning dataset view: feature rows plus their rendered images, with
// an index subset selecting the split.
struct DataView {
  const std::vector<dataset::ArrivalSample>* samples = nullptr;
  const std::vector<raster::ImageU8>* images = nullptr;
  std::vector<std::size_t> indices;

  std::size_t size() const { return indices.size(); }
};

struct TrainHyper {
  double lr = 0.001;
  int batch = 64;
  int epochs = 50;
  std::uint64_t seed = 0;
  double lr_decay = 1.0;          // per-epoch multiplier
  bool calibrate_output = true;   // init output at train-label mean/stddev
  bool verbose = false;
};

struct TrainHistory {
  std::vector<double> train_mae, val_mae;
  int best_epoch = -1;
  double best_val_mae = std::numeric_limits<double>::infinity();
};

// Mini-batch L1 training with Adam; deterministic for a given seed. The
// model is left holding the best-validation snapshot. Throws TrainError on
// non-finite loss.
TrainHistory train(AltModel& model, const DataView& train_set,
                   const DataView& val_set, const TrainHyper& hyper);

// Eval-mode predictions in seconds, in view order.
std::vector<double> predict(AltModel& model, const DataView& view,
                            int batch = 64);

std::vector<double> labels_of(const DataView& view);

void write_history_csv(const TrainHistory& h, const std::string& path);

}  // namespace alt::nn
