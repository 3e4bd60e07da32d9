#include "alt/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "alt/simd/kernels.hpp"
#include "alt/util/errors.hpp"

namespace alt::nn {
namespace {

void check_rank4(const Tensor& x, int channels, const char* who) {
  if (x.rank() != 4)
    throw ConfigError(std::string(who) + ": expected a rank-4 input");
  if (x.shape[1] != static_cast<std::size_t>(channels))
    throw ConfigError(std::string(who) + ": channel mismatch, got " +
                      std::to_string(x.shape[1]) + " expected " +
                      std::to_string(channels));
}

int out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

void init_normal(std::vector<double>& w, double stddev, Rng& rng) {
  for (auto& x : w) x = rng.normal(0.0, stddev);
}

// Patch matrix: rows are (ci,kh,kw) taps, columns output positions.
void im2col(const double* x, int c, int h, int w, int k, int stride, int pad,
            int ho, int wo, double* col) {
  int o = ho * wo;
  int q = 0;
  for (int ci = 0; ci < c; ++ci) {
    const double* xc = x + static_cast<std::size_t>(ci) * h * w;
    for (int kh = 0; kh < k; ++kh) {
      for (int kw = 0; kw < k; ++kw, ++q) {
        double* dst = col + static_cast<std::size_t>(q) * o;
        for (int oy = 0; oy < ho; ++oy) {
          int iy = oy * stride - pad + kh;
          double* drow = dst + static_cast<std::size_t>(oy) * wo;
          if (iy < 0 || iy >= h) {
            std::fill(drow, drow + wo, 0.0);
            continue;
          }
          const double* xrow = xc + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            int ix = ox * stride - pad + kw;
            drow[ox] = (ix >= 0 && ix < w) ? xrow[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, int c, int h, int w, int k, int stride,
                int pad, int ho, int wo, double* gx) {
  int o = ho * wo;
  int q = 0;
  for (int ci = 0; ci < c; ++ci) {
    double* xc = gx + static_cast<std::size_t>(ci) * h * w;
    for (int kh = 0; kh < k; ++kh) {
      for (int kw = 0; kw < k; ++kw, ++q) {
        const double* src = col + static_cast<std::size_t>(q) * o;
        for (int oy = 0; oy < ho; ++oy) {
          int iy = oy * stride - pad + kh;
          if (iy < 0 || iy >= h) continue;
          double* xrow = xc + static_cast<std::size_t>(iy) * w;
          const double* srow = src + static_cast<std::size_t>(oy) * wo;
          for (int ox = 0; ox < wo; ++ox) {
            int ix = ox * stride - pad + kw;
            if (ix >= 0 && ix < w) xrow[ix] += srow[ox];
          }
        }
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int cin, int cout, int k, int stride, bool bias, Rng& rng)
    : cin_(cin), cout_(cout), k_(k), stride_(stride), pad_((k - 1) / 2),
      bias_(bias) {
  if (cin < 1 || cout < 1 || k < 1 || stride < 1)
    throw ConfigError("Conv2d: invalid hyperparameters");
  std::size_t nw = static_cast<std::size_t>(cout) * cin * k * k;
  w_.resize(nw);
  gw_.assign(nw, 0.0);
  init_normal(w_, std::sqrt(2.0 / (cin * k * k)), rng);
  if (bias_) {
    b_.assign(static_cast<std::size_t>(cout), 0.0);
    gb_.assign(b_.size(), 0.0);
  }
}

Tensor Conv2d::forward(const Tensor& x, bool) {
  check_rank4(x, cin_, "Conv2d");
  x_ = x;
  int n = static_cast<int>(x.shape[0]);
  int h = static_cast<int>(x.shape[2]);
  int w = static_cast<int>(x.shape[3]);
  int ho = out_dim(h, k_, stride_, pad_);
  int wo = out_dim(w, k_, stride_, pad_);
  if (ho < 1 || wo < 1) throw ConfigError("Conv2d: output would be empty");
  int q = cin_ * k_ * k_;
  int o = ho * wo;
  Tensor y({static_cast<std::size_t>(n), static_cast<std::size_t>(cout_),
            static_cast<std::size_t>(ho), static_cast<std::size_t>(wo)});
  std::vector<double> col(static_cast<std::size_t>(q) * o);
  for (int s = 0; s < n; ++s) {
    const double* xs = x.v.data() + static_cast<std::size_t>(s) * cin_ * h * w;
    im2col(xs, cin_, h, w, k_, stride_, pad_, ho, wo, col.data());
    for (int co = 0; co < cout_; ++co) {
      double* yr = y.v.data() +
                   (static_cast<std::size_t>(s) * cout_ + co) * o;
      if (bias_) std::fill(yr, yr + o, b_[static_cast<std::size_t>(co)]);
      const double* wr = w_.data() + static_cast<std::size_t>(co) * q;
      for (int j = 0; j < q; ++j)
        simd::axpy(yr, col.data() + static_cast<std::size_t>(j) * o, wr[j],
                   static_cast<std::size_t>(o));
    }
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& g) {
  int n = static_cast<int>(x_.shape[0]);
  int h = static_cast<int>(x_.shape[2]);
  int w = static_cast<int>(x_.shape[3]);
  int ho = static_cast<int>(g.shape[2]);
  int wo = static_cast<int>(g.shape[3]);
  int q = cin_ * k_ * k_;
  int o = ho * wo;
  Tensor gx(x_.shape);
  std::vector<double> col(static_cast<std::size_t>(q) * o);
  std::vector<double> gcol(static_cast<std::size_t>(q) * o);
  for (int s = 0; s < n; ++s) {
    const double* xs = x_.v.data() + static_cast<std::size_t>(s) * cin_ * h * w;
    im2col(xs, cin_, h, w, k_, stride_, pad_, ho, wo, col.data());
    std::fill(gcol.begin(), gcol.end(), 0.0);
    for (int co = 0; co < cout_; ++co) {
      const double* gr = g.v.data() +
                         (static_cast<std::size_t>(s) * cout_ + co) * o;
      if (bias_)
        gb_[static_cast<std::size_t>(co)] +=
            simd::sum(gr, static_cast<std::size_t>(o));
      double* gwr = gw_.data() + static_cast<std::size_t>(co) * q;
      const double* wr = w_.data() + static_cast<std::size_t>(co) * q;
      for (int j = 0; j < q; ++j) {
        gwr[j] += simd::dot(gr, col.data() + static_cast<std::size_t>(j) * o,
                            static_cast<std::size_t>(o));
        simd::axpy(gcol.data() + static_cast<std::size_t>(j) * o, gr, wr[j],
                   static_cast<std::size_t>(o));
      }
    }
    col2im_add(gcol.data(), cin_, h, w, k_, stride_, pad_, ho, wo,
               gx.v.data() + static_cast<std::size_t>(s) * cin_ * h * w);
  }
  return gx;
}

std::vector<ParamRef> Conv2d::params() {
  std::vector<ParamRef> p{{w_.data(), gw_.data(), w_.size()}};
  if (bias_) p.push_back({b_.data(), gb_.data(), b_.size()});
  return p;
}

void Conv2d::save_state(std::vector<double>& out) const {
  out.insert(out.end(), w_.begin(), w_.end());
  out.insert(out.end(), b_.begin(), b_.end());
}

void Conv2d::load_state(const double*& p) {
  std::copy(p, p + w_.size(), w_.begin());
  p += w_.size();
  std::copy(p, p + b_.size(), b_.begin());
  p += b_.size();
}

// ------------------------------------------------------- DepthwiseConv2d

DepthwiseConv2d::DepthwiseConv2d(int channels, int k, int stride, Rng& rng)
    : c_(channels), k_(k), stride_(stride), pad_((k - 1) / 2) {
  if (channels < 1 || k < 1 || stride < 1)
    throw ConfigError("DepthwiseConv2d: invalid hyperparameters");
  w_.resize(static_cast<std::size_t>(channels) * k * k);
  gw_.assign(w_.size(), 0.0);
  init_normal(w_, std::sqrt(2.0 / (k * k)), rng);
}

Tensor DepthwiseConv2d::forward(const Tensor& x, bool) {
  check_rank4(x, c_, "DepthwiseConv2d");
  x_ = x;
  int n = static_cast<int>(x.shape[0]);
  int h = static_cast<int>(x.shape[2]);
  int w = static_cast<int>(x.shape[3]);
  int ho = out_dim(h, k_, stride_, pad_);
  int wo = out_dim(w, k_, stride_, pad_);
  if (ho < 1 || wo < 1)
    throw ConfigError("DepthwiseConv2d: output would be empty");
  int q = k_ * k_;
  int o = ho * wo;
  Tensor y({static_cast<std::size_t>(n), static_cast<std::size_t>(c_),
            static_cast<std::size_t>(ho), static_cast<std::size_t>(wo)});
  std::vector<double> col(static_cast<std::size_t>(q) * o);
  for (int s = 0; s < n; ++s) {
    for (int c = 0; c < c_; ++c) {
      const double* xs = x.v.data() +
                         (static_cast<std::size_t>(s) * c_ + c) * h * w;
      im2col(xs, 1, h, w, k_, stride_, pad_, ho, wo, col.data());
      double* yr = y.v.data() + (static_cast<std::size_t>(s) * c_ + c) * o;
      const double* wr = w_.data() + static_cast<std::size_t>(c) * q;
      for (int j = 0; j < q; ++j)
        simd::axpy(yr, col.data() + static_cast<std::size_t>(j) * o, wr[j],
                   static_cast<std::size_t>(o));
    }
  }
  return y;
}

Tensor DepthwiseConv2d::backward(const Tensor& g) {
  int n = static_cast<int>(x_.shape[0]);
  int h = static_cast<int>(x_.shape[2]);
  int w = static_cast<int>(x_.shape[3]);
  int ho = static_cast<int>(g.shape[2]);
  int wo = static_cast<int>(g.shape[3]);
  int q = k_ * k_;
  int o = ho * wo;
  Tensor gx(x_.shape);
  std::vector<double> col(static_cast<std::size_t>(q) * o);
  std::vector<double> gcol(static_cast<std::size_t>(q) * o);
  for (int s = 0; s < n; ++s) {
    for (int c = 0; c < c_; ++c) {
      const double* xs = x_.v.data() +
                         (static_cast<std::size_t>(s) * c_ + c) * h * w;
      im2col(xs, 1, h, w, k_, stride_, pad_, ho, wo, col.data());
      const double* gr = g.v.data() + (static_cast<std::size_t>(s) * c_ + c) * o;
      double* gwr = gw_.data() + static_cast<std::size_t>(c) * q;
      const double* wr = w_.data() + static_cast<std::size_t>(c) * q;
      std::fill(gcol.begin(), gcol.end(), 0.0);
      for (int j = 0; j < q; ++j) {
        gwr[j] += simd::dot(gr, col.data() + static_cast<std::size_t>(j) * o,
                            static_cast<std::size_t>(o));
        simd::axpy(gcol.data() + static_cast<std::size_t>(j) * o, gr, wr[j],
                   static_cast<std::size_t>(o));
      }
      col2im_add(gcol.data(), 1, h, w, k_, stride_, pad_, ho, wo,
                 gx.v.data() + (static_cast<std::size_t>(s) * c_ + c) * h * w);
    }
  }
  return gx;
}

std::vector<ParamRef> DepthwiseConv2d::params() {
  return {{w_.data(), gw_.data(), w_.size()}};
}

void DepthwiseConv2d::save_state(std::vector<double>& out) const {
  out.insert(out.end(), w_.begin(), w_.end());
}

void DepthwiseConv2d::load_state(const double*& p) {
  std::copy(p, p + w_.size(), w_.begin());
  p += w_.size();
}

// ------------------------------------------------------- PointwiseConv2d

PointwiseConv2d::PointwiseConv2d(int cin, int cout, bool bias, Rng& rng)
    : cin_(cin), cout_(cout), bias_(bias) {
  if (cin < 1 || cout < 1)
    throw ConfigError("PointwiseConv2d: invalid channels");
  w_.resize(static_cast<std::size_t>(cout) * cin);
  gw_.assign(w_.size(), 0.0);
  init_normal(w_, std::sqrt(2.0 / cin), rng);
  if (bias_) {
    b_.assign(static_cast<std::size_t>(cout), 0.0);
    gb_.assign(b_.size(), 0.0);
  }
}

Tensor PointwiseConv2d::forward(const Tensor& x, bool) {
  check_rank4(x, cin_, "PointwiseConv2d");
  x_ = x;
  int n = static_cast<int>(x.shape[0]);
  std::size_t o = x.shape[2] * x.shape[3];
  Tensor y({x.shape[0], static_cast<std::size_t>(cout_), x.shape[2],
            x.shape[3]});
  for (int s = 0; s < n; ++s) {
    const double* xs = x.v.data() + static_cast<std::size_t>(s) * cin_ * o;
    double* ys = y.v.data() + static_cast<std::size_t>(s) * cout_ * o;
    for (int co = 0; co < cout_; ++co) {
      double* yr = ys + static_cast<std::size_t>(co) * o;
      if (bias_) std::fill(yr, yr + o, b_[static_cast<std::size_t>(co)]);
      const double* wr = w_.data() + static_cast<std::size_t>(co) * cin_;
      for (int ci = 0; ci < cin_; ++ci)
        simd::axpy(yr, xs + static_cast<std::size_t>(ci) * o, wr[ci], o);
    }
  }
  return y;
}

Tensor PointwiseConv2d::backward(const Tensor& g) {
  int n = static_cast<int>(x_.shape[0]);
  std::size_t o = x_.shape[2] * x_.shape[3];
  Tensor gx(x_.shape);
  for (int s = 0; s < n; ++s) {
    const double* xs = x_.v.data() + static_cast<std::size_t>(s) * cin_ * o;
    const double* gs = g.v.data() + static_cast<std::size_t>(s) * cout_ * o;
    double* gxs = gx.v.data() + static_cast<std::size_t>(s) * cin_ * o;
    for (int co = 0; co < cout_; ++co) {
      const double* gr = gs + static_cast<std::size_t>(co) * o;
      if (bias_) gb_[static_cast<std::size_t>(co)] += simd::sum(gr, o);
      double* gwr = gw_.data() + static_cast<std::size_t>(co) * cin_;
      const double* wr = w_.data() + static_cast<std::size_t>(co) * cin_;
      for (int ci = 0; ci < cin_; ++ci) {
        gwr[ci] += simd::dot(gr, xs + static_cast<std::size_t>(ci) * o, o);
        simd::axpy(gxs + static_cast<std::size_t>(ci) * o, gr, wr[ci], o);
      }
    }
  }
  return gx;
}

std::vector<ParamRef> PointwiseConv2d::params() {
  std::vector<ParamRef> p{{w_.data(), gw_.data(), w_.size()}};
  if (bias_) p.push_back({b_.data(), gb_.data(), b_.size()});
  return p;
}

void PointwiseConv2d::save_state(std::vector<double>& out) const {
  out.insert(out.end(), w_.begin(), w_.end());
  out.insert(out.end(), b_.begin(), b_.end());
}

void PointwiseConv2d::load_state(const double*& p) {
  std::copy(p, p + w_.size(), w_.begin());
  p += w_.size();
  std::copy(p, p + b_.size(), b_.begin());
  p += b_.size();
}

// ------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(int channels, double eps, double momentum)
    : c_(channels), eps_(eps), momentum_(momentum) {
  auto n = static_cast<std::size_t>(channels);
  gamma_.assign(n, 1.0);
  beta_.assign(n, 0.0);
  ggamma_.assign(n, 0.0);
  gbeta_.assign(n, 0.0);
  run_mean_.assign(n, 0.0);
  run_var_.assign(n, 1.0);
  inv_std_.assign(n, 1.0);
}

Tensor BatchNorm::forward(const Tensor& x, bool train) {
  if (x.rank() != 4 && x.rank() != 2)
    throw ConfigError("BatchNorm: expected rank-2 or rank-4 input");
  if (x.shape[1] != static_cast<std::size_t>(c_))
    throw ConfigError("BatchNorm: channel mismatch");
  std::size_t n = x.shape[0];
  spatial_ = x.rank() == 4 ? x.shape[2] * x.shape[3] : 1;
  double m = static_cast<double>(n * spatial_);
  last_train_ = train;
  Tensor y(x.shape);
  xhat_ = Tensor(x.shape);
  for (int c = 0; c < c_; ++c) {
    auto cc = static_cast<std::size_t>(c);
    double mu, var;
    if (train) {
      double s = 0.0, sq = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const double* blk = x.v.data() + (b * c_ + cc) * spatial_;
        s += simd::sum(blk, spatial_);
      }
      mu = s / m;
      for (std::size_t b = 0; b < n; ++b) {
        const double* blk = x.v.data() + (b * c_ + cc) * spatial_;
        sq += simd::sumsq_diff(blk, mu, spatial_);
      }
      var = sq / m;
      run_mean_[cc] = (1.0 - momentum_) * run_mean_[cc] + momentum_ * mu;
      double unbiased = m > 1.0 ? var * m / (m - 1.0) : var;
      run_var_[cc] = (1.0 - momentum_) * run_var_[cc] + momentum_ * unbiased;
    } else {
      mu = run_mean_[cc];
      var = run_var_[cc];
    }
    double is = 1.0 / std::sqrt(var + eps_);
    inv_std_[cc] = is;
    for (std::size_t b = 0; b < n; ++b) {
      const double* blk = x.v.data() + (b * c_ + cc) * spatial_;
      double* xh = xhat_.v.data() + (b * c_ + cc) * spatial_;
      double* yr = y.v.data() + (b * c_ + cc) * spatial_;
      for (std::size_t i = 0; i < spatial_; ++i) {
        xh[i] = (blk[i] - mu) * is;
        yr[i] = gamma_[cc] * xh[i] + beta_[cc];
      }
    }
  }
  return y;
}

Tensor BatchNorm::backward(const Tensor& g) {
  std::size_t n = g.shape[0];
  double m = static_cast<double>(n * spatial_);
  Tensor gx(g.shape);
  for (int c = 0; c < c_; ++c) {
    auto cc = static_cast<std::size_t>(c);
    double sg = 0.0, sgx = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      const double* gr = g.v.data() + (b * c_ + cc) * spatial_;
      const double* xh = xhat_.v.data() + (b * c_ + cc) * spatial_;
      sg += simd::sum(gr, spatial_);
      sgx += simd::dot(gr, xh, spatial_);
    }
    ggamma_[cc] += sgx;
    gbeta_[cc] += sg;
    double gis = gamma_[cc] * inv_std_[cc];
    for (std::size_t b = 0; b < n; ++b) {
      const double* gr = g.v.data() + (b * c_ + cc) * spatial_;
      const double* xh = xhat_.v.data() + (b * c_ + cc) * spatial_;
      double* gxr = gx.v.data() + (b * c_ + cc) * spatial_;
      if (last_train_) {
        for (std::size_t i = 0; i < spatial_; ++i)
          gxr[i] = gis * (gr[i] - (sg + xh[i] * sgx) / m);
      } else {
        for (std::size_t i = 0; i < spatial_; ++i) gxr[i] = gis * gr[i];
      }
    }
  }
  return gx;
}

std::vector<ParamRef> BatchNorm::params() {
  return {{gamma_.data(), ggamma_.data(), gamma_.size()},
          {beta_.data(), gbeta_.data(), beta_.size()}};
}

void BatchNorm::save_state(std::vector<double>& out) const {
  out.insert(out.end(), gamma_.begin(), gamma_.end());
  out.insert(out.end(), beta_.begin(), beta_.end());
  out.insert(out.end(), run_mean_.begin(), run_mean_.end());
  out.insert(out.end(), run_var_.begin(), run_var_.end());
}

void BatchNorm::load_state(const double*& p) {
  for (auto* vec : {&gamma_, &beta_, &run_mean_, &run_var_}) {
    std::copy(p, p + vec->size(), vec->begin());
    p += vec->size();
  }
}

// ---------------------------------------------------------------- Linear

Linear::Linear(int in, int out, bool bias, Rng& rng)
    : in_(in), out_(out), bias_(bias) {
  if (in < 1 || out < 1) throw ConfigError("Linear: invalid dimensions");
  w_.resize(static_cast<std::size_t>(out) * in);
  gw_.assign(w_.size(), 0.0);
  init_normal(w_, std::sqrt(2.0 / in), rng);
  if (bias_) {
    b_.assign(static_cast<std::size_t>(out), 0.0);
    gb_.assign(b_.size(), 0.0);
  }
}

Tensor Linear::forward(const Tensor& x, bool) {
  if (x.rank() != 2 || x.shape[1] != static_cast<std::size_t>(in_))
    throw ConfigError("Linear: expected (N," + std::to_string(in_) +
                      ") input, got feature width " +
                      (x.rank() == 2 ? std::to_string(x.shape[1]) : "?"));
  x_ = x;
  std::size_t n = x.shape[0];
  Tensor y({n, static_cast<std::size_t>(out_)});
  for (std::size_t s = 0; s < n; ++s) {
    const double* xs = x.v.data() + s * in_;
    double* ys = y.v.data() + s * out_;
    for (int o = 0; o < out_; ++o) {
      double acc = bias_ ? b_[static_cast<std::size_t>(o)] : 0.0;
      ys[o] = acc + simd::dot(w_.data() + static_cast<std::size_t>(o) * in_,
                              xs, static_cast<std::size_t>(in_));
    }
  }
  return y;
}

Tensor Linear::backward(const Tensor& g) {
  std::size_t n = x_.shape[0];
  Tensor gx(x_.shape);
  for (std::size_t s = 0; s < n; ++s) {
    const double* xs = x_.v.data() + s * in_;
    const double* gs = g.v.data() + s * out_;
    double* gxs = gx.v.data() + s * in_;
    for (int o = 0; o < out_; ++o) {
      double go = gs[o];
      if (go == 0.0) continue;
      if (bias_) gb_[static_cast<std::size_t>(o)] += go;
      simd::axpy(gw_.data() + static_cast<std::size_t>(o) * in_, xs, go,
                 static_cast<std::size_t>(in_));
      simd::axpy(gxs, w_.data() + static_cast<std::size_t>(o) * in_, go,
                 static_cast<std::size_t>(in_));
    }
  }
  return gx;
}

std::vector<ParamRef> Linear::params() {
  std::vector<ParamRef> p{{w_.data(), gw_.data(), w_.size()}};
  if (bias_) p.push_back({b_.data(), gb_.data(), b_.size()});
  return p;
}

void Linear::save_state(std::vector<double>& out) const {
  out.insert(out.end(), w_.begin(), w_.end());
  out.insert(out.end(), b_.begin(), b_.end());
}

void Linear::load_state(const double*& p) {
  std::copy(p, p + w_.size(), w_.begin());
  p += w_.size();
  std::copy(p, p + b_.size(), b_.begin());
  p += b_.size();
}

// ----------------------------------------------------------- activations

Tensor LeakyReLU::forward(const Tensor& x, bool) {
  x_ = x;
  Tensor y(x.shape);
  for (std::size_t i = 0; i < x.v.size(); ++i)
    y.v[i] = x.v[i] > 0.0 ? x.v[i] : slope_ * x.v[i];
  return y;
}

Tensor LeakyReLU::backward(const Tensor& g) {
  Tensor gx(g.shape);
  for (std::size_t i = 0; i < g.v.size(); ++i)
    gx.v[i] = g.v[i] * (x_.v[i] > 0.0 ? 1.0 : slope_);
  return gx;
}

Tensor ReLU6::forward(const Tensor& x, bool) {
  x_ = x;
  Tensor y(x.shape);
  for (std::size_t i = 0; i < x.v.size(); ++i)
    y.v[i] = std::min(std::max(x.v[i], 0.0), 6.0);
  return y;
}

Tensor ReLU6::backward(const Tensor& g) {
  Tensor gx(g.shape);
  for (std::size_t i = 0; i < g.v.size(); ++i)
    gx.v[i] = (x_.v[i] > 0.0 && x_.v[i] < 6.0) ? g.v[i] : 0.0;
  return gx;
}

Tensor Sigmoid::forward(const Tensor& x, bool) {
  Tensor y(x.shape);
  for (std::size_t i = 0; i < x.v.size(); ++i)
    y.v[i] = 1.0 / (1.0 + std::exp(-x.v[i]));
  y_ = y;
  return y;
}

Tensor Sigmoid::backward(const Tensor& g) {
  Tensor gx(g.shape);
  for (std::size_t i = 0; i < g.v.size(); ++i)
    gx.v[i] = g.v[i] * y_.v[i] * (1.0 - y_.v[i]);
  return gx;
}

Tensor Dropout::forward(const Tensor& x, bool train) {
  if (!train || rate_ <= 0.0) {
    identity_ = true;
    return x;
  }
  identity_ = false;
  double keep = 1.0 - rate_;
  if (!frozen_ || mask_.size() != x.v.size()) {
    mask_.resize(x.v.size());
    for (auto& m : mask_) m = rng_->bernoulli(keep) ? 1.0 / keep : 0.0;
  }
  Tensor y(x.shape);
  for (std::size_t i = 0; i < x.v.size(); ++i) y.v[i] = x.v[i] * mask_[i];
  return y;
}

Tensor Dropout::backward(const Tensor& g) {
  if (identity_) return g;
  Tensor gx(g.shape);
  for (std::size_t i = 0; i < g.v.size(); ++i) gx.v[i] = g.v[i] * mask_[i];
  return gx;
}

// --------------------------------------------------------- GlobalAvgPool

Tensor GlobalAvgPool::forward(const Tensor& x, bool) {
  if (x.rank() != 4) throw ConfigError("GlobalAvgPool: expected rank-4 input");
  in_shape_ = x.shape;
  std::size_t n = x.shape[0], c = x.shape[1];
  std::size_t sp = x.shape[2] * x.shape[3];
  Tensor y({n, c});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch)
      y.v[b * c + ch] =
          simd::sum(x.v.data() + (b * c + ch) * sp, sp) /
          static_cast<double>(sp);
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& g) {
  std::size_t n = in_shape_[0], c = in_shape_[1];
  std::size_t sp = in_shape_[2] * in_shape_[3];
  Tensor gx(in_shape_);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch) {
      double v = g.v[b * c + ch] / static_cast<double>(sp);
      double* blk = gx.v.data() + (b * c + ch) * sp;
      std::fill(blk, blk + sp, v);
    }
  return gx;
}

// ------------------------------------------------------------ Sequential

Tensor Sequential::forward(const Tensor& x, bool train) {
  Tensor cur = x;
  for (auto& l : layers_) cur = l->forward(cur, train);
  return cur;
}

Tensor Sequential::backward(const Tensor& g) {
  Tensor cur = g;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
    cur = (*it)->backward(cur);
  return cur;
}

std::vector<ParamRef> Sequential::params() {
  std::vector<ParamRef> out;
  for (auto& l : layers_)
    for (auto& p : l->params()) out.push_back(p);
  return out;
}

void Sequential::save_state(std::vector<double>& out) const {
  for (const auto& l : layers_) l->save_state(out);
}

void Sequential::load_state(const double*& p) {
  for (auto& l : layers_) l->load_state(p);
}

// ------------------------------------------------------ InvertedResidual

InvertedResidual::InvertedResidual(int cin, int cout, int stride,
                                   int expansion, int k, Rng& rng) {
  if (stride != 1 && stride != 2)
    throw ConfigError("InvertedResidual: stride must be 1 or 2");
  if (expansion < 1) throw ConfigError("InvertedResidual: expansion < 1");
  skip_ = stride == 1 && cin == cout;
  int mid = cin * expansion;
  if (expansion > 1) {
    inner_.add(std::make_unique<PointwiseConv2d>(cin, mid, false, rng));
    inner_.add(std::make_unique<BatchNorm>(mid));
    inner_.add(std::make_unique<ReLU6>());
  }
  inner_.add(std::make_unique<DepthwiseConv2d>(mid, k, stride, rng));
  inner_.add(std::make_unique<BatchNorm>(mid));
  inner_.add(std::make_unique<ReLU6>());
  inner_.add(std::make_unique<PointwiseConv2d>(mid, cout, false, rng));
  inner_.add(std::make_unique<BatchNorm>(cout));
}

Tensor InvertedResidual::forward(const Tensor& x, bool train) {
  if (skip_) x_ = x;
  Tensor y = inner_.forward(x, train);
  if (skip_)
    for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] += x_.v[i];
  return y;
}

Tensor InvertedResidual::backward(const Tensor& g) {
  Tensor gx = inner_.backward(g);
  if (skip_)
    for (std::size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += g.v[i];
  return gx;
}

std::vector<ParamRef> InvertedResidual::params() { return inner_.params(); }

void InvertedResidual::save_state(std::vector<double>& out) const {
  inner_.save_state(out);
}

void InvertedResidual::load_state(const double*& p) { inner_.load_state(p); }

}  // namespace alt::nn
