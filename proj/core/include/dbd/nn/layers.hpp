#pragma once

#include <Eigen/Core>
#include <cmath>

#include "dbd/nn/tensor.hpp"
#include "dbd/rng.hpp"

namespace dbd::nn {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatRM<T>>;
template <typename T>
using ConstMapRM = Eigen::Map<const MatRM<T>>;

/// 3x3 stride-1 pad-1 convolution without bias (normalization follows it).
template <typename T>
class Conv3x3 {
public:
  Conv3x3() = default;
  Conv3x3(std::string name, int in_channels, int out_channels)
      : in_channels_(in_channels), out_channels_(out_channels) {
    weight.name = std::move(name) + ".weight";
    weight.init_shape({out_channels, in_channels, 3, 3});
  }

  void init(Rng& rng) {
    const double std_dev = std::sqrt(2.0 / (9.0 * in_channels_));
    for (T& v : weight.value) v = static_cast<T>(rng.normal() * std_dev);
  }

  struct Cache {
    std::vector<T> cols;  // (ci*9) x (n*h*w), row-major
    int n = 0, h = 0, w = 0;
  };

  void forward(const Batch<T>& in, Batch<T>& out, Cache& cache) const {
    if (in.c != in_channels_) throw ContractError("conv input channel mismatch");
    const int n = in.n, h = in.h, w = in.w;
    const size_t cols_n = static_cast<size_t>(n) * h * w;
    const int rows = in_channels_ * 9;
    cache.n = n;
    cache.h = h;
    cache.w = w;
    cache.cols.assign(rows * cols_n, T(0));

    // im2col: row (c*9 + ky*3 + kx) holds the (ky-1, kx-1)-shifted plane.
    for (int c = 0; c < in_channels_; ++c) {
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          T* dst = cache.cols.data() + static_cast<size_t>(c * 9 + ky * 3 + kx) * cols_n;
          for (int in_i = 0; in_i < n; ++in_i) {
            const T* src = in.data.data() + (static_cast<size_t>(in_i) * in.c + c) * h * w;
            for (int y = 0; y < h; ++y) {
              const int sy = y + ky - 1;
              T* drow = dst + (static_cast<size_t>(in_i) * h + y) * w;
              if (sy < 0 || sy >= h) continue;  // zero padding already in place
              const T* srow = src + static_cast<size_t>(sy) * w;
              const int x0 = std::max(0, 1 - kx);
              const int x1 = std::min(w, w + 1 - kx);
              for (int x = x0; x < x1; ++x) drow[x] = srow[x + kx - 1];
            }
          }
        }
      }
    }

    out = Batch<T>(n, out_channels_, h, w);
    ConstMapRM<T> wmat(weight.value.data(), out_channels_, rows);
    ConstMapRM<T> cols(cache.cols.data(), rows, static_cast<Eigen::Index>(cols_n));
    // Column order is (sample, y, x), so each product row splits into
    // contiguous per-sample segments; the scatter restores NCHW.
    MatRM<T> prod = wmat * cols;
    for (int in_i = 0; in_i < n; ++in_i)
      for (int c = 0; c < out_channels_; ++c) {
        const T* src = prod.data() + static_cast<size_t>(c) * cols_n +
                       static_cast<size_t>(in_i) * h * w;
        T* dst = out.data.data() + (static_cast<size_t>(in_i) * out_channels_ + c) * h * w;
        std::copy(src, src + static_cast<size_t>(h) * w, dst);
      }
  }

  void backward(const Batch<T>& d_out, const Cache& cache, Batch<T>* d_in) {
    const int n = cache.n, h = cache.h, w = cache.w;
    const size_t cols_n = static_cast<size_t>(n) * h * w;
    const int rows = in_channels_ * 9;

    // Gather d_out into the (co x cols_n) layout used by the GEMMs.
    MatRM<T> dy(out_channels_, static_cast<Eigen::Index>(cols_n));
    for (int in_i = 0; in_i < n; ++in_i)
      for (int c = 0; c < out_channels_; ++c) {
        const T* src = d_out.data.data() + (static_cast<size_t>(in_i) * out_channels_ + c) * h * w;
        T* dst = dy.data() + static_cast<size_t>(c) * cols_n + static_cast<size_t>(in_i) * h * w;
        std::copy(src, src + static_cast<size_t>(h) * w, dst);
      }

    ConstMapRM<T> cols(cache.cols.data(), rows, static_cast<Eigen::Index>(cols_n));
    MapRM<T> dw(weight.grad.data(), out_channels_, rows);
    dw.noalias() += dy * cols.transpose();

    if (d_in == nullptr) return;
    ConstMapRM<T> wmat(weight.value.data(), out_channels_, rows);
    MatRM<T> dcols = wmat.transpose() * dy;

    *d_in = Batch<T>(n, in_channels_, h, w);
    for (int c = 0; c < in_channels_; ++c) {
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const T* src = dcols.data() + static_cast<size_t>(c * 9 + ky * 3 + kx) * cols_n;
          for (int in_i = 0; in_i < n; ++in_i) {
            T* dst = d_in->data.data() + (static_cast<size_t>(in_i) * in_channels_ + c) * h * w;
            for (int y = 0; y < h; ++y) {
              const int sy = y + ky - 1;
              if (sy < 0 || sy >= h) continue;
              const T* srow = src + (static_cast<size_t>(in_i) * h + y) * w;
              T* drow = dst + static_cast<size_t>(sy) * w;
              const int x0 = std::max(0, 1 - kx);
              const int x1 = std::min(w, w + 1 - kx);
              for (int x = x0; x < x1; ++x) drow[x + kx - 1] += srow[x];
            }
          }
        }
      }
    }
  }

  Param<T> weight;
  int in_channels() const { return in_channels_; }
  int out_channels() const { return out_channels_; }

private:
  int in_channels_ = 0;
  int out_channels_ = 0;
};

/// Channel-wise batch normalization. Train mode normalizes with batch
/// statistics and updates the running averages (unless updates are paused);
/// eval mode uses the stored running averages.
template <typename T>
class BatchNorm2d {
public:
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  BatchNorm2d() = default;
  BatchNorm2d(std::string name, int channels) : channels_(channels) {
    gamma.name = name + ".gamma";
    gamma.init_shape({channels});
    std::fill(gamma.value.begin(), gamma.value.end(), T(1));
    beta.name = name + ".beta";
    beta.init_shape({channels});
    running_mean.name = name + ".running_mean";
    running_mean.value.assign(channels, T(0));
    running_var.name = name + ".running_var";
    running_var.value.assign(channels, T(1));
  }

  struct Cache {
    std::vector<T> x_hat;
    std::vector<T> inv_std;  // per channel
    int n = 0, h = 0, w = 0;
  };

  void forward(const Batch<T>& in, Batch<T>& out, Cache& cache, bool train, bool update_stats) {
    if (in.c != channels_) throw ContractError("batchnorm channel mismatch");
    const size_t plane = in.plane();
    const size_t count = static_cast<size_t>(in.n) * plane;
    out = Batch<T>(in.n, in.c, in.h, in.w);
    cache.n = in.n;
    cache.h = in.h;
    cache.w = in.w;
    cache.x_hat.resize(in.size());
    cache.inv_std.resize(channels_);

    for (int c = 0; c < channels_; ++c) {
      double mean, var;
      if (train) {
        double sum = 0.0, sq = 0.0;
        for (int i = 0; i < in.n; ++i) {
          const T* src = in.data.data() + (static_cast<size_t>(i) * in.c + c) * plane;
          for (size_t p = 0; p < plane; ++p) {
            sum += static_cast<double>(src[p]);
            sq += static_cast<double>(src[p]) * static_cast<double>(src[p]);
          }
        }
        mean = sum / static_cast<double>(count);
        var = std::max(0.0, sq / static_cast<double>(count) - mean * mean);
        if (update_stats) {
          running_mean.value[c] = static_cast<T>((1.0 - kMomentum) *
                                                     static_cast<double>(running_mean.value[c]) +
                                                 kMomentum * mean);
          running_var.value[c] = static_cast<T>(
              (1.0 - kMomentum) * static_cast<double>(running_var.value[c]) + kMomentum * var);
        }
      } else {
        mean = static_cast<double>(running_mean.value[c]);
        var = static_cast<double>(running_var.value[c]);
      }
      const T inv_std = static_cast<T>(1.0 / std::sqrt(var + kEps));
      cache.inv_std[c] = inv_std;
      const T m = static_cast<T>(mean);
      const T g = gamma.value[c];
      const T b = beta.value[c];
      for (int i = 0; i < in.n; ++i) {
        const size_t base = (static_cast<size_t>(i) * in.c + c) * plane;
        for (size_t p = 0; p < plane; ++p) {
          const T xh = (in.data[base + p] - m) * inv_std;
          cache.x_hat[base + p] = xh;
          out.data[base + p] = g * xh + b;
        }
      }
    }
    train_cached_ = train;
  }

  void backward(const Batch<T>& d_out, const Cache& cache, Batch<T>* d_in) {
    const size_t plane = static_cast<size_t>(cache.h) * cache.w;
    const size_t count = static_cast<size_t>(cache.n) * plane;
    if (d_in != nullptr) *d_in = Batch<T>(cache.n, channels_, cache.h, cache.w);

    for (int c = 0; c < channels_; ++c) {
      double d_gamma = 0.0, d_beta = 0.0;
      for (int i = 0; i < cache.n; ++i) {
        const size_t base = (static_cast<size_t>(i) * channels_ + c) * plane;
        for (size_t p = 0; p < plane; ++p) {
          d_gamma += static_cast<double>(d_out.data[base + p]) *
                     static_cast<double>(cache.x_hat[base + p]);
          d_beta += static_cast<double>(d_out.data[base + p]);
        }
      }
      gamma.grad[c] += static_cast<T>(d_gamma);
      beta.grad[c] += static_cast<T>(d_beta);
      if (d_in == nullptr) continue;

      const double g = static_cast<double>(gamma.value[c]);
      const double inv_std = static_cast<double>(cache.inv_std[c]);
      if (train_cached_) {
        const double inv_count = 1.0 / static_cast<double>(count);
        for (int i = 0; i < cache.n; ++i) {
          const size_t base = (static_cast<size_t>(i) * channels_ + c) * plane;
          for (size_t p = 0; p < plane; ++p) {
            const double dxh = static_cast<double>(d_out.data[base + p]) * g;
            const double term = dxh - inv_count * d_beta * g -
                                static_cast<double>(cache.x_hat[base + p]) * inv_count * d_gamma * g;
            d_in->data[base + p] = static_cast<T>(term * inv_std);
          }
        }
      } else {
        for (int i = 0; i < cache.n; ++i) {
          const size_t base = (static_cast<size_t>(i) * channels_ + c) * plane;
          for (size_t p = 0; p < plane; ++p)
            d_in->data[base + p] =
                static_cast<T>(static_cast<double>(d_out.data[base + p]) * g * inv_std);
        }
      }
    }
  }

  Param<T> gamma, beta;
  Buffer<T> running_mean, running_var;

private:
  int channels_ = 0;
  bool train_cached_ = false;
};

template <typename T>
struct ReluCache {
  std::vector<unsigned char> mask;
};

template <typename T>
inline void relu_forward(Batch<T>& x, ReluCache<T>& cache) {
  cache.mask.resize(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    cache.mask[i] = x.data[i] > T(0);
    if (!cache.mask[i]) x.data[i] = T(0);
  }
}

template <typename T>
inline void relu_backward(Batch<T>& dx, const ReluCache<T>& cache) {
  for (size_t i = 0; i < dx.size(); ++i)
    if (!cache.mask[i]) dx.data[i] = T(0);
}

/// 2x2 stride-2 max pooling; gradient routes to the first maximal element.
template <typename T>
class MaxPool2d {
public:
  struct Cache {
    std::vector<unsigned char> argmax;  // 0..3, scan order (dy, dx)
    int n = 0, c = 0, h_in = 0, w_in = 0;
  };

  static void forward(const Batch<T>& in, Batch<T>& out, Cache& cache) {
    const int ho = in.h / 2, wo = in.w / 2;
    out = Batch<T>(in.n, in.c, ho, wo);
    cache.argmax.resize(out.size());
    cache.n = in.n;
    cache.c = in.c;
    cache.h_in = in.h;
    cache.w_in = in.w;
    size_t o = 0;
    for (int i = 0; i < in.n; ++i)
      for (int c = 0; c < in.c; ++c)
        for (int y = 0; y < ho; ++y)
          for (int x = 0; x < wo; ++x, ++o) {
            T best = in.at(i, c, 2 * y, 2 * x);
            unsigned char arg = 0;
            for (unsigned char k = 1; k < 4; ++k) {
              const T v = in.at(i, c, 2 * y + k / 2, 2 * x + k % 2);
              if (v > best) {
                best = v;
                arg = k;
              }
            }
            out.data[o] = best;
            cache.argmax[o] = arg;
          }
  }

  static void backward(const Batch<T>& d_out, const Cache& cache, Batch<T>& d_in) {
    d_in = Batch<T>(cache.n, cache.c, cache.h_in, cache.w_in);
    const int ho = cache.h_in / 2, wo = cache.w_in / 2;
    size_t o = 0;
    for (int i = 0; i < cache.n; ++i)
      for (int c = 0; c < cache.c; ++c)
        for (int y = 0; y < ho; ++y)
          for (int x = 0; x < wo; ++x, ++o) {
            const unsigned char k = cache.argmax[o];
            d_in.at(i, c, 2 * y + k / 2, 2 * x + k % 2) += d_out.data[o];
          }
  }
};

/// Mean over the spatial plane: NCHW -> N x C row-major matrix.
template <typename T>
struct GlobalAvgPool {
  struct Cache {
    int n = 0, c = 0, h = 0, w = 0;
  };

  static void forward(const Batch<T>& in, std::vector<T>& out, Cache& cache) {
    cache = {in.n, in.c, in.h, in.w};
    out.assign(static_cast<size_t>(in.n) * in.c, T(0));
    const size_t plane = in.plane();
    const T scale = T(1) / static_cast<T>(plane);
    for (int i = 0; i < in.n; ++i)
      for (int c = 0; c < in.c; ++c) {
        const T* src = in.data.data() + (static_cast<size_t>(i) * in.c + c) * plane;
        double acc = 0.0;
        for (size_t p = 0; p < plane; ++p) acc += static_cast<double>(src[p]);
        out[static_cast<size_t>(i) * in.c + c] = static_cast<T>(acc) * scale;
      }
  }

  static void backward(const std::vector<T>& d_out, const Cache& cache, Batch<T>& d_in) {
    d_in = Batch<T>(cache.n, cache.c, cache.h, cache.w);
    const size_t plane = static_cast<size_t>(cache.h) * cache.w;
    const T scale = T(1) / static_cast<T>(plane);
    for (int i = 0; i < cache.n; ++i)
      for (int c = 0; c < cache.c; ++c) {
        const T g = d_out[static_cast<size_t>(i) * cache.c + c] * scale;
        T* dst = d_in.data.data() + (static_cast<size_t>(i) * cache.c + c) * plane;
        for (size_t p = 0; p < plane; ++p) dst[p] += g;
      }
  }
};

/// Fully connected layer on row-major N x in matrices.
template <typename T>
class Linear {
public:
  Linear() = default;
  Linear(std::string name, int in_dim, int out_dim) : in_dim_(in_dim), out_dim_(out_dim) {
    weight.name = name + ".weight";
    weight.init_shape({out_dim, in_dim});
    bias.name = name + ".bias";
    bias.init_shape({out_dim});
  }

  void init(Rng& rng) {
    const double std_dev = std::sqrt(2.0 / in_dim_);
    for (T& v : weight.value) v = static_cast<T>(rng.normal() * std_dev);
    std::fill(bias.value.begin(), bias.value.end(), T(0));
  }

  struct Cache {
    std::vector<T> input;
    int n = 0;
  };

  void forward(const std::vector<T>& in, int n, std::vector<T>& out, Cache& cache) const {
    cache.input = in;
    cache.n = n;
    out.resize(static_cast<size_t>(n) * out_dim_);
    ConstMapRM<T> x(in.data(), n, in_dim_);
    ConstMapRM<T> wmat(weight.value.data(), out_dim_, in_dim_);
    MapRM<T> y(out.data(), n, out_dim_);
    y.noalias() = x * wmat.transpose();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < out_dim_; ++j) out[static_cast<size_t>(i) * out_dim_ + j] += bias.value[j];
  }

  void backward(const std::vector<T>& d_out, const Cache& cache, std::vector<T>* d_in) {
    const int n = cache.n;
    ConstMapRM<T> dy(d_out.data(), n, out_dim_);
    ConstMapRM<T> x(cache.input.data(), n, in_dim_);
    MapRM<T> dw(weight.grad.data(), out_dim_, in_dim_);
    dw.noalias() += dy.transpose() * x;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < out_dim_; ++j) bias.grad[j] += d_out[static_cast<size_t>(i) * out_dim_ + j];
    if (d_in != nullptr) {
      d_in->resize(static_cast<size_t>(n) * in_dim_);
      ConstMapRM<T> wmat(weight.value.data(), out_dim_, in_dim_);
      MapRM<T> dx(d_in->data(), n, in_dim_);
      dx.noalias() = dy * wmat;
    }
  }

  Param<T> weight, bias;
  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }

private:
  int in_dim_ = 0;
  int out_dim_ = 0;
};

}  // namespace dbd::nn
