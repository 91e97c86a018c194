#pragma once

#include <numeric>
#include <string>
#include <vector>

#include "dbd/errors.hpp"
#include "dbd/image.hpp"

namespace dbd::nn {

/// Dense NCHW activation block.
template <typename T>
struct Batch {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Batch() = default;
  Batch(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_), data(static_cast<size_t>(n_) * c_ * h_ * w_, T(0)) {}

  size_t size() const { return data.size(); }
  size_t plane() const { return static_cast<size_t>(h) * w; }
  size_t sample_stride() const { return static_cast<size_t>(c) * h * w; }

  T& at(int in, int ic, int iy, int ix) {
    return data[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
  }
  T at(int in, int ic, int iy, int ix) const {
    return data[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
  }

  void set_sample(int index, const Image& img) {
    if (img.channels != c || img.height != h || img.width != w)
      throw ContractError("image shape does not match batch shape");
    for (size_t j = 0; j < img.pixels.size(); ++j)
      data[index * sample_stride() + j] = static_cast<T>(img.pixels[j]);
  }
};

enum class ParamGroup { backbone, head };

/// Trainable array plus its gradient accumulator.
template <typename T>
struct Param {
  std::string name;
  ParamGroup group = ParamGroup::backbone;
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;

  void init_shape(std::vector<int> s) {
    shape = std::move(s);
    const size_t total = static_cast<size_t>(
        std::accumulate(shape.begin(), shape.end(), 1, std::multiplies<int>()));
    value.assign(total, T(0));
    grad.assign(total, T(0));
  }
  size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

/// Non-trained state carried by the model (normalization running averages).
template <typename T>
struct Buffer {
  std::string name;
  std::vector<T> value;
};

}  // namespace dbd::nn
