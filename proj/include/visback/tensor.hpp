#pragma once

// Dense channel x height x width tensors and the handful of kernels the
// steering network and the mask algorithm need. Everything is templated on
// the scalar type; the network itself runs in float.

#include <Eigen/Core>

#include <algorithm>
#include <cassert>
#include <span>
#include <string>
#include <vector>

#include "visback/error.hpp"

namespace visback {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Shape {
  int channels = 1;
  int height = 1;
  int width = 1;

  long size() const { return long(channels) * height * width; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

/// Rank-3 tensor, channel-major then row-major. All dimensions are >= 1.
template <typename Scalar>
class Tensor {
 public:
  using ChannelMap = Eigen::Map<RowMatrix<Scalar>>;
  using ConstChannelMap = Eigen::Map<const RowMatrix<Scalar>>;

  Tensor() : Tensor(1, 1, 1) {}

  Tensor(int channels, int height, int width, Scalar fill = Scalar(0))
      : shape_{channels, height, width} {
    if (channels < 1) throw ShapeError("channels", 1, channels, "Tensor");
    if (height < 1) throw ShapeError("height", 1, height, "Tensor");
    if (width < 1) throw ShapeError("width", 1, width, "Tensor");
    data_.setConstant(shape_.size(), fill);
  }

  explicit Tensor(const Shape& s, Scalar fill = Scalar(0)) : Tensor(s.channels, s.height, s.width, fill) {}

  Tensor(int channels, int height, int width, std::span<const Scalar> values) : Tensor(channels, height, width) {
    if (long(values.size()) != data_.size()) throw ShapeError("length", data_.size(), long(values.size()), "Tensor");
    std::copy(values.begin(), values.end(), data_.data());
  }

  int channels() const { return shape_.channels; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  const Shape& shape() const { return shape_; }
  long size() const { return data_.size(); }

  Scalar& operator()(int c, int y, int x) { return data_[index(c, y, x)]; }
  Scalar operator()(int c, int y, int x) const { return data_[index(c, y, x)]; }

  Vector<Scalar>& values() { return data_; }
  const Vector<Scalar>& values() const { return data_; }

  std::span<Scalar> span() { return {data_.data(), std::size_t(data_.size())}; }
  std::span<const Scalar> span() const { return {data_.data(), std::size_t(data_.size())}; }

  ChannelMap channel(int c) { return ChannelMap(data_.data() + long(c) * plane(), height(), width()); }
  ConstChannelMap channel(int c) const {
    return ConstChannelMap(data_.data() + long(c) * plane(), height(), width());
  }

  /// channels x (height*width) view, one row per channel.
  Eigen::Map<RowMatrix<Scalar>> planes() { return {data_.data(), channels(), plane()}; }
  Eigen::Map<const RowMatrix<Scalar>> planes() const { return {data_.data(), channels(), plane()}; }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out(shape_);
    out.values() = data_.template cast<Other>();
    return out;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  long plane() const { return long(shape_.height) * shape_.width; }
  long index(int c, int y, int x) const {
    assert(c >= 0 && c < shape_.channels && y >= 0 && y < shape_.height && x >= 0 && x < shape_.width);
    return (long(c) * shape_.height + y) * shape_.width + x;
  }

  Shape shape_;
  Vector<Scalar> data_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

struct ConvGeometry {
  int kernel_h = 1;
  int kernel_w = 1;
  int stride_h = 1;
  int stride_w = 1;
  int in_channels = 1;
  int out_channels = 1;

  long weight_count() const { return long(out_channels) * in_channels * kernel_h * kernel_w; }
  long patch_size() const { return long(in_channels) * kernel_h * kernel_w; }
};

/// Valid-padding output extent, or 0 when the kernel does not fit.
inline int conv_output_extent(int input, int kernel, int stride) {
  return input < kernel ? 0 : (input - kernel) / stride + 1;
}

/// Transposed-convolution extent before output padding.
inline int deconv_natural_extent(int input, int kernel, int stride) { return (input - 1) * stride + kernel; }

namespace detail {

inline void check_geometry(const ConvGeometry& g, const char* context) {
  if (g.kernel_h < 1) throw Error(ErrorCode::range, std::string(context) + ": kernel_h must be >= 1");
  if (g.kernel_w < 1) throw Error(ErrorCode::range, std::string(context) + ": kernel_w must be >= 1");
  if (g.stride_h < 1) throw Error(ErrorCode::range, std::string(context) + ": stride_h must be >= 1");
  if (g.stride_w < 1) throw Error(ErrorCode::range, std::string(context) + ": stride_w must be >= 1");
  if (g.in_channels < 1 || g.out_channels < 1)
    throw Error(ErrorCode::range, std::string(context) + ": channel counts must be >= 1");
}

inline void check_same_shape(const Shape& a, const Shape& b, const char* context) {
  if (a.channels != b.channels) throw ShapeError("channels", a.channels, b.channels, context);
  if (a.height != b.height) throw ShapeError("height", a.height, b.height, context);
  if (a.width != b.width) throw ShapeError("width", a.width, b.width, context);
}

}  // namespace detail

/// Unrolls every kernel footprint of `input` into one column.
/// Result is (in_channels*kh*kw) x (out_h*out_w); row index = (c*kh + ky)*kw + kx.
template <typename Scalar>
RowMatrix<Scalar> im2col(const Tensor<Scalar>& input, const ConvGeometry& g) {
  detail::check_geometry(g, "im2col");
  if (input.channels() != g.in_channels) throw ShapeError("channels", g.in_channels, input.channels(), "conv2d");
  if (input.height() < g.kernel_h) throw ShapeError("height", g.kernel_h, input.height(), "conv2d input smaller than kernel");
  if (input.width() < g.kernel_w) throw ShapeError("width", g.kernel_w, input.width(), "conv2d input smaller than kernel");

  const int oh = conv_output_extent(input.height(), g.kernel_h, g.stride_h);
  const int ow = conv_output_extent(input.width(), g.kernel_w, g.stride_w);
  RowMatrix<Scalar> col(g.patch_size(), long(oh) * ow);
  long row = 0;
  for (int c = 0; c < g.in_channels; ++c) {
    auto plane = input.channel(c);
    for (int ky = 0; ky < g.kernel_h; ++ky) {
      for (int kx = 0; kx < g.kernel_w; ++kx, ++row) {
        Scalar* dst = col.row(row).data();
        for (int oy = 0; oy < oh; ++oy) {
          const Scalar* src = plane.row(oy * g.stride_h + ky).data() + kx;
          for (int ox = 0; ox < ow; ++ox) *dst++ = src[long(ox) * g.stride_w];
        }
      }
    }
  }
  return col;
}

/// Adjoint of im2col: scatters (accumulates) columns back onto `out`.
template <typename Scalar>
void col2im_add(const RowMatrix<Scalar>& col, const ConvGeometry& g, Tensor<Scalar>& out) {
  const int oh = conv_output_extent(out.height(), g.kernel_h, g.stride_h);
  const int ow = conv_output_extent(out.width(), g.kernel_w, g.stride_w);
  assert(col.rows() == g.patch_size() && col.cols() == long(oh) * ow);
  long row = 0;
  for (int c = 0; c < g.in_channels; ++c) {
    auto plane = out.channel(c);
    for (int ky = 0; ky < g.kernel_h; ++ky) {
      for (int kx = 0; kx < g.kernel_w; ++kx, ++row) {
        const Scalar* src = col.row(row).data();
        for (int oy = 0; oy < oh; ++oy) {
          Scalar* dst = plane.row(oy * g.stride_h + ky).data() + kx;
          for (int ox = 0; ox < ow; ++ox) dst[long(ox) * g.stride_w] += *src++;
        }
      }
    }
  }
}

/// Valid-padding strided convolution. `weights` is laid out [out][in][ky][kx].
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, std::span<const Scalar> weights, std::span<const Scalar> bias,
                      const ConvGeometry& g) {
  detail::check_geometry(g, "conv2d");
  if (long(weights.size()) != g.weight_count())
    throw ShapeError("weights", g.weight_count(), long(weights.size()), "conv2d");
  if (long(bias.size()) != g.out_channels) throw ShapeError("bias", g.out_channels, long(bias.size()), "conv2d");

  const RowMatrix<Scalar> col = im2col(input, g);
  Tensor<Scalar> out(g.out_channels, conv_output_extent(input.height(), g.kernel_h, g.stride_h),
                     conv_output_extent(input.width(), g.kernel_w, g.stride_w));
  Eigen::Map<const RowMatrix<Scalar>> w(weights.data(), g.out_channels, g.patch_size());
  Eigen::Map<const Vector<Scalar>> b(bias.data(), g.out_channels);
  auto planes = out.planes();
  planes.noalias() = w * col;
  planes.colwise() += b;
  return out;
}

/// y = W x + b
template <typename Scalar>
Vector<Scalar> fully_connected(const Eigen::Ref<const Vector<Scalar>>& x,
                               const Eigen::Ref<const RowMatrix<Scalar>>& weights,
                               const Eigen::Ref<const Vector<Scalar>>& bias) {
  if (weights.cols() != x.size()) throw ShapeError("length", weights.cols(), x.size(), "fully_connected input");
  if (bias.size() != weights.rows()) throw ShapeError("length", weights.rows(), bias.size(), "fully_connected bias");
  Vector<Scalar> y = bias;
  y.noalias() += weights * x;
  return y;
}

/// Per-pixel mean over channels; a single-channel result.
template <typename Scalar>
Tensor<Scalar> channel_mean(const Tensor<Scalar>& t) {
  if (t.channels() == 1) return t;
  Tensor<Scalar> out(1, t.height(), t.width());
  out.values() = t.planes().colwise().sum().transpose() / Scalar(t.channels());
  return out;
}

/// Transposed convolution of a one-channel map with an all-ones kernel and zero
/// bias, padded with zeros on the bottom/right up to the requested size.
template <typename Scalar>
Tensor<Scalar> deconv_upscale(const Tensor<Scalar>& map, const ConvGeometry& g, int target_h, int target_w) {
  detail::check_geometry(g, "deconv_upscale");
  if (map.channels() != 1) throw ShapeError("channels", 1, map.channels(), "deconv_upscale");
  const int nat_h = deconv_natural_extent(map.height(), g.kernel_h, g.stride_h);
  const int nat_w = deconv_natural_extent(map.width(), g.kernel_w, g.stride_w);
  if (target_h < nat_h || target_h - nat_h >= g.stride_h)
    throw ShapeError("height", nat_h, target_h, "deconv_upscale target not reachable by output padding");
  if (target_w < nat_w || target_w - nat_w >= g.stride_w)
    throw ShapeError("width", nat_w, target_w, "deconv_upscale target not reachable by output padding");

  Tensor<Scalar> out(1, target_h, target_w);
  auto dst = out.channel(0);
  auto src = map.channel(0);
  for (int i = 0; i < map.height(); ++i)
    for (int j = 0; j < map.width(); ++j)
      dst.block(i * g.stride_h, j * g.stride_w, g.kernel_h, g.kernel_w).array() += src(i, j);
  return out;
}

template <typename Scalar>
Tensor<Scalar> elementwise_mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::check_same_shape(a.shape(), b.shape(), "elementwise_mul");
  Tensor<Scalar> out(a.shape());
  out.values() = a.values().cwiseProduct(b.values());
  return out;
}

/// Affine rescale to [0, 1]. A constant tensor maps to all zeros.
template <typename Scalar>
Tensor<Scalar> normalize_01(const Tensor<Scalar>& t) {
  const Scalar lo = t.values().minCoeff();
  const Scalar hi = t.values().maxCoeff();
  Tensor<Scalar> out(t.shape());
  if (!(hi > lo)) return out;
  out.values() = (t.values().array() - lo) / (hi - lo);
  return out;
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& t) {
  Tensor<Scalar> out(t.shape());
  out.values() = t.values().cwiseMax(Scalar(0));
  return out;
}

}  // namespace visback
